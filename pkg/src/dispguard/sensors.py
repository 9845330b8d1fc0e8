"""Simulated sensor outputs.

* :func:`sample_lidar` ray-casts a spinning LiDAR against a scene.
* :func:`lidar_to_disparity` turns a point cloud into a sparse disparity
  map on a reference image.
* :func:`estimate_stereo_disparity` stands in for a learned stereo network:
  the exact disparity plus parametric error, with saturated (facula)
  regions replaced by garbage.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Optional, Sequence, Tuple

import numpy as np

from dispguard.errors import ContractError
from dispguard.geometry import D_MAX, NEAR_CLIP, CameraModel, project_points

if TYPE_CHECKING:
    from dispguard.attacks import FaculaMask
    from dispguard.scene import Scene


@dataclass
class DisparityMap:
    """Per-pixel disparity referenced to one camera.

    ``source_pair`` is ``(partner, reference)``, i.e. ``DM_{i,j}`` is the
    map of pair ``i`` against reference ``j``. Invalid cells hold NaN.
    """

    values: np.ndarray
    valid: np.ndarray
    source_pair: Tuple[int, int] = (-1, -1)
    baseline: float = 0.0

    def __post_init__(self):
        if self.values.shape != self.valid.shape or self.values.ndim != 2:
            raise ContractError("values and valid must be matching 2-D grids")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean())

    @classmethod
    def empty(cls, height: int, width: int, source_pair=(-1, -1), baseline=0.0):
        return cls(np.full((height, width), np.nan, dtype=np.float32),
                   np.zeros((height, width), dtype=bool), source_pair, baseline)


@dataclass
class PointCloud:
    """LiDAR returns as an ``(N, 4)`` float32 array of x, y, z, intensity."""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 4), np.float32))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float32).reshape(-1, 4)
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]


@dataclass(frozen=True)
class LidarConfig:
    """Beam geometry of a spinning LiDAR (angles in degrees).

    Azimuth 0 looks along +z and grows to the right; elevation grows
    upward. The default fan covers the reference camera's field of view
    and leaves roughly 5% of reference pixels with a return.
    """

    channels: int = 64
    elevation_range: Tuple[float, float] = (-16.0, 16.0)
    azimuth_range: Tuple[float, float] = (-45.0, 45.0)
    azimuth_step: float = 0.2
    range_jitter: float = 0.01
    max_range: float = 120.0

    def azimuths(self) -> np.ndarray:
        lo, hi = self.azimuth_range
        count = int(np.floor((hi - lo) / self.azimuth_step + 1e-9)) + 1
        return np.radians(lo + self.azimuth_step * np.arange(count))

    def elevations(self) -> np.ndarray:
        lo, hi = self.elevation_range
        return np.radians(np.linspace(lo, hi, self.channels))


@dataclass(frozen=True)
class EstimatorNoiseModel:
    """Error model of the emulated stereo network.

    The exact map is first dilated by ``edge_fattening`` pixels (the
    foreground fattening every window-based matcher shows at depth edges;
    it is deterministic, so two estimates sharing a reference image agree
    on it). Every pixel then gets Gaussian error; a random ``outlier_fraction`` of pixels
    is instead drawn uniformly within ``outlier_range`` of the truth; pixels
    under a facula in either image are uniform over ``[0, d_max]``.
    """

    gaussian_sigma: float = 0.7
    outlier_fraction: float = 0.01
    outlier_range: float = 10.0
    edge_fattening: int = 0
    facula_corruption: str = "uniform"
    d_max: float = D_MAX

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise ContractError("gaussian_sigma must be nonnegative")
        if self.edge_fattening < 0:
            raise ContractError("edge_fattening must be nonnegative")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ContractError("outlier_fraction must lie in [0, 1]")
        if self.facula_corruption != "uniform":
            raise ContractError(f"unknown facula corruption {self.facula_corruption!r}")


_INTENSITY = {"background": 0.3, "ground": 0.2, "obstacle": 0.6}


def sample_lidar(scene: "Scene", lidar: LidarConfig, seed: int,
                 pose: Sequence[float] = (0.0, 0.0, 0.0)) -> PointCloud:
    """One return per beam at the nearest surface, in the LiDAR frame.

    ``pose`` is the LiDAR origin in the rig frame (translation only).
    """
    px, py, pz = (float(c) for c in pose)
    az, el = np.meshgrid(lidar.azimuths(), lidar.elevations())
    az, el = az.ravel(), el.ravel()
    dx = np.cos(el) * np.sin(az)
    dy = -np.sin(el)
    dz = np.cos(el) * np.cos(az)

    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dz > 0, (scene.background_depth - pz) / dz, np.inf)
        t[t <= 0] = np.inf
        intensity = np.full(t.shape, _INTENSITY["background"])
        t_ground = np.where(dy > 0, (scene.ground_plane - py) / dy, np.inf)
        t_ground[t_ground <= 0] = np.inf
        hit = t_ground < t
        t[hit] = t_ground[hit]
        intensity[hit] = _INTENSITY["ground"]
        for ob in scene.obstacles:
            x, y, z = ob.center
            tb = np.where(dz > 0, (z - pz) / dz, np.inf)
            hx = px + tb * dx
            hy = py + tb * dy
            inside = ((tb > 0) & (np.abs(hx - x) <= ob.width / 2)
                      & (np.abs(hy - y) <= ob.height / 2) & (tb < t))
            t[inside] = tb[inside]
            intensity[inside] = _INTENSITY["obstacle"]

    keep = np.isfinite(t) & (t <= lidar.max_range)
    rng = np.random.default_rng(seed)
    jitter = rng.normal(0.0, lidar.range_jitter, size=int(keep.sum()))
    r = t[keep] + jitter
    pts = np.column_stack([r * dx[keep], r * dy[keep], r * dz[keep], intensity[keep]])
    return PointCloud(pts.astype(np.float32))


def lidar_to_disparity(cloud: PointCloud, reference: CameraModel,
                       stereo_baseline: float, *,
                       lidar_pose: Sequence[float] = (0.0, 0.0, 0.0),
                       near_clip: float = NEAR_CLIP, d_max: float = D_MAX,
                       partner: int = 0) -> DisparityMap:
    """Sparse disparity map from projecting ``cloud`` onto ``reference``.

    Depth converts to disparity with ``stereo_baseline`` so the result is on
    the same scale as the stereo map it will be compared against. When
    several points land on one pixel the nearest wins.
    """
    H, W = reference.shape
    out = DisparityMap.empty(H, W, (partner, reference.id), stereo_baseline)
    if len(cloud) == 0:
        return out
    pts = cloud.xyz.astype(np.float64) + np.asarray(lidar_pose, dtype=np.float64)
    u, v, z, in_view = project_points(pts, reference, near_clip)
    if not in_view.any():
        return out
    cols = np.floor(u[in_view]).astype(np.int64)
    rows = np.floor(v[in_view]).astype(np.int64)
    z = z[in_view]
    flat = rows * W + cols
    order = np.lexsort((z, flat))
    flat, z = flat[order], z[order]
    first = np.ones(len(flat), dtype=bool)
    first[1:] = flat[1:] != flat[:-1]
    flat, z = flat[first], z[first]
    disp = np.minimum(reference.focal_length * stereo_baseline / z, d_max)
    out.values.ravel()[flat] = disp.astype(np.float32)
    out.valid.ravel()[flat] = True
    return out


def fatten_edges(values: np.ndarray, k: int) -> np.ndarray:
    """Max filter over a ``(2k+1) x (2k+1)`` window, edges clamped."""
    if k <= 0:
        return values.copy()
    out = values.copy()
    for axis in (0, 1):
        src = out.copy()
        n = src.shape[axis]
        # shifts of n or more add nothing once edges are clamped
        for s in range(1, min(k, n - 1) + 1):
            lead = [slice(None)] * 2
            lag = [slice(None)] * 2
            lead[axis], lag[axis] = slice(0, n - s), slice(s, n)
            np.maximum(out[tuple(lead)], src[tuple(lag)], out=out[tuple(lead)])
            np.maximum(out[tuple(lag)], src[tuple(lead)], out=out[tuple(lag)])
    return out


def estimate_stereo_disparity(truth: DisparityMap, noise: EstimatorNoiseModel,
                              faculae: Optional[Mapping[int, "FaculaMask"]] = None,
                              seed: int = 0) -> DisparityMap:
    """Emulated stereo estimate of a fully valid ``truth`` map.

    ``faculae`` maps a camera id to the facula blinding that camera; only
    masks of the two cameras in ``truth.source_pair`` take effect. The
    random draws do not depend on which faculae are present, so the same
    seed with nested masks gives nested corruption.
    """
    clean = clean_stereo_estimate(truth, noise, seed)
    return apply_faculae(clean, noise, faculae, seed)


def clean_stereo_estimate(truth: DisparityMap, noise: EstimatorNoiseModel,
                          seed: int = 0) -> DisparityMap:
    """The attack-free part of :func:`estimate_stereo_disparity`."""
    if not truth.valid.all():
        raise ContractError("stereo emulation needs a fully valid truth map")
    rng = np.random.default_rng(seed)
    shape = truth.values.shape
    base = fatten_edges(truth.values.astype(np.float32), noise.edge_fattening)
    out = base.copy()
    if noise.gaussian_sigma > 0:
        out += np.float32(noise.gaussian_sigma) * rng.standard_normal(shape, dtype=np.float32)
    if noise.outlier_fraction > 0:
        picked = rng.random(shape, dtype=np.float32) < noise.outlier_fraction
        k = int(picked.sum())
        offsets = rng.uniform(-noise.outlier_range, noise.outlier_range, size=k)
        out[picked] = base[picked] + offsets.astype(np.float32)
    np.clip(out, 0.0, noise.d_max, out=out)
    return DisparityMap(out, np.ones(shape, dtype=bool), truth.source_pair, truth.baseline)


def apply_faculae(estimate: DisparityMap, noise: EstimatorNoiseModel,
                  faculae: Optional[Mapping[int, "FaculaMask"]], seed: int = 0) -> DisparityMap:
    """Replace pixels under a facula of either pair camera by uniform garbage.

    The garbage comes from its own stream derived from ``seed``, so it is
    the same whichever masks are present.
    """
    masks = [m.covered for cam, m in (faculae or {}).items()
             if cam in estimate.source_pair]
    if not masks:
        return estimate
    shape = estimate.values.shape
    covered = np.logical_or.reduce(masks)
    if covered.shape != shape:
        raise ContractError("facula mask does not match the image size")
    rng = np.random.default_rng([seed, 1])
    garbage = rng.random(shape, dtype=np.float32) * np.float32(noise.d_max)
    out = estimate.values.copy()
    out[covered] = garbage[covered]
    return DisparityMap(out, estimate.valid.copy(), estimate.source_pair, estimate.baseline)
