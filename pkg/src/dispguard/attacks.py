"""Optical attack injection: LiDAR spoofing and camera blinding."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from dispguard.errors import DomainError
from dispguard.sensors import PointCloud

SPOOF_INTENSITY = 1.0


@dataclass(frozen=True)
class LidarSpoofParams:
    """Fake fronto-parallel block of returns (LiDAR frame, metres).

    ``bottom`` is the y coordinate of the block's lower edge (+y is down),
    so the default block stands on a ground plane 1.73 m below the sensor.
    """

    width: float = 2.5
    height: float = 1.5
    distance_range: Tuple[float, float] = (6.0, 10.0)
    lateral_offset: float = 0.0
    point_density: float = 500.0
    seed: int = 0
    bottom: float = 1.73

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DomainError("spoof block width and height must be positive")
        lo, hi = self.distance_range
        if not 0 < lo <= hi:
            raise DomainError(f"invalid spoof distance range {self.distance_range}")
        if self.point_density < 0:
            raise DomainError("point_density must be nonnegative")


def spoof_block(params: LidarSpoofParams) -> Tuple[np.ndarray, float]:
    """Spoofed points ``(M, 4)`` and the block distance they sit at."""
    rng = np.random.default_rng(params.seed)
    distance = float(rng.uniform(*params.distance_range))
    if params.point_density == 0:
        return np.zeros((0, 4), np.float32), distance
    step = 1.0 / np.sqrt(params.point_density)
    nx = max(int(round(params.width / step)), 1)
    ny = max(int(round(params.height / step)), 1)
    sx, sy = params.width / nx, params.height / ny
    gx, gy = np.meshgrid(np.arange(nx), np.arange(ny))
    # one jittered sample per grid cell keeps every point inside the block
    x = params.lateral_offset - params.width / 2 + (gx.ravel() + rng.random(gx.size)) * sx
    y = params.bottom - params.height + (gy.ravel() + rng.random(gy.size)) * sy
    z = np.full(x.shape, distance)
    pts = np.column_stack([x, y, z, np.full(x.shape, SPOOF_INTENSITY)])
    return pts.astype(np.float32), distance


def inject_lidar_spoof(cloud: PointCloud, params: LidarSpoofParams) -> PointCloud:
    """Add a spoofed block and drop genuine returns whose beam it intercepts."""
    fake, distance = spoof_block(params)
    if len(fake) == 0:
        return PointCloud(cloud.points.copy())
    pts = cloud.points.astype(np.float64)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    behind = z > distance
    scale = np.where(behind, distance / np.where(behind, z, 1.0), 0.0)
    hx, hy = x * scale, y * scale
    blocked = (behind
               & (np.abs(hx - params.lateral_offset) <= params.width / 2)
               & (hy >= params.bottom - params.height) & (hy <= params.bottom))
    return PointCloud(np.vstack([cloud.points[~blocked], fake]))


@dataclass(frozen=True)
class FaculaMask:
    """Saturated disk on one image.

    The Gaussian intensity profile (``intensity_sigma``) is kept only as
    metadata; the disparity damage is modelled by the stereo emulator.
    """

    center: Tuple[float, float]
    radius: float
    covered: np.ndarray
    intensity_sigma: float

    @property
    def coverage_fraction(self) -> float:
        return float(self.covered.mean())

    @property
    def nominal_coverage(self) -> float:
        """Unclipped disk area over image area, ``pi r^2 / (W H)``."""
        return float(np.pi * self.radius ** 2 / self.covered.size)


def nominal_coverage(radius: float, image_w: int, image_h: int) -> float:
    return float(np.pi * radius ** 2 / (image_w * image_h))


def make_facula(image_w: int, image_h: int, radius: float,
                center: Optional[Tuple[float, float]] = None,
                seed: int = 0) -> FaculaMask:
    """Disk mask of pixels whose centres lie within ``radius`` of ``center``.

    Without ``center`` one is drawn uniformly over the image area.
    """
    if not radius > 0:
        raise DomainError(f"facula radius must be positive, got {radius}")
    if center is None:
        rng = np.random.default_rng(seed)
        center = (float(rng.uniform(0, image_w)), float(rng.uniform(0, image_h)))
    cx, cy = (float(c) for c in center)
    if not (0 <= cx <= image_w and 0 <= cy <= image_h):
        raise DomainError(f"facula centre {center} outside the image")
    covered = np.zeros((image_h, image_w), dtype=bool)
    c0, c1 = max(int(np.floor(cx - radius)), 0), min(int(np.ceil(cx + radius)) + 1, image_w)
    r0, r1 = max(int(np.floor(cy - radius)), 0), min(int(np.ceil(cy + radius)) + 1, image_h)
    cols = np.arange(c0, c1) + 0.5
    rows = np.arange(r0, r1) + 0.5
    d2 = (cols[None, :] - cx) ** 2 + (rows[:, None] - cy) ** 2
    covered[r0:r1, c0:c1] = d2 <= radius ** 2
    return FaculaMask((cx, cy), float(radius), covered, radius / 2.0)
