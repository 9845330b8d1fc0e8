"""Synthetic road scenes with exactly known depth.

A scene is a background wall, a flat ground plane and a handful of
fronto-parallel boxes resting on the ground. Every surface is planar and
axis aligned, so per-pixel depth has a closed form and the renderer can be
checked by hand.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from dispguard.errors import ConfigError
from dispguard.geometry import D_MAX, NEAR_CLIP, CameraModel
from dispguard.sensors import DisparityMap


@dataclass(frozen=True)
class Obstacle:
    """Fronto-parallel rectangle centred at ``center`` (rig frame, metres)."""

    center: Tuple[float, float, float]
    width: float
    height: float
    kind: str = "box-front"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("obstacle width and height must be positive")
        if self.center[2] <= 0:
            raise ConfigError("obstacle must be in front of the rig")


@dataclass(frozen=True)
class Scene:
    obstacles: Tuple[Obstacle, ...]
    ground_plane: float = 1.65
    background_depth: float = 60.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for ob in self.obstacles:
            if ob.center[2] <= NEAR_CLIP:
                raise ConfigError("obstacle closer than the near clip plane")
            if ob.center[2] >= self.background_depth:
                raise ConfigError("background must lie behind every obstacle")


@dataclass(frozen=True)
class SceneParams:
    """Sampling ranges for :func:`generate_scene` (closed intervals)."""

    obstacle_count: Tuple[int, int] = (2, 6)
    depth_range: Tuple[float, float] = (5.0, 40.0)
    width_range: Tuple[float, float] = (0.6, 2.5)
    height_range: Tuple[float, float] = (0.8, 2.0)
    lateral_range: Tuple[float, float] = (-8.0, 8.0)
    ground_height: float = 1.65
    background_range: Tuple[float, float] = (50.0, 80.0)

    def validate(self):
        lo, hi = self.obstacle_count
        if lo < 0 or hi < lo:
            raise ConfigError(f"invalid obstacle_count range {self.obstacle_count}")
        for name in ("depth_range", "width_range", "height_range",
                     "lateral_range", "background_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ConfigError(f"inverted {name}: {(lo, hi)}")
        if self.depth_range[0] <= NEAR_CLIP:
            raise ConfigError("depth_range must start beyond the near clip plane")
        if self.width_range[0] <= 0 or self.height_range[0] <= 0:
            raise ConfigError("obstacle sizes must be positive")
        if self.background_range[0] <= self.depth_range[1]:
            raise ConfigError("background_range must lie behind depth_range")


def generate_scene(params: SceneParams, seed: int) -> Scene:
    params.validate()
    rng = np.random.default_rng(seed)
    count = int(rng.integers(params.obstacle_count[0], params.obstacle_count[1] + 1))
    background = float(rng.uniform(*params.background_range))
    obstacles = []
    for _ in range(count):
        z = float(rng.uniform(*params.depth_range))
        x = float(rng.uniform(*params.lateral_range))
        w = float(rng.uniform(*params.width_range))
        h = float(rng.uniform(*params.height_range))
        # boxes stand on the ground
        obstacles.append(Obstacle((x, params.ground_height - h / 2.0, z), w, h))
    return Scene(tuple(obstacles), params.ground_height, background, seed)


def _pixel_span(lo: float, hi: float, size: int) -> Tuple[int, int]:
    """Half-open index range of pixels whose centres lie in ``[lo, hi]``."""
    start = max(int(np.ceil(lo - 0.5)), 0)
    stop = min(int(np.floor(hi - 0.5)) + 1, size)
    return start, max(start, stop)


def render_depth(scene: Scene, cam: CameraModel) -> np.ndarray:
    """Depth of the nearest surface along each pixel-centre ray of ``cam``."""
    H, W = cam.shape
    f = cam.focal_length
    cx, cy = cam.principal_point
    depth = np.full((H, W), scene.background_depth, dtype=np.float64)

    rows = np.arange(H) + 0.5 - cy
    below = rows > 0
    ground = np.full(H, np.inf)
    ground[below] = f * scene.ground_plane / rows[below]
    depth = np.minimum(depth, ground[:, None])

    for ob in scene.obstacles:
        x, y, z = ob.center
        u0, u1 = _pixel_span(cx + f * (x - ob.width / 2 - cam.x_position) / z,
                             cx + f * (x + ob.width / 2 - cam.x_position) / z, W)
        v0, v1 = _pixel_span(cy + f * (y - ob.height / 2) / z,
                             cy + f * (y + ob.height / 2) / z, H)
        if u0 == u1 or v0 == v1:
            continue
        patch = depth[v0:v1, u0:u1]
        # strict: an earlier obstacle keeps a tied pixel
        np.copyto(patch, z, where=z < patch)
    return depth


def depth_to_disparity_map(depth: np.ndarray, f: float, b: float,
                           d_max: float = D_MAX) -> np.ndarray:
    if b == 0:
        return np.zeros(depth.shape, dtype=np.float32)
    return np.minimum(f * b / depth, d_max).astype(np.float32)


def render_truth_disparity(scene: Scene, reference: CameraModel,
                           partner: CameraModel, *, d_max: float = D_MAX,
                           depth: np.ndarray | None = None) -> DisparityMap:
    """Exact disparity map of ``scene`` seen from ``reference`` against ``partner``.

    ``depth`` may be passed to reuse a :func:`render_depth` result for the
    same reference camera.
    """
    if depth is None:
        depth = render_depth(scene, reference)
    b = abs(reference.baseline_position - partner.baseline_position)
    values = depth_to_disparity_map(depth, reference.focal_length, b, d_max)
    return DisparityMap(values, np.ones(values.shape, dtype=bool),
                        (partner.id, reference.id), b)
