"""Rectified pinhole rig: triangulation, projection and baseline rescaling.

Frame convention used throughout the package: +z forward, +x rightward,
+y downward. Cameras sit on a common lateral axis; ``baseline_position``
grows from right to left, so a camera's x coordinate is
``-baseline_position``. Pixel ``(col, row)`` covers ``[col, col+1) x
[row, row+1)``; its centre is ``(col + 0.5, row + 0.5)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from dispguard.errors import ContractError, DomainError

NEAR_CLIP = 0.5
D_MAX = 192.0


@dataclass(frozen=True)
class CameraModel:
    """One rectified camera of a collinear rig.

    ``principal_point`` defaults to the image centre.
    """

    id: int
    focal_length: float
    baseline_position: float
    image_width: int = 1242
    image_height: int = 375
    principal_point: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.focal_length <= 0:
            raise DomainError(f"focal_length must be positive, got {self.focal_length}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise DomainError("image dimensions must be positive")
        if self.principal_point is None:
            object.__setattr__(
                self, "principal_point",
                (self.image_width / 2.0, self.image_height / 2.0))

    @property
    def x_position(self) -> float:
        """Lateral coordinate of the optical centre in the rig frame."""
        return -self.baseline_position

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.image_height, self.image_width)


@dataclass(frozen=True)
class RigConfig:
    """Ordered cameras (right to left) and an optional LiDAR.

    Sensor indices follow the usual convention: with a LiDAR present it is
    sensor 0 and the cameras are 1..n; without one the cameras are 0..n.
    Each ``CameraModel.id`` must equal its sensor index.
    """

    cameras: Tuple[CameraModel, ...]
    lidar_present: bool = True
    lidar_pose: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        cams = tuple(self.cameras)
        object.__setattr__(self, "cameras", cams)
        if len(cams) < 2:
            raise ContractError("a rig needs at least two cameras")
        first = 1 if self.lidar_present else 0
        for k, cam in enumerate(cams):
            if cam.id != first + k:
                raise ContractError(
                    f"camera at position {k} has id {cam.id}, expected {first + k}")
        ref = cams[0]
        for cam in cams[1:]:
            if (cam.focal_length != ref.focal_length
                    or cam.shape != ref.shape
                    or cam.principal_point != ref.principal_point):
                raise ContractError("all cameras of a rectified rig share intrinsics")
        positions = [c.baseline_position for c in cams]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ContractError("baseline_position must increase strictly right to left")

    @property
    def n(self) -> int:
        """Index of the last (leftmost) sensor."""
        return self.cameras[-1].id

    @property
    def sensor_ids(self) -> Tuple[int, ...]:
        return tuple(range(self.n + 1))

    def camera(self, sensor_id: int) -> CameraModel:
        for cam in self.cameras:
            if cam.id == sensor_id:
                return cam
        raise KeyError(f"sensor {sensor_id} is not a camera of this rig")

    def baseline(self, a: int, b: int) -> float:
        return abs(self.camera(a).baseline_position - self.camera(b).baseline_position)


def make_rig(positions: Sequence[float], *, lidar: bool = True,
             focal_length: float = 721.5377, image_width: int = 1242,
             image_height: int = 375,
             lidar_pose: Tuple[float, float, float] = (0.0, 0.0, 0.0)) -> RigConfig:
    first = 1 if lidar else 0
    cams = tuple(
        CameraModel(first + k, focal_length, float(p), image_width, image_height)
        for k, p in enumerate(positions))
    return RigConfig(cams, lidar_present=lidar, lidar_pose=tuple(lidar_pose))


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value}")


def disparity_to_depth(d: float, f: float, b: float) -> float:
    """Depth from disparity, ``z = f * b / d``."""
    _check_positive(d=d, f=f, b=b)
    return f * b / d


def depth_to_disparity(z: float, f: float, b: float) -> float:
    """Disparity from depth, ``d = f * b / z``."""
    _check_positive(z=z, f=f, b=b)
    return f * b / z


class Projection(NamedTuple):
    u: float
    v: float
    depth: float

    @property
    def pixel(self) -> Tuple[int, int]:
        """Integer (col, row) of the pixel containing the projection."""
        return (int(np.floor(self.u)), int(np.floor(self.v)))


def project_point(p: Sequence[float], cam: CameraModel,
                  near_clip: float = NEAR_CLIP) -> Optional[Projection]:
    """Project a rig-frame point onto ``cam``; ``None`` when out of view."""
    x, y, z = (float(c) for c in p[:3])
    if not z > near_clip:
        return None
    cx, cy = cam.principal_point
    u = cx + cam.focal_length * (x - cam.x_position) / z
    v = cy + cam.focal_length * y / z
    if not (0.0 <= u < cam.image_width and 0.0 <= v < cam.image_height):
        return None
    return Projection(u, v, z)


def project_points(points: np.ndarray, cam: CameraModel,
                   near_clip: float = NEAR_CLIP):
    """Vectorised :func:`project_point`.

    Returns
    -------
    u, v, z : np.ndarray
        Continuous pixel coordinates and depth for every input point.
    in_view : np.ndarray of bool
        Mask of points that land inside the image in front of the clip plane.
    """
    pts = np.asarray(points, dtype=np.float64)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    cx, cy = cam.principal_point
    front = z > near_clip
    safe_z = np.where(front, z, 1.0)
    u = cx + cam.focal_length * (x - cam.x_position) / safe_z
    v = cy + cam.focal_length * y / safe_z
    in_view = front & (u >= 0) & (u < cam.image_width) & (v >= 0) & (v < cam.image_height)
    return u, v, z, in_view


def rescale_disparity(dmap, b_from: float, b_to: float):
    """Move a disparity map to another baseline; validity is untouched."""
    _check_positive(b_from=b_from, b_to=b_to)
    values = dmap.values.copy()
    if b_to != b_from:
        values[dmap.valid] = values[dmap.valid] * (b_to / b_from)
    return replace(dmap, values=values, valid=dmap.valid.copy(), baseline=b_to)
