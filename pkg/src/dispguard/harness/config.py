"""Experiment configuration.

A config file is a YAML or JSON tree whose top-level sections mirror the
dataclasses below; every key is optional and unknown keys are rejected::

    seed: 0
    frames: 1000               # evaluation frames per attack case
    calibration_frames: 1000   # attack-free frames per threshold
    r: 0.01                    # designated false alarm rate
    r_grid: [0.0, 0.01, 0.02, 0.03, 0.05]
    output_dir: runs/default
    workers: 1
    histogram_bin: 0.025
    rig:     {focal_length, image_width, image_height, scenario1_positions,
              camera_positions, lidar_pose, near_clip}
    scene:   {obstacle_count, depth_range, width_range, height_range,
              lateral_range, ground_height, background_range}
    lidar:   {channels, elevation_range, azimuth_range, azimuth_step,
              range_jitter, max_range}
    noise:   {gaussian_sigma, outlier_fraction, outlier_range,
              edge_fattening, d_max}
    attacks: {spoof_width, spoof_height, spoof_distance, spoof_lateral,
              spoof_density, facula_radius}
    sweep:   {spoof_widths, facula_radii, frames, r}

The focal length and camera spacing are KITTI-like choices; the noise
defaults are calibration decisions for the stereo emulator, not measured
properties of any particular network.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

import yaml

from dispguard.errors import ConfigError
from dispguard.geometry import RigConfig, make_rig
from dispguard.scene import SceneParams
from dispguard.sensors import EstimatorNoiseModel, LidarConfig

KINDS = ("scenario1", "scenario2", "identification")


@dataclass(frozen=True)
class RigSettings:
    focal_length: float = 721.5377
    image_width: int = 1242
    image_height: int = 375
    scenario1_positions: Tuple[float, ...] = (0.0, 0.54)
    camera_positions: Tuple[float, ...] = (0.0, 0.27, 0.54)
    # in line with the leftmost camera, 8 cm above and 27 cm behind it
    lidar_pose: Tuple[float, float, float] = (-0.54, -0.08, -0.27)
    near_clip: float = 0.5

    def rig_for(self, kind: str) -> RigConfig:
        if kind == "scenario1":
            positions, lidar = self.scenario1_positions, True
        elif kind == "scenario2":
            positions, lidar = self.camera_positions, False
        elif kind == "identification":
            positions, lidar = self.camera_positions, True
        else:
            raise ConfigError(f"unknown experiment kind {kind!r}")
        return make_rig(positions, lidar=lidar, focal_length=self.focal_length,
                        image_width=self.image_width, image_height=self.image_height,
                        lidar_pose=tuple(self.lidar_pose))


@dataclass(frozen=True)
class AttackSettings:
    spoof_width: float = 2.5
    spoof_height: float = 1.5
    spoof_distance: Tuple[float, float] = (6.0, 10.0)
    spoof_lateral: Tuple[float, float] = (-1.5, 1.5)
    spoof_density: float = 500.0
    facula_radius: Tuple[float, float] = (187.0, 375.0)


@dataclass(frozen=True)
class SweepSettings:
    spoof_widths: Tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5)
    facula_radii: Tuple[float, ...] = (37.5, 75.0, 112.5, 150.0, 187.5, 225.0)
    frames: int = 500
    r: float = 0.01


def _default_noise() -> EstimatorNoiseModel:
    return EstimatorNoiseModel(edge_fattening=2)


@dataclass(frozen=True)
class ExperimentConfig:
    rig: RigSettings = field(default_factory=RigSettings)
    scene: SceneParams = field(default_factory=SceneParams)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    noise: EstimatorNoiseModel = field(default_factory=_default_noise)
    attacks: AttackSettings = field(default_factory=AttackSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    r: float = 0.01
    r_grid: Tuple[float, ...] = (0.0, 0.01, 0.02, 0.03, 0.05)
    frames: int = 1000
    calibration_frames: int = 1000
    seed: int = 0
    output_dir: str = "runs/default"
    workers: int = 1
    histogram_bin: float = 0.025

    def __post_init__(self):
        if self.frames <= 0 or self.calibration_frames <= 0 or self.sweep.frames <= 0:
            raise ConfigError("frame counts must be positive")
        for r in (self.r, self.sweep.r, *self.r_grid):
            if not 0.0 <= r <= 1.0:
                raise ConfigError(f"false alarm rate {r} outside [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0 < self.histogram_bin <= 1:
            raise ConfigError("histogram_bin must lie in (0, 1]")
        self.scene.validate()

    @property
    def r_values(self) -> Tuple[float, ...]:
        """Sorted union of ``r_grid``, ``r`` and ``sweep.r``."""
        return tuple(sorted({*self.r_grid, self.r, self.sweep.r}))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: Optional[Mapping[str, Any]]) -> "ExperimentConfig":
        return _build(cls, data or {}, "")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data: Mapping[str, Any], path: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"section {path or '<root>'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config key(s) in {path or '<root>'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        default = (f.default_factory() if f.default_factory is not dataclasses.MISSING
                   else f.default)
        where = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(default):
            merged = {**dataclasses.asdict(default), **(value or {})} \
                if isinstance(value, Mapping) else value
            kwargs[name] = _build(type(default), merged, where)
        else:
            kwargs[name] = _coerce(value, default, where)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid section {path or '<root>'}: {exc}") from exc


def _coerce(value, default, where):
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        return tuple(_coerce(v, default[0] if default else 0.0, where) for v in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    return value


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)
