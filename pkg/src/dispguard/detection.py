"""Attack detection from the disagreement of two disparity maps.

Two maps of the same reference view are compared pixel by pixel; the
fraction of inconsistent pixels (the disparity error) is thresholded at a
value calibrated from attack-free samples for a chosen false-alarm rate.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from dispguard.errors import CalibrationError, ContractError, NoOverlapError
from dispguard.geometry import CameraModel, rescale_disparity
from dispguard.sensors import (DisparityMap, EstimatorNoiseModel, PointCloud,
                               estimate_stereo_disparity, lidar_to_disparity)

ABS_TOLERANCE = 3.0
REL_TOLERANCE = 0.05

Triple = Tuple[int, int, int]


def pixel_inconsistent(d_a: float, d_b: float) -> bool:
    """True iff two disparities disagree by more than 3 px and more than 5%.

    A zero smaller disparity makes the relative condition hold whenever the
    values differ at all.
    """
    diff = abs(d_a - d_b)
    if not diff > ABS_TOLERANCE:
        return False
    low = min(d_a, d_b)
    if low <= 0:
        return True
    return diff / low > REL_TOLERANCE


def inconsistent_mask(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise :func:`pixel_inconsistent`."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = np.abs(a - b)
    out = diff > ABS_TOLERANCE
    # the relative test only matters where the absolute one already fails
    idx = np.flatnonzero(out)
    d = diff.ravel()[idx]
    low = np.minimum(a.ravel()[idx], b.ravel()[idx])
    ratio = np.full(d.shape, np.inf)
    np.divide(d, low, out=ratio, where=low > 0)
    out.ravel()[idx] = ratio > REL_TOLERANCE
    return out


@dataclass(frozen=True)
class DisparityError:
    value: float
    inconsistent_count: int
    valid_count: int
    triple: Optional[Triple] = None

    def __float__(self):
        return self.value


def disparity_error(map_a: DisparityMap, map_b: DisparityMap,
                    triple: Optional[Triple] = None) -> DisparityError:
    """Fraction of commonly valid pixels that fail the consistency test."""
    if map_a.values.shape != map_b.values.shape:
        raise ContractError(
            f"map sizes differ: {map_a.values.shape} vs {map_b.values.shape}")
    common = map_a.valid & map_b.valid
    n_valid = int(common.sum())
    if n_valid == 0:
        raise NoOverlapError("the two maps share no valid pixel")
    if n_valid == common.size:
        bad = int(np.count_nonzero(inconsistent_mask(map_a.values, map_b.values)))
    else:
        bad = int(np.count_nonzero(inconsistent_mask(map_a.values[common], map_b.values[common])))
    return DisparityError(bad / n_valid, bad, n_valid, triple)


def calibrate_threshold(samples: Iterable[float], r: float) -> float:
    """Threshold leaving the top ``r`` fraction of attack-free samples above it.

    With ``M`` samples, ``floor(r M)`` of the largest are virtual outliers and
    the threshold is the largest remaining one, i.e. the
    ``ceil((1 - r) M)``-th smallest sample.
    """
    values = np.sort(np.asarray([float(s) for s in samples], dtype=np.float64))
    if values.size == 0:
        raise CalibrationError("no calibration samples")
    if not 0.0 <= r <= 1.0:
        raise CalibrationError(f"false alarm rate must lie in [0, 1], got {r}")
    M = values.size
    outliers = int(math.floor(r * M + 1e-9))
    k = max(M - outliers, 1)
    return float(values[k - 1])


def detect(error: Union[DisparityError, float], theta: float) -> bool:
    return float(error) > theta


def _triple_key(triple: Triple) -> str:
    return ",".join(str(i) for i in triple)


@dataclass
class ThresholdSet:
    """Calibrated thresholds, keyed by ``(i, j, reference)``."""

    entries: Dict[Triple, float]
    r: float
    sample_count: Dict[Triple, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise CalibrationError(f"false alarm rate must lie in [0, 1], got {self.r}")
        self.entries = {tuple(k): float(v) for k, v in self.entries.items()}
        self.sample_count = {tuple(k): int(v) for k, v in self.sample_count.items()}

    def __getitem__(self, triple: Triple) -> float:
        try:
            return self.entries[tuple(triple)]
        except KeyError:
            raise ContractError(f"no threshold for triple {tuple(triple)}") from None

    def __contains__(self, triple) -> bool:
        return tuple(triple) in self.entries

    @classmethod
    def from_samples(cls, samples: Mapping[Triple, Sequence[float]], r: float) -> "ThresholdSet":
        return cls({t: calibrate_threshold(s, r) for t, s in samples.items()}, r,
                   {t: len(s) for t, s in samples.items()})

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "entries": [
                {"triple": list(t), "theta": self.entries[t],
                 "sample_count": self.sample_count.get(t, 0)}
                for t in sorted(self.entries)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ThresholdSet":
        entries, counts = {}, {}
        for item in data["entries"]:
            t = tuple(int(i) for i in item["triple"])
            entries[t] = float(item["theta"])
            counts[t] = int(item.get("sample_count", 0))
        return cls(entries, float(data["r"]), counts)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class ScenarioOutcome:
    error: DisparityError
    verdict: bool
    maps: Tuple[DisparityMap, DisparityMap]


def scenario1_maps(cloud: PointCloud, truth: DisparityMap, reference: CameraModel,
                   noise: EstimatorNoiseModel, faculae=None, seed: int = 0,
                   lidar_pose=(0.0, 0.0, 0.0)) -> Tuple[DisparityMap, DisparityMap]:
    """``(DM_02, DM_12)`` for one LiDAR and two cameras.

    ``truth`` is the exact map of the camera pair against ``reference``;
    the LiDAR map is built on that pair's baseline so both share a scale.
    """
    dm12 = estimate_stereo_disparity(truth, noise, faculae, seed)
    dm02 = lidar_to_disparity(cloud, reference, truth.baseline,
                              lidar_pose=lidar_pose, d_max=noise.d_max)
    return dm02, dm12


def run_scenario1(cloud: PointCloud, truth: DisparityMap, reference: CameraModel,
                  theta: float, noise: EstimatorNoiseModel, faculae=None,
                  seed: int = 0, lidar_pose=(0.0, 0.0, 0.0)) -> ScenarioOutcome:
    """Detection on a LiDAR + two-camera system (sensors 0, 1, 2)."""
    dm02, dm12 = scenario1_maps(cloud, truth, reference, noise, faculae, seed, lidar_pose)
    err = disparity_error(dm02, dm12, (0, 1, 2))
    return ScenarioOutcome(err, detect(err, theta), (dm02, dm12))


def scenario2_maps(truth02: DisparityMap, truth12: DisparityMap,
                   noise: EstimatorNoiseModel, faculae=None,
                   seeds: Tuple[int, int] = (0, 1)) -> Tuple[DisparityMap, DisparityMap]:
    """``(DM_02, DM_12)`` for three cameras, both on the (1, 2) baseline."""
    dm02 = estimate_stereo_disparity(truth02, noise, faculae, seeds[0])
    dm12 = estimate_stereo_disparity(truth12, noise, faculae, seeds[1])
    return rescale_disparity(dm02, truth02.baseline, truth12.baseline), dm12


def run_scenario2(truth02: DisparityMap, truth12: DisparityMap, theta: float,
                  noise: EstimatorNoiseModel, faculae=None,
                  seeds: Tuple[int, int] = (0, 1)) -> ScenarioOutcome:
    """Detection on a three-camera system; camera 2 is the reference."""
    dm02, dm12 = scenario2_maps(truth02, truth12, noise, faculae, seeds)
    err = disparity_error(dm02, dm12, (0, 1, 2))
    return ScenarioOutcome(err, detect(err, theta), (dm02, dm12))
