"""Calibration runs, detection/identification experiments and sweeps.

Every frame is rebuilt from ``(run seed, stream, frame index)`` alone, so
frames can be evaluated in any order or in parallel and a run is
reproducible bit for bit. Within a frame all attack cases (and all sweep
grid points) share the same scene and estimator draws, which makes
comparisons between cases matched-seed comparisons.
"""
from __future__ import annotations

import copy
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from dispguard.attacks import LidarSpoofParams, inject_lidar_spoof, make_facula, nominal_coverage
from dispguard.detection import ThresholdSet, calibrate_threshold, disparity_error
from dispguard.errors import ConfigError, ContractError
from dispguard.geometry import RigConfig, rescale_disparity
from dispguard.harness.config import KINDS, ExperimentConfig
from dispguard.identification import (ErrorStateVector, infer_attacked, pairs_for,
                                      threshold_errors)
from dispguard.scene import generate_scene, render_depth, render_truth_disparity
from dispguard.sensors import (DisparityMap, apply_faculae, clean_stereo_estimate,
                               lidar_to_disparity, sample_lidar)

log = logging.getLogger(__name__)

# seed streams
CALIBRATION, EVALUATION, SENSITIVITY = 1, 2, 3
# per-frame purposes
_SCENE, _LIDAR, _ATTACK, _ESTIMATE = 1, 2, 3, 4

Triple = Tuple[int, int, int]


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def case_label(case: Iterable[int]) -> str:
    case = sorted(case)
    return "+".join(f"S{i}" for i in case) if case else "none"


def triple_label(t: Triple) -> str:
    return ",".join(str(i) for i in t)


def r_label(r: float) -> str:
    return f"{r:g}"


class SensorFrame:
    """All sensor data of one simulated frame for one rig.

    ``maps(reference, attacked)`` returns ``[DM_{0,ref}, ..., DM_{ref-1,ref}]``
    on the baseline of the pair ``(ref-1, ref)``: the LiDAR (sensor 0, when
    present) is projected at that baseline and every stereo estimate is
    rescaled to it. Maps are cached per attack pattern they depend on.
    """

    def __init__(self, config: ExperimentConfig, rig: RigConfig, frame_seed: int,
                 spoof_width: Optional[float] = None, facula_radius: Optional[float] = None):
        self.config = config
        self.rig = rig
        self.seed = frame_seed
        self.scene = generate_scene(config.scene, derive_seed(frame_seed, _SCENE))
        self.cloud = (sample_lidar(self.scene, config.lidar, derive_seed(frame_seed, _LIDAR),
                                   rig.lidar_pose) if rig.lidar_present else None)
        self.spoof_width = config.attacks.spoof_width if spoof_width is None else spoof_width
        self.facula_radius = facula_radius
        self._depth: Dict[int, np.ndarray] = {}
        self._faculae: Dict[int, object] = {}
        self._spoofed = None
        self._cache: Dict[tuple, DisparityMap] = {}

    @property
    def n(self) -> int:
        return self.rig.n

    def spoof_params(self) -> LidarSpoofParams:
        att = self.config.attacks
        rng = np.random.default_rng(derive_seed(self.seed, _ATTACK, 0, 1))
        lateral = float(rng.uniform(*att.spoof_lateral))
        ground_in_lidar = self.scene.ground_plane - self.rig.lidar_pose[1]
        return LidarSpoofParams(
            width=self.spoof_width, height=att.spoof_height,
            distance_range=tuple(att.spoof_distance), lateral_offset=lateral,
            point_density=att.spoof_density,
            seed=derive_seed(self.seed, _ATTACK, 0, 2), bottom=ground_in_lidar)

    def spoofed_cloud(self):
        if self._spoofed is None:
            if self.spoof_width <= 0:
                self._spoofed = self.cloud
            else:
                self._spoofed = inject_lidar_spoof(self.cloud, self.spoof_params())
        return self._spoofed

    def facula(self, sensor: int):
        if sensor not in self._faculae:
            cam = self.rig.camera(sensor)
            if self.facula_radius is None:
                rng = np.random.default_rng(derive_seed(self.seed, _ATTACK, sensor, 1))
                radius = float(rng.uniform(*self.config.attacks.facula_radius))
            else:
                radius = self.facula_radius
            self._faculae[sensor] = make_facula(
                cam.image_width, cam.image_height, radius,
                seed=derive_seed(self.seed, _ATTACK, sensor, 2))
        return self._faculae[sensor]

    def depth(self, reference: int) -> np.ndarray:
        if reference not in self._depth:
            self._depth[reference] = render_depth(self.scene, self.rig.camera(reference))
        return self._depth[reference]

    def _map(self, i: int, reference: int, attacked: FrozenSet[int]) -> DisparityMap:
        ref_cam = self.rig.camera(reference)
        common = self.rig.baseline(reference - 1, reference)
        if i == 0 and self.rig.lidar_present:
            key = ("lidar", reference, 0 in attacked)
            if key not in self._cache:
                cloud = self.spoofed_cloud() if 0 in attacked else self.cloud
                self._cache[key] = lidar_to_disparity(
                    cloud, ref_cam, common, lidar_pose=self.rig.lidar_pose,
                    near_clip=self.config.rig.near_clip, d_max=self.config.noise.d_max)
            return self._cache[key]
        key = ("stereo", i, reference, i in attacked, reference in attacked)
        if key not in self._cache:
            native_key = ("native", i, reference)
            if native_key not in self._cache:
                truth = render_truth_disparity(self.scene, ref_cam, self.rig.camera(i),
                                               d_max=self.config.noise.d_max,
                                               depth=self.depth(reference))
                self._cache[native_key] = clean_stereo_estimate(
                    truth, self.config.noise, self._estimate_seed(i, reference))
            native = self._cache[native_key]
            faculae = {s: self.facula(s) for s in (i, reference) if s in attacked}
            est = apply_faculae(native, self.config.noise, faculae,
                                self._estimate_seed(i, reference))
            self._cache[key] = rescale_disparity(est, native.baseline, common)
        return self._cache[key]

    def _estimate_seed(self, i: int, reference: int) -> int:
        return derive_seed(self.seed, _ESTIMATE, i, reference)

    def maps(self, reference: int, attacked: Iterable[int] = ()) -> List[DisparityMap]:
        attacked = frozenset(attacked)
        return [self._map(i, reference, attacked) for i in range(reference)]

    def errors(self, reference: int, attacked: Iterable[int] = ()):
        maps = self.maps(reference, attacked)
        return {(i, j): disparity_error(maps[i], maps[j], (i, j, reference))
                for i, j in pairs_for(reference)}

    def variant(self, spoof_width: Optional[float] = None,
                facula_radius: Optional[float] = None) -> "SensorFrame":
        """Same frame with other attack strengths, sharing all attack-free work."""
        other = copy.copy(self)
        if spoof_width is not None:
            other.spoof_width = spoof_width
        other.facula_radius = facula_radius
        other._faculae, other._spoofed = {}, None
        other._cache = {k: v for k, v in self._cache.items() if not _attacked_key(k)}
        other._depth = self._depth
        return other

    def view(self, attacked: Iterable[int]) -> "AttackedView":
        return AttackedView(self, frozenset(attacked))


def _attacked_key(key: tuple) -> bool:
    if key[0] == "lidar":
        return key[2]
    if key[0] == "stereo":
        return key[3] or key[4]
    return False


@dataclass(frozen=True)
class AttackedView:
    """A frame under one attack case, in the shape ``identify`` expects."""

    frame: SensorFrame
    attacked: FrozenSet[int]

    @property
    def n(self) -> int:
        return self.frame.n

    def disparity_maps(self, reference: int) -> List[DisparityMap]:
        return self.frame.maps(reference, self.attacked)


def _frame_seed(config: ExperimentConfig, stream: int, index: int) -> int:
    return derive_seed(config.seed, stream, index)


def _run_frames(fn, indices: Sequence[int], workers: int) -> list:
    if workers <= 1:
        return [fn(i) for i in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices, chunksize=max(1, len(indices) // (4 * workers))))


def attack_cases(sensors: Sequence[int]) -> List[Tuple[int, ...]]:
    """Every subset of ``sensors``, the empty case first."""
    return [c for k in range(len(sensors) + 1) for c in itertools.combinations(sensors, k)]


# -- calibration ---------------------------------------------------------------

def calibration_triples(kind: str, rig: RigConfig) -> List[Triple]:
    if kind in ("scenario1", "scenario2"):
        return [(0, 1, 2)]
    return [(i, j, m) for m in range(rig.n, 2, -1) for i, j in pairs_for(m)]


def _calibration_frame(config: ExperimentConfig, kind: str, index: int) -> Dict[Triple, float]:
    rig = config.rig.rig_for(kind)
    frame = SensorFrame(config, rig, _frame_seed(config, CALIBRATION, index))
    out = {}
    for m in sorted({t[2] for t in calibration_triples(kind, rig)}):
        for (i, j), err in frame.errors(m).items():
            out[(i, j, m)] = err.value
    return out


@dataclass
class CalibrationResult:
    """Attack-free disparity-error samples for one experiment kind."""

    kind: str
    samples: Dict[Triple, List[float]]

    def thresholds(self, r: float) -> ThresholdSet:
        return ThresholdSet.from_samples(self.samples, r)

    def to_dict(self, r_values: Sequence[float]) -> dict:
        return {
            "kind": self.kind,
            "samples": {triple_label(t): v for t, v in sorted(self.samples.items())},
            "thresholds": {r_label(r): self.thresholds(r).to_dict() for r in r_values},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CalibrationResult":
        samples = {tuple(int(i) for i in k.split(",")): [float(x) for x in v]
                   for k, v in data["samples"].items()}
        return cls(data["kind"], samples)


def calibrate(config: ExperimentConfig, kind: str = "scenario1",
              attacked: Iterable[int] = ()) -> CalibrationResult:
    """Collect attack-free samples of every triple used by ``kind``.

    Thresholds for any false alarm rate follow from
    :meth:`CalibrationResult.thresholds`.
    """
    if tuple(attacked):
        raise ConfigError("calibration must run without attacks")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    if config.calibration_frames < 100:
        log.warning("only %d calibration frames; thresholds will be coarse",
                    config.calibration_frames)
    rows = _run_frames(partial(_calibration_frame, config, kind),
                       range(config.calibration_frames), config.workers)
    triples = sorted(rows[0])
    return CalibrationResult(kind, {t: [row[t] for row in rows] for t in triples})


# -- reports -------------------------------------------------------------------

@dataclass
class TrialReport:
    kind: str
    records: List[dict]
    aggregates: dict
    histograms: List[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "config": self.config, "aggregates": self.aggregates,
                "histograms": self.histograms, "records": self.records}


def histogram(values: Sequence[float], width: float) -> List[Tuple[float, float, int]]:
    nbins = int(math.ceil(1.0 / width - 1e-9))
    counts = [0] * nbins
    for v in values:
        counts[min(int(v / width + 1e-12), nbins - 1)] += 1
    return [(round(k * width, 10), round(min((k + 1) * width, 1.0), 10), c)
            for k, c in enumerate(counts)]


def _report_config(config: ExperimentConfig) -> dict:
    # where results go and how many processes computed them do not change them
    data = config.to_dict()
    for key in ("output_dir", "workers"):
        data.pop(key)
    return data


def _rate(flags: Sequence[bool]) -> float:
    return sum(flags) / len(flags) if flags else 0.0


# -- detection -----------------------------------------------------------------

def _detection_frame(config: ExperimentConfig, kind: str, cases, index: int):
    rig = config.rig.rig_for(kind)
    frame = SensorFrame(config, rig, _frame_seed(config, EVALUATION, index))
    out = []
    for case in cases:
        maps = frame.maps(2, case)
        err = disparity_error(maps[0], maps[1], (0, 1, 2))
        out.append((err.value, err.valid_count))
    return out


def run_detection_experiment(config: ExperimentConfig, scenario: int,
                             calibration: CalibrationResult,
                             cases: Optional[Sequence[Sequence[int]]] = None,
                             frames: Optional[int] = None) -> TrialReport:
    """Disparity errors and verdicts for every attack case of a three-sensor system.

    ``cases`` defaults to all eight subsets of ``{S0, S1, S2}``; the empty
    case measures the false alarm rate. Verdicts are reported for every
    ``r`` in ``config.r_values``.
    """
    kind = {1: "scenario1", 2: "scenario2"}.get(scenario)
    if kind is None:
        raise ConfigError(f"scenario must be 1 or 2, got {scenario}")
    if (0, 1, 2) not in calibration.samples:
        raise ContractError("calibration has no threshold for triple (0, 1, 2)")
    cases = [tuple(sorted(c)) for c in (cases if cases is not None else attack_cases((0, 1, 2)))]
    frames = config.frames if frames is None else frames
    rows = _run_frames(partial(_detection_frame, config, kind, cases), range(frames),
                       config.workers)
    thetas = {r: calibration.thresholds(r)[(0, 1, 2)] for r in config.r_values}

    records = []
    for index, row in enumerate(rows):
        for case, (value, valid) in zip(cases, row):
            records.append({
                "scenario": scenario, "case": case_label(case), "attacked": list(case),
                "frame": index, "error": value, "valid_pixels": valid,
                "alarm": {r_label(r): value > th for r, th in thetas.items()},
            })

    per_case = {}
    histos = []
    for case in cases:
        label = case_label(case)
        recs = [x for x in records if x["case"] == label]
        errs = [x["error"] for x in recs]
        per_case[label] = {
            "frames": len(recs),
            "median_error": float(np.median(errs)),
            "mean_error": float(np.mean(errs)),
            "alarm_rate": {r_label(r): _rate([x["alarm"][r_label(r)] for x in recs])
                           for r in thetas},
        }
        for lo, hi, count in histogram(errs, config.histogram_bin):
            histos.append({"scenario": scenario, "case": label, "bin_lo": lo,
                           "bin_hi": hi, "count": count})
    attacked_labels = [case_label(c) for c in cases if c]
    aggregates = {
        "scenario": scenario,
        "thresholds": {r_label(r): th for r, th in thetas.items()},
        "cases": per_case,
        "false_alarm_rate": ({r_label(r): per_case["none"]["alarm_rate"][r_label(r)]
                              for r in thetas} if "none" in per_case else None),
        "average_detection_rate": {
            r_label(r): (float(np.mean([per_case[c]["alarm_rate"][r_label(r)]
                                        for c in attacked_labels]))
                         if attacked_labels else None)
            for r in thetas},
    }
    return TrialReport(kind, records, aggregates, histos, _report_config(config))


# -- identification ------------------------------------------------------------

class _ErrorCache:
    """Lazily computed per-reference pairwise errors of one attacked frame."""

    def __init__(self, frame: SensorFrame, attacked):
        self.frame, self.attacked = frame, frozenset(attacked)
        self.levels: Dict[int, dict] = {}

    def errors(self, m: int):
        if m not in self.levels:
            self.levels[m] = self.frame.errors(m, self.attacked)
        return self.levels[m]


def _identification_frame(config: ExperimentConfig, cases, thresholds: Dict[float, ThresholdSet],
                           index: int):
    rig = config.rig.rig_for("identification")
    frame = SensorFrame(config, rig, _frame_seed(config, EVALUATION, index))
    out = []
    for case in cases:
        cache = _ErrorCache(frame, case)
        identified = {}
        for r, ths in thresholds.items():
            res = infer_attacked(lambda m: threshold_errors(cache.errors(m), ths, m), rig.n)
            identified[r] = res
        errors = {triple_label((i, j, m)): e.value
                  for m, errs in sorted(cache.levels.items()) for (i, j), e in errs.items()}
        out.append((errors, {r: (sorted(res.attacked), res.resolved,
                                 [v.to_list() for v in res.levels])
                             for r, res in identified.items()}))
    return out


def run_identification_experiment(config: ExperimentConfig, calibration: CalibrationResult,
                                  cases: Optional[Sequence[Sequence[int]]] = None,
                                  frames: Optional[int] = None) -> TrialReport:
    """Identification rate per attack case and per false alarm rate.

    ``cases`` defaults to no attack plus each single sensor attacked.
    """
    rig = config.rig.rig_for("identification")
    if cases is None:
        cases = [()] + [(s,) for s in rig.sensor_ids]
    cases = [tuple(sorted(c)) for c in cases]
    for case in cases:
        if len(case) > rig.n - 2:
            raise ConfigError(f"case {case_label(case)} exceeds the n-2 attack bound")
    frames = config.frames if frames is None else frames
    thresholds = {r: calibration.thresholds(r) for r in config.r_values}
    rows = _run_frames(partial(_identification_frame, config, cases, thresholds),
                       range(frames), config.workers)

    records = []
    for index, row in enumerate(rows):
        for case, (errors, ident) in zip(cases, row):
            records.append({
                "case": case_label(case), "attacked": list(case), "frame": index,
                "errors": errors,
                "identified": {r_label(r): v[0] for r, v in ident.items()},
                "resolved": {r_label(r): v[1] for r, v in ident.items()},
                "levels": {r_label(r): v[2] for r, v in ident.items()},
                "correct": {r_label(r): v[0] == list(case) for r, v in ident.items()},
            })
    per_case = {}
    for case in cases:
        label = case_label(case)
        recs = [x for x in records if x["case"] == label]
        per_case[label] = {
            "frames": len(recs),
            "identification_rate": {r_label(r): _rate([x["correct"][r_label(r)] for x in recs])
                                    for r in thresholds},
        }
    attacked_labels = [case_label(c) for c in cases if c]
    average = {r_label(r): (float(np.mean([per_case[c]["identification_rate"][r_label(r)]
                                           for c in attacked_labels]))
                            if attacked_labels else None)
               for r in thresholds}
    best = max((r for r in thresholds if average[r_label(r)] is not None),
               key=lambda r: (average[r_label(r)], -r), default=None)
    aggregates = {
        "n": rig.n,
        "thresholds": {r_label(r): ths.to_dict() for r, ths in thresholds.items()},
        "cases": per_case,
        "average_identification_rate": average,
        "best_r": best,
    }
    return TrialReport("identification", records, aggregates, [], _report_config(config))


# -- sensitivity ---------------------------------------------------------------

AXES = ("spoof_width", "facula_coverage")


def _sweep_frame(config: ExperimentConfig, axis: str, grid: Sequence[float], index: int):
    rig = config.rig.rig_for("scenario1")
    base = SensorFrame(config, rig, _frame_seed(config, SENSITIVITY, index))
    out = []
    for value in grid:
        if axis == "spoof_width":
            frame = base.variant(spoof_width=value)
            case = (0,) if value > 0 else ()
        else:
            frame = base.variant(facula_radius=value)
            case = (rig.n,)
        maps = frame.maps(2, case)
        out.append(disparity_error(maps[0], maps[1], (0, 1, 2)).value)
    return out


def run_sensitivity_sweep(config: ExperimentConfig, axis: str,
                          calibration: CalibrationResult,
                          grid: Optional[Sequence[float]] = None,
                          frames: Optional[int] = None) -> TrialReport:
    """Detection rate of the LiDAR + two-camera system along one attack axis.

    ``spoof_width`` widens the fake LiDAR block; ``facula_coverage`` grows
    the facula on the reference (left) camera. Every grid point sees the
    same frames.
    """
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {AXES}")
    if calibration.kind != "scenario1":
        raise ContractError("sensitivity sweeps use scenario-1 thresholds")
    if grid is None:
        grid = config.sweep.spoof_widths if axis == "spoof_width" else config.sweep.facula_radii
    grid = [float(g) for g in grid]
    frames = config.sweep.frames if frames is None else frames
    theta = calibration.thresholds(config.sweep.r)[(0, 1, 2)]
    rows = _run_frames(partial(_sweep_frame, config, axis, grid), range(frames), config.workers)

    W, H = config.rig.image_width, config.rig.image_height
    records, points = [], []
    for k, value in enumerate(grid):
        errs = [row[k] for row in rows]
        alarms = [e > theta for e in errs]
        point = {"axis": axis, "value": value, "frames": len(errs),
                 "detection_rate": _rate(alarms), "mean_error": float(np.mean(errs))}
        if axis == "facula_coverage":
            point["coverage_percent"] = round(100 * nominal_coverage(value, W, H), 2)
        points.append(point)
        records.extend({"axis": axis, "value": value, "frame": i, "error": e, "alarm": a}
                       for i, (e, a) in enumerate(zip(errs, alarms)))
    aggregates = {"axis": axis, "r": config.sweep.r, "theta": theta, "points": points}
    return TrialReport(f"sweep_{axis}", records, aggregates, [], _report_config(config))
