"""Command-line entry point: ``dispguard {calibrate,detect,identify,sweep,report}``.

Outputs go under ``output_dir``::

    thresholds.json                     calibration samples and thresholds per kind and r
    detect/report.json                  per-frame records and aggregates, both scenarios
    detect/histograms.csv               error histograms per scenario and case
    detect/summary.csv                  alarm rate per scenario, case and r
    identify/report.json, summary.csv   identification rate per case and r
    sweep/<axis>/report.json, sweep.csv one CSV row per grid point
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dispguard.errors import ConfigError, ContractError, ParseError
from dispguard.harness.config import KINDS, ExperimentConfig, load_config
from dispguard.harness.experiments import (AXES, CalibrationResult, calibrate,
                                           run_detection_experiment,
                                           run_identification_experiment,
                                           run_sensitivity_sweep)
from dispguard.harness.io import read_json, write_json

log = logging.getLogger("dispguard")

THRESHOLDS_FILE = "thresholds.json"


class ThresholdsMissing(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON experiment config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--output-dir", type=Path, help="override the config output_dir")
    common.add_argument("--frames", type=int, help="override the number of evaluation frames")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dispguard",
                                     description="Disparity-consistency attack detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("calibrate", parents=[common], help="collect attack-free errors and thresholds")
    p.add_argument("--kind", choices=KINDS, action="append",
                   help="experiment kind to calibrate (repeatable; default all)")
    p.add_argument("--calibration-frames", type=int)
    p = sub.add_parser("detect", parents=[common], help="scenario 1/2 detection experiment")
    p.add_argument("--scenario", type=int, choices=(1, 2), action="append")
    sub.add_parser("identify", parents=[common], help="LiDAR + 3 camera identification experiment")
    p = sub.add_parser("sweep", parents=[common], help="attack-strength sensitivity sweep")
    p.add_argument("--axis", choices=AXES, required=True)
    sub.add_parser("report", parents=[common], help="print summaries of existing reports")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {"seed": args.seed, "output_dir": None if args.output_dir is None else str(args.output_dir),
                 "frames": args.frames, "workers": args.workers,
                 "calibration_frames": getattr(args, "calibration_frames", None)}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.command == "sweep" and args.frames is not None:
        overrides["sweep"] = dataclasses.replace(cfg.sweep, frames=args.frames)
    try:
        return cfg.replace(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_calibration(out: Path, kind: str) -> CalibrationResult:
    path = out / THRESHOLDS_FILE
    if not path.exists():
        raise ThresholdsMissing(f"thresholds missing: {path} not found; run `dispguard calibrate` first")
    data = read_json(path)
    if kind not in data.get("kinds", {}):
        raise ThresholdsMissing(f"thresholds missing for {kind!r} in {path}")
    return CalibrationResult.from_dict(data["kinds"][kind])


def _write_csv(path: Path, header: Sequence[str], rows: List[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_calibrate(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / THRESHOLDS_FILE
    data = read_json(path) if path.exists() else {}
    data.setdefault("kinds", {})
    data["seed"] = cfg.seed
    data["r_values"] = list(cfg.r_values)
    for kind in args.kind or KINDS:
        log.info("calibrating %s over %d frames", kind, cfg.calibration_frames)
        data["kinds"][kind] = calibrate(cfg, kind).to_dict(cfg.r_values)
    write_json(data, path)
    print(f"wrote {path}")


def cmd_detect(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.output_dir) / "detect"
    scenarios = sorted(set(args.scenario or (1, 2)))
    cals = {s: _load_calibration(Path(cfg.output_dir), f"scenario{s}") for s in scenarios}
    reports = {}
    hist_rows, summary_rows = [], []
    for s in scenarios:
        log.info("scenario %d detection over %d frames", s, cfg.frames)
        rep = run_detection_experiment(cfg, s, cals[s])
        reports[f"scenario{s}"] = rep.to_dict()
        hist_rows += [(h["scenario"], h["case"], h["bin_lo"], h["bin_hi"], h["count"])
                      for h in rep.histograms]
        for case, agg in rep.aggregates["cases"].items():
            for r, rate in agg["alarm_rate"].items():
                summary_rows.append((s, case, r, agg["frames"], rate, agg["median_error"]))
    out.mkdir(parents=True, exist_ok=True)
    write_json(reports, out / "report.json")
    _write_csv(out / "histograms.csv", ("scenario", "case", "bin_lo", "bin_hi", "count"), hist_rows)
    _write_csv(out / "summary.csv",
               ("scenario", "case", "r", "frames", "alarm_rate", "median_error"), summary_rows)
    print(f"wrote {out}")


def cmd_identify(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.output_dir) / "identify"
    cal = _load_calibration(Path(cfg.output_dir), "identification")
    rep = run_identification_experiment(cfg, cal)
    out.mkdir(parents=True, exist_ok=True)
    write_json(rep.to_dict(), out / "report.json")
    rows = [(case, r, agg["frames"], rate)
            for case, agg in rep.aggregates["cases"].items()
            for r, rate in agg["identification_rate"].items()]
    rows += [("average", r, "", rate)
             for r, rate in rep.aggregates["average_identification_rate"].items()]
    _write_csv(out / "summary.csv", ("case", "r", "frames", "identification_rate"), rows)
    print(f"wrote {out}")


def cmd_sweep(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.output_dir) / "sweep" / args.axis
    cal = _load_calibration(Path(cfg.output_dir), "scenario1")
    rep = run_sensitivity_sweep(cfg, args.axis, cal)
    out.mkdir(parents=True, exist_ok=True)
    write_json(rep.to_dict(), out / "report.json")
    rows = []
    for p in rep.aggregates["points"]:
        label = p.get("coverage_percent", p["value"])
        rows.append((args.axis, p["value"], label, p["detection_rate"], p["mean_error"], p["frames"]))
    _write_csv(out / "sweep.csv",
               ("axis", "value", "label", "detection_rate", "mean_error", "frames"), rows)
    print(f"wrote {out / 'sweep.csv'}")


def cmd_report(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.output_dir)
    found = False
    det = out / "detect" / "report.json"
    if det.exists():
        found = True
        for name, rep in sorted(read_json(det).items()):
            print(f"[{name}] alarm rate by case and r")
            for case, agg in rep["aggregates"]["cases"].items():
                rates = "  ".join(f"r={r}:{v:.4f}" for r, v in agg["alarm_rate"].items())
                print(f"  {case:10s} median E={agg['median_error']:.4f}  {rates}")
    ident = out / "identify" / "report.json"
    if ident.exists():
        found = True
        agg = read_json(ident)["aggregates"]
        print("[identification] rate by case and r")
        for case, c in agg["cases"].items():
            print(f"  {case:6s} " + "  ".join(f"r={r}:{v:.4f}"
                                             for r, v in c["identification_rate"].items()))
        print(f"  best r: {agg['best_r']}")
    for axis in AXES:
        path = out / "sweep" / axis / "report.json"
        if path.exists():
            found = True
            agg = read_json(path)["aggregates"]
            print(f"[sweep {axis}] r={agg['r']} theta={agg['theta']:.4f}")
            for p in agg["points"]:
                print(f"  {p['value']:8.3f}  detection={p['detection_rate']:.4f}  "
                      f"mean E={p['mean_error']:.4f}")
    if not found:
        raise FileNotFoundError(f"no reports under {out}")


COMMANDS = {"calibrate": cmd_calibrate, "detect": cmd_detect, "identify": cmd_identify,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
    except (ConfigError, ParseError, OSError) as exc:
        print(f"dispguard: config error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](cfg, args)
    except ThresholdsMissing as exc:
        print(f"dispguard: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ContractError, ParseError, FileNotFoundError, ValueError) as exc:
        print(f"dispguard: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
