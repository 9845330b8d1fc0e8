"""Shared argument handling for the experiment scripts."""
import argparse
import logging
from pathlib import Path

from dispguard.harness.config import ExperimentConfig, load_config


def parser(description: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--frames", type=int)
    ap.add_argument("--calibration-frames", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", type=Path, default=Path("runs"))
    return ap


def config_from(args) -> ExperimentConfig:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {"seed": args.seed, "frames": args.frames,
               "calibration_frames": args.calibration_frames, "workers": args.workers}
    return cfg.replace(**{k: v for k, v in changes.items() if v is not None})
