"""Experiment orchestration, file formats and the command-line interface."""
from dispguard.harness.config import ExperimentConfig, load_config
from dispguard.harness.experiments import (
    CalibrationResult, TrialReport, calibrate, run_detection_experiment,
    run_identification_experiment, run_sensitivity_sweep)

__all__ = [
    "ExperimentConfig", "load_config", "CalibrationResult", "TrialReport",
    "calibrate", "run_detection_experiment", "run_identification_experiment",
    "run_sensitivity_sweep",
]
