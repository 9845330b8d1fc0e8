"""Detecting and identifying attacked depth sensors through disparity consistency.

A LiDAR and a set of stereo cameras each yield a disparity map for a common
reference camera. Pairs of maps that disagree on too many pixels reveal an
attack; the pattern of disagreeing pairs over several reference cameras
pins down which sensors were attacked.
"""
from dispguard.detection import (ThresholdSet, calibrate_threshold, detect, disparity_error,
                                 pixel_inconsistent)
from dispguard.geometry import CameraModel, RigConfig, make_rig
from dispguard.identification import identify, infer_attacked
from dispguard.sensors import DisparityMap, EstimatorNoiseModel, LidarConfig, PointCloud

__version__ = "0.1.0"

__all__ = [
    "CameraModel", "RigConfig", "make_rig", "DisparityMap", "PointCloud", "LidarConfig",
    "EstimatorNoiseModel", "pixel_inconsistent", "disparity_error", "calibrate_threshold",
    "detect", "ThresholdSet", "identify", "infer_attacked",
]
