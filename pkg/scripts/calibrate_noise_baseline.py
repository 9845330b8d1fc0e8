"""Pin the attack-free inconsistency rate of the stereo emulator.

Two independent estimates of the same exact disparity map are compared
pixel by pixel; the mean inconsistent fraction over a fixed set of scenes
is written to ``tests/fixtures/noise_baseline.json`` and used as a
regression value by the test suite.

    python scripts/calibrate_noise_baseline.py [--scenes 40]
"""
import argparse
from pathlib import Path

import numpy as np

from dispguard.detection import disparity_error
from dispguard.geometry import make_rig
from dispguard.harness.io import write_json
from dispguard.scene import SceneParams, generate_scene, render_truth_disparity
from dispguard.sensors import EstimatorNoiseModel, estimate_stereo_disparity

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "noise_baseline.json"


def measure(noise: EstimatorNoiseModel, scenes: int, seed: int = 0) -> list:
    rig = make_rig([0.0, 0.54], lidar=False)
    ref, partner = rig.camera(1), rig.camera(0)
    rates = []
    for k in range(scenes):
        scene = generate_scene(SceneParams(), seed + k)
        truth = render_truth_disparity(scene, ref, partner)
        a = estimate_stereo_disparity(truth, noise, seed=2 * k)
        b = estimate_stereo_disparity(truth, noise, seed=2 * k + 1)
        rates.append(disparity_error(a, b).value)
    return rates


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=40)
    ap.add_argument("--out", type=Path, default=FIXTURE)
    args = ap.parse_args()
    noise = EstimatorNoiseModel()
    rates = measure(noise, args.scenes)
    result = {
        "noise": {"gaussian_sigma": noise.gaussian_sigma,
                  "outlier_fraction": noise.outlier_fraction,
                  "outlier_range": noise.outlier_range,
                  "edge_fattening": noise.edge_fattening},
        "scenes": args.scenes,
        "mean_rate": float(np.mean(rates)),
        "std_rate": float(np.std(rates)),
    }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_json(result, args.out)
    print(result)


if __name__ == "__main__":
    main()
