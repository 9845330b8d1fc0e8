"""Detection rate against attack strength (spoof width, facula coverage).

    python scripts/run_sensitivity.py --sweep-frames 500 --out runs
"""
import dataclasses

from _common import config_from, parser

from dispguard.harness.experiments import AXES, calibrate, run_sensitivity_sweep
from dispguard.harness.io import write_json


def main():
    ap = parser(__doc__.splitlines()[0])
    ap.add_argument("--sweep-frames", type=int)
    args = ap.parse_args()
    cfg = config_from(args)
    if args.sweep_frames:
        cfg = cfg.replace(sweep=dataclasses.replace(cfg.sweep, frames=args.sweep_frames))
    args.out.mkdir(parents=True, exist_ok=True)
    cal = calibrate(cfg, "scenario1")
    for axis in AXES:
        rep = run_sensitivity_sweep(cfg, axis, cal)
        write_json(rep.to_dict(), args.out / f"sweep_{axis}.json")
        print(axis)
        for p in rep.aggregates["points"]:
            label = f"{p['coverage_percent']}%" if "coverage_percent" in p else f"{p['value']} m"
            print(f"  {label:>8}  detection {p['detection_rate']:.4f}  mean E {p['mean_error']:.4f}")


if __name__ == "__main__":
    main()
