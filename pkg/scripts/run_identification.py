"""Identification run for one LiDAR and three cameras, single-sensor attacks.

    python scripts/run_identification.py --frames 1000 --out runs
"""
from _common import config_from, parser

from dispguard.harness.experiments import calibrate, run_identification_experiment
from dispguard.harness.io import write_json


def main():
    args = parser(__doc__.splitlines()[0]).parse_args()
    cfg = config_from(args)
    args.out.mkdir(parents=True, exist_ok=True)
    cal = calibrate(cfg, "identification")
    rep = run_identification_experiment(cfg, cal)
    write_json(rep.to_dict(), args.out / "identification.json")
    agg = rep.aggregates
    print("case    " + "".join(f"r={r:<8}" for r in agg["average_identification_rate"]))
    for case, c in agg["cases"].items():
        print(f"{case:7s} " + "".join(f"{v:<10.4f}" for v in c["identification_rate"].values()))
    print("average " + "".join(f"{v:<10.4f}" for v in agg["average_identification_rate"].values()))
    print(f"best r: {agg['best_r']}")


if __name__ == "__main__":
    main()
