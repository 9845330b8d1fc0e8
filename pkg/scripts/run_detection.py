"""Detection run for both three-sensor scenarios over every attack case.

Prints the alarm rate of every attack case at every false alarm rate and
writes the full reports to ``<out>/detection_scenario{1,2}.json``.

    python scripts/run_detection.py --frames 1000 --out runs
"""
from _common import config_from, parser

from dispguard.harness.experiments import calibrate, run_detection_experiment
from dispguard.harness.io import write_json


def main():
    args = parser(__doc__.splitlines()[0]).parse_args()
    cfg = config_from(args)
    args.out.mkdir(parents=True, exist_ok=True)
    for scenario in (1, 2):
        cal = calibrate(cfg, f"scenario{scenario}")
        rep = run_detection_experiment(cfg, scenario, cal)
        write_json(rep.to_dict(), args.out / f"detection_scenario{scenario}.json")
        print(f"scenario {scenario}")
        print("  case       " + "".join(f"r={r:<8}" for r in rep.aggregates["thresholds"]))
        for case, agg in rep.aggregates["cases"].items():
            print(f"  {case:10s} " + "".join(f"{v:<10.4f}" for v in agg["alarm_rate"].values()))


if __name__ == "__main__":
    main()
