"""DP-optimal cost against the switching delay d, for the full scenario and per service."""
import argparse
import csv
from pathlib import Path

import numpy as np

from mnoswitch.experiments import generate_scenario
from mnoswitch.experiments.harness import ExperimentConfig, SweepSpec, restrict_to_service, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--template-seed", type=int, default=0)
    ap.add_argument("--delays", type=float, nargs="+", default=[0, 5, 10, 20, 30, 40, 60])
    ap.add_argument("--out", default="results/cost_vs_delay.csv")
    args = ap.parse_args()

    sc = generate_scenario("standard", np.random.default_rng(args.template_seed))
    variants = {"all": sc, **{s.id: restrict_to_service(sc, s.id) for s in sc.services}}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["service", "switch_delay_ms", "dp_cost"])
        for name, variant in variants.items():
            res = run_sweep(SweepSpec("switch_delay_ms", args.delays), ExperimentConfig(variant))
            w.writerows((name, d, c) for d, c in zip(args.delays, res.column("mean_cost")))
    print(out)


if __name__ == "__main__":
    main()
