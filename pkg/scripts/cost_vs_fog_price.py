"""DP-optimal and fixed-MNO cost against the fog price (multiples of the cloud price)."""
import argparse
import csv
from pathlib import Path

import numpy as np

from mnoswitch.dp import fog_workload_by_mno, solve
from mnoswitch.experiments import generate_scenario
from mnoswitch.experiments.harness import rebuild, run_fixed_mno_baseline


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--template-seed", type=int, default=0)
    ap.add_argument("--prices", type=float, nargs="+", default=[1.5, 2, 2.5, 3, 4, 5])
    ap.add_argument("--out", default="results/cost_vs_fog_price.csv")
    args = ap.parse_args()

    base = generate_scenario("standard", np.random.default_rng(args.template_seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fog_price", "policy", "cost", *(f"fog_workload_{m}" for m in base.mnos)])
        for p in args.prices:
            sc = rebuild(base, "fog_price", p)
            table = solve(sc)
            w.writerow([p, "dp-optimal", table.expected(sc), *fog_workload_by_mno(sc, table)])
            for m in sc.mnos:
                cost = run_fixed_mno_baseline(sc, m).rows[0][3]
                w.writerow([p, f"fixed-{m}", cost, *([""] * sc.n_mnos)])
    print(out)


if __name__ == "__main__":
    main()
