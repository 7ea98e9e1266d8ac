"""Mixed confidence (1-a) f_cloud + a f_fog against the fog share a, per (location, MNO, service)."""
import argparse
import csv
from pathlib import Path

import numpy as np

from mnoswitch.experiments import generate_scenario
from mnoswitch.latency import confidence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--template-seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=21)
    ap.add_argument("--out", default="results/confidence_vs_alpha.csv")
    args = ap.parse_args()

    sc = generate_scenario("standard", np.random.default_rng(args.template_seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "mno", "service", "tau_ms", "gamma", "alpha", "confidence", "alpha_star"])
        for l, x, m in np.ndindex(sc.n_locations, sc.n_services, sc.n_mnos):
            loc, mno, spec = sc.locations[l], sc.mnos[m], sc.services[x]
            fc = confidence(sc.catalog[loc, mno, "cloud"], spec.tau_ms)
            ff = confidence(sc.catalog[loc, mno, "fog"], spec.tau_ms)
            a_star = sc.alpha[l, x, m, 0] if sc.feasible[l, x, m, 0] else ""
            for a in np.linspace(0, 1, args.steps):
                w.writerow([loc, mno, spec.id, spec.tau_ms, spec.gamma, a, (1 - a) * fc + a * ff, a_star])
    print(out)


if __name__ == "__main__":
    main()
