"""Greedy-policy cost per episode for double DQN and tabular Q-learning, against the DP optimum."""
import argparse
import csv
from pathlib import Path

import numpy as np

from mnoswitch.agents import DqnConfig, episodes_to_threshold, train_dqn
from mnoswitch.dp import solve
from mnoswitch.experiments import generate_scenario
from mnoswitch.experiments.harness import QLearningConfig, run_qlearning


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--template-seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--episodes", type=int, default=2000)
    ap.add_argument("--out", default="results/convergence.csv")
    args = ap.parse_args()

    sc = generate_scenario("standard", np.random.default_rng(args.template_seed))
    opt = solve(sc).expected(sc)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "seed", "episode", "greedy_cost", "dp_optimal"])
        for seed in range(args.seeds):
            runs = {
                "dqn": train_dqn(sc, DqnConfig(episodes=args.episodes), np.random.default_rng(seed)).costs,
                "qlearning": run_qlearning(sc, QLearningConfig(episodes=args.episodes),
                                           np.random.default_rng(seed)).costs,
            }
            for agent, costs in runs.items():
                w.writerows((agent, seed, e + 1, c, opt) for e, c in enumerate(costs))
                print(f"{agent} seed={seed} episodes-to-10%={episodes_to_threshold(costs, opt):g} "
                      f"final={costs[-1]:.2f} optimum={opt:.2f}")
    print(out)


if __name__ == "__main__":
    main()
