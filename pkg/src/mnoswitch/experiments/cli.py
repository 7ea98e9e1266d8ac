"""Command-line entry point: ``mnoswitch <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .. import nn
from ..agents import train_dqn
from ..dp import evaluate_policy, read_policy, solve, write_policy
from ..env import rollout_costs
from ..latency import TRACE_HEADER, TraceFormatError, ingest_traces
from .harness import (
    AGENTS,
    RunResult,
    SweepSpec,
    config_from_dict,
    load_config,
    mean_stderr,
    run_fixed_mno_baseline,
    run_qlearning,
    run_sweep,
    training_log,
    write_run_dir,
)


class CliError(Exception):
    pass


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sc = cfg.scenario
    table = solve(sc)
    episodes = args.episodes or cfg.rollouts
    totals = rollout_costs(sc, table, episodes, np.random.default_rng(args.seed))
    mean, se = mean_stderr(totals)
    rows = [("dp-optimal", "exact", 1, table.expected(sc), 0.0),
            ("dp-optimal", "rollout", episodes, mean, se)]
    for m in sc.mnos:
        base = run_fixed_mno_baseline(sc, m)
        rows.append((f"fixed-{m}", "exact", 1, base.rows[0][3], 0.0))
    result = RunResult(("policy", "method", "replicates", "mean_cost", "stderr"), rows)
    if args.out:
        resolved = {**cfg.resolved(), "seed": args.seed, "episodes": episodes}
        write_run_dir(args.out, result, resolved, [args.seed], "simulate")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(result.header)
    w.writerows(result.rows)
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    sc = cfg.scenario
    rng = np.random.default_rng(args.seed)
    if args.agent == "dqn":
        res = train_dqn(sc, cfg.dqn, rng)
    else:
        res = run_qlearning(sc, cfg.qlearning, rng)
    optimum = solve(sc).expected(sc)
    resolved = {**cfg.resolved(), "agent": args.agent, "seed": args.seed, "dp_optimal_cost": optimum}
    out = write_run_dir(args.out, training_log(res), resolved, [args.seed], f"train --agent {args.agent}")
    write_policy(sc, res.policy, out / "policy.csv")
    if args.agent == "dqn":
        nn.save_checkpoint(res.model, out / "checkpoint.json")
    else:
        np.save(out / "qtable.npy", res.model.values)
    final = res.costs[-1] if len(res.costs) else evaluate_policy(sc, res.policy).expected(sc)
    print(f"agent={args.agent} seed={args.seed} final_greedy_cost={final!r} dp_optimal={optimum!r} "
          f"gap={(final / optimum - 1) if optimum else 0.0:.4%} out={out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    sc = cfg.scenario
    try:
        pi = read_policy(sc, args.policy)
    except OSError as exc:
        raise CliError(f"policy: cannot read {args.policy}: {exc.strerror}") from None
    cost = evaluate_policy(sc, pi).expected(sc)
    optimum = solve(sc).expected(sc)
    print("policy,expected_cost,dp_optimal,gap")
    print(f"{args.policy},{cost!r},{optimum!r},{(cost / optimum - 1) if optimum else 0.0!r}")
    return 0


def cmd_sweep(args) -> int:
    path = Path(args.spec)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise CliError(f"spec: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"spec: {path} is not valid JSON ({exc})") from None
    sweep_keys = {"parameter", "values", "replicates", "agent", "seed", "mno"}
    try:
        spec = SweepSpec(**{k: doc[k] for k in sweep_keys if k in doc})
    except TypeError as exc:
        raise CliError(f"spec: {exc}") from None
    cfg = config_from_dict({k: v for k, v in doc.items() if k not in sweep_keys}, path.parent)
    result = run_sweep(spec, cfg)
    resolved = {**cfg.resolved(), "sweep": {k: doc[k] for k in sweep_keys if k in doc}}
    out = write_run_dir(args.out, result, resolved, spec.seeds, "sweep")
    RunResult(("value", "seed", "cost"), result.metadata["replicate_costs"]).write_csv(out / "replicates.csv")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(result.header)
    w.writerows(result.rows)
    return 0


def cmd_ingest(args) -> int:
    cat = ingest_traces(args.traces, args.bin_width)
    Path(args.out).write_text(json.dumps(cat.to_json(), indent=1) + "\n")
    print("location_id,mno_id,tier,samples,bins")
    for (l, m, t), d in cat.items():
        print(f"{l},{m},{t},{cat.counts[(l, m, t)]},{d.probs.size}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mnoswitch", description="MNO switching experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="solve by DP and roll out the optimal policy")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--episodes", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("train", help="train a learning agent")
    s.add_argument("--agent", choices=("dqn", "qlearning"), required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="exact expected cost of a policy CSV")
    s.add_argument("--policy", required=True)
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help=f"parameter sweep; agents: {', '.join(AGENTS)}")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("ingest", help=f"RTT trace CSV ({','.join(TRACE_HEADER)}) -> latency catalog")
    s.add_argument("--traces", required=True)
    s.add_argument("--bin-width", type=float, default=5.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, TraceFormatError, ValueError, KeyError, OSError, FloatingPointError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"mnoswitch {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
