"""Sweeps, baselines and result files.

Every emitted CSV is a pure function of (config, seeds); timestamps and
host information go only into ``config.resolved.json``.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agents import DqnConfig, EpsilonSchedule, train_dqn, train_qlearning
from ..assignment import Pricing
from ..dp import evaluate_policy, solve
from ..env import Scenario, ScenarioError, constant_policy, scenario_from_json
from ..latency import LatencyCatalog, ServiceSpec, sample
from .templates import generate_scenario

SWEEP_PARAMETERS = ("switch_delay_ms", "fog_price", "service_spec")
AGENTS = ("dp", "dqn", "qlearning", "fixed-mno")


@dataclass(frozen=True)
class QLearningConfig:
    episodes: int = 2000
    g: float = 1.0
    b: float = 0.95
    g_decay: str = "visits"
    epsilon: EpsilonSchedule | None = None

    def __post_init__(self):
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", EpsilonSchedule(horizon=int(0.6 * self.episodes)))
        elif isinstance(self.epsilon, dict):
            object.__setattr__(self, "epsilon", EpsilonSchedule(**self.epsilon))

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "g": self.g, "b": self.b, "g_decay": self.g_decay,
                "epsilon": vars(self.epsilon).copy()}


def run_qlearning(scenario: Scenario, cfg: QLearningConfig, rng: np.random.Generator):
    return train_qlearning(scenario, cfg.epsilon, cfg.episodes, cfg.g, cfg.b, rng, g_decay=cfg.g_decay)


@dataclass
class ExperimentConfig:
    scenario: Scenario
    dqn: DqnConfig = field(default_factory=DqnConfig)
    qlearning: QLearningConfig = field(default_factory=QLearningConfig)
    rollouts: int = 1000
    source: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        return {
            "scenario": self.scenario.to_json(),
            "scenario_sha256": self.scenario.digest(),
            "dqn": self.dqn.to_dict(),
            "qlearning": self.qlearning.to_dict(),
            "rollouts": self.rollouts,
        }


def _scenario_from(doc: dict, base_dir) -> Scenario:
    if "locations" in doc:
        return scenario_from_json(doc, base_dir)
    if "scenario" in doc:
        spec = doc["scenario"]
        if isinstance(spec, str):
            path = Path(spec)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            try:
                sub = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ScenarioError(f"scenario: cannot read {str(path)!r}: {exc}") from None
            return scenario_from_json(sub, path.parent)
        return scenario_from_json(spec, base_dir)
    if "template" in doc:
        try:
            return generate_scenario(doc["template"], np.random.default_rng(int(doc.get("template_seed", 0))),
                                     **doc.get("template_overrides", {}))
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"template: {exc}") from None
    raise ScenarioError("scenario: config needs a 'scenario', a 'template', or inline scenario keys")


def config_from_dict(doc: dict, base_dir=None) -> ExperimentConfig:
    scenario = _scenario_from(doc, base_dir)
    try:
        dqn = DqnConfig.from_dict(doc.get("dqn", {}))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"dqn: {exc}") from None
    try:
        ql = QLearningConfig(**doc.get("qlearning", {}))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"qlearning: {exc}") from None
    return ExperimentConfig(scenario, dqn, ql, int(doc.get("rollouts", 1000)), source=doc)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"config: cannot read {str(path)!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"config: {path} is not valid JSON ({exc})") from None
    return config_from_dict(doc, path.parent)


def config_hash(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


# scenario rebuilding -------------------------------------------------------

def with_fog_price(scenario: Scenario, value) -> Scenario:
    """Set every MNO's fog price to ``value`` x cloud price, or per-MNO from a mapping."""
    nu = scenario.pricing.cloud_price
    if isinstance(value, dict):
        fog = {m: float(value[m]) * nu for m in scenario.mnos}
    else:
        fog = {m: float(value) * nu for m in scenario.mnos}
    return scenario.replace(pricing=Pricing(fog, nu))


def restrict_to_service(scenario: Scenario, service_id: str) -> Scenario:
    """Single-service scenario: the location chain conditioned on that service."""
    ids = [s.id for s in scenario.services]
    x0 = ids.index(service_id)
    nl, nx = scenario.n_locations, scenario.n_services
    P = scenario.context_chain.reshape(nl, nx, nl, nx)[:, x0, :, :].sum(axis=2)
    init = scenario.initial_state.sum(axis=1, keepdims=True)
    return scenario.replace(services=(scenario.services[x0],), context_chain=P, initial_state=init)


def with_service(scenario: Scenario, value) -> Scenario:
    if isinstance(value, str):
        return restrict_to_service(scenario, value)
    spec = ServiceSpec(str(value["id"]), float(value["tau_ms"]), float(value["gamma"]))
    ids = [s.id for s in scenario.services]
    if spec.id not in ids:
        raise ValueError(f"service {spec.id!r} is not in the scenario")
    services = tuple(spec if s.id == spec.id else s for s in scenario.services)
    return scenario.replace(services=services)


def rebuild(scenario: Scenario, parameter: str, value) -> Scenario:
    if parameter == "switch_delay_ms":
        return scenario.replace(switch_delay_ms=float(value))
    if parameter == "fog_price":
        return with_fog_price(scenario, value)
    if parameter == "service_spec":
        return with_service(scenario, value)
    raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")


# runs ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: list
    replicates: int = 1
    agent: str = "dp"
    seed: int = 0
    mno: str | None = None

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"parameter: must be one of {SWEEP_PARAMETERS}, got {self.parameter!r}")
        if not self.values:
            raise ValueError("values: must be non-empty")
        if self.replicates < 1:
            raise ValueError("replicates: must be >= 1")
        if self.agent not in AGENTS:
            raise ValueError(f"agent: must be one of {AGENTS}, got {self.agent!r}")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + r for r in range(self.replicates)]


@dataclass
class RunResult:
    header: tuple
    rows: list
    metadata: dict = field(default_factory=dict)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            w.writerows(self.rows)

    def column(self, name) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]


def mean_stderr(xs) -> tuple[float, float]:
    xs = np.asarray(xs, dtype=float)
    if xs.size < 2:
        return float(xs.mean()), 0.0
    return float(xs.mean()), float(xs.std(ddof=1) / np.sqrt(xs.size))


def agent_cost(scenario: Scenario, agent: str, seed: int, cfg: ExperimentConfig, mno: str | None = None) -> float:
    """Expected total cost of the policy an agent produces for ``scenario``."""
    if agent == "dp":
        return solve(scenario).expected(scenario)
    if agent == "fixed-mno":
        m = scenario.mnos.index(mno) if mno is not None else 0
        return evaluate_policy(scenario, constant_policy(m)).expected(scenario)
    rng = np.random.default_rng(seed)
    if agent == "dqn":
        return float(train_dqn(scenario, cfg.dqn, rng).costs[-1])
    if agent == "qlearning":
        return float(run_qlearning(scenario, cfg.qlearning, rng).costs[-1])
    raise ValueError(f"unknown agent {agent!r}")


SWEEP_HEADER = ("parameter", "value", "agent", "replicates", "mean_cost", "stderr")


def _value_label(v) -> str:
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return str(v)


def run_sweep(spec: SweepSpec, cfg: ExperimentConfig) -> RunResult:
    rows, per_rep = [], []
    for value in spec.values:
        try:
            sc = rebuild(cfg.scenario, spec.parameter, value)
            costs = []
            for seed in spec.seeds:
                c = agent_cost(sc, spec.agent, seed, cfg, spec.mno)
                costs.append(c)
                per_rep.append((_value_label(value), seed, c))
        except (ValueError, FloatingPointError) as exc:
            raise type(exc)(f"sweep point {spec.parameter}={_value_label(value)}: {exc}") from exc
        mean, se = mean_stderr(costs)
        rows.append((spec.parameter, _value_label(value), spec.agent, spec.replicates, mean, se))
    return RunResult(SWEEP_HEADER, rows, {"replicate_costs": per_rep, "seeds": spec.seeds})


def run_fixed_mno_baseline(scenario: Scenario, mno) -> RunResult:
    m = scenario.mnos.index(mno) if isinstance(mno, str) else int(mno)
    table = evaluate_policy(scenario, constant_policy(m))
    pi = table.policy
    penalised = int(sum(
        not scenario.feasible[l, x, pi[k, l, x, mp], int(pi[k, l, x, mp] != mp)]
        for k, l, x, mp in np.ndindex(pi.shape)
    ))
    cost = table.expected(scenario)
    return RunResult(("agent", "mno", "replicates", "mean_cost", "stderr", "penalised_states"),
                     [("fixed-mno", scenario.mnos[m], 1, cost, 0.0, penalised)])


TRAIN_HEADER = ("episode", "epsilon", "greedy_cost", "loss")


def training_log(result) -> RunResult:
    return RunResult(TRAIN_HEADER, [(e, eps, c, "" if np.isnan(l) else l) for e, eps, c, l in result.log_rows()])


def write_run_dir(out, result: RunResult, resolved: dict, seeds, command: str):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    result.write_csv(out / "results.csv")
    meta = {
        "command": command,
        "config_hash": config_hash(resolved),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / "config.resolved.json").write_text(json.dumps({**resolved, "meta": meta}, indent=2, sort_keys=True) + "\n")
    (out / "seeds.txt").write_text("".join(f"{s}\n" for s in seeds))
    return out


def synthetic_catalog_rows(catalog: LatencyCatalog, n_per_cell: int, rng: np.random.Generator):
    """RTT trace rows drawn from each distribution in ``catalog``."""
    for (loc, mno, tier), dist in catalog.items():
        for v in sample(dist, rng, size=n_per_cell):
            yield loc, mno, tier, float(v)
