"""Finite-horizon MNO switching MDP.

Contexts ``(location, service)`` evolve by a Markov chain that the vehicle
cannot influence; the action picks the MNO used for the current slot and
becomes the ``mno`` component of the next state.  Switching (action differs
from the MNO held in the state) shortens the latency budget of that slot by
the handover delay.

Locations, services and MNOs are referred to by integer index; the string
identifiers live on the :class:`Scenario`.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .assignment import Pricing, alpha_star, unit_cost
from .latency import LatencyCatalog, LatencyDistribution, ServiceSpec, confidence

PENALTY_FACTOR = 10.0
WORKLOAD_MODELS = ("poisson", "fixed")
_ROW_TOL = 1e-9


class ScenarioError(ValueError):
    """Invalid scenario; the message starts with the offending key."""


@dataclass(frozen=True)
class State:
    location: int
    service: int
    mno: int
    t: int = 1


@dataclass(frozen=True)
class Transition:
    state: State
    action: int
    utility: float
    next_state: State
    workload: float = 0.0
    done: bool = False


Policy = Callable[[int, State], int]


def effective_tau(spec: ServiceSpec, switching: bool, d: float) -> float:
    if not switching:
        return float(spec.tau_ms)
    return max(float(spec.tau_ms) - float(d), 0.0)


@dataclass(frozen=True, eq=False)
class Scenario:
    locations: tuple
    services: tuple
    mnos: tuple
    horizon: int
    catalog: LatencyCatalog
    pricing: Pricing
    switch_delay_ms: float
    context_chain: np.ndarray
    workload_rates: np.ndarray | float
    initial_state: np.ndarray
    penalty_factor: float = PENALTY_FACTOR
    workload_model: str = "poisson"
    name: str = ""

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("locations", tuple(str(l) for l in self.locations))
        set_("mnos", tuple(str(m) for m in self.mnos))
        set_("services", tuple(self.services))
        for key, seq in (("locations", self.locations), ("mnos", self.mnos),
                         ("services", [s.id for s in self.services])):
            if not seq:
                raise ScenarioError(f"{key}: must be non-empty")
            if len(set(seq)) != len(seq):
                raise ScenarioError(f"{key}: duplicate identifiers")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ScenarioError(f"horizon: must be an integer >= 1, got {self.horizon}")
        set_("horizon", int(self.horizon))
        if not self.switch_delay_ms >= 0:
            raise ScenarioError(f"switch_delay_ms: must be >= 0, got {self.switch_delay_ms}")
        if self.workload_model not in WORKLOAD_MODELS:
            raise ScenarioError(f"workload: must be one of {WORKLOAD_MODELS}, got {self.workload_model!r}")
        if not self.penalty_factor > 0:
            raise ScenarioError(f"penalty_factor: must be > 0, got {self.penalty_factor}")
        missing = set(self.mnos) - set(self.pricing.fog_price)
        if missing:
            raise ScenarioError(f"pricing: no fog price for {sorted(missing)}")
        try:
            self.catalog.check_complete(self.locations, self.mnos)
        except ValueError as exc:
            raise ScenarioError(f"distributions: {exc}") from None

        nl, nx, nm = self.n_locations, self.n_services, self.n_mnos
        P = np.array(self.context_chain, dtype=float)
        if P.shape != (nl * nx, nl * nx):
            raise ScenarioError(f"context_chain: expected a {nl * nx}x{nl * nx} matrix, got shape {P.shape}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > _ROW_TOL):
            raise ScenarioError("context_chain: rows must be non-negative and sum to 1")
        P.flags.writeable = False
        set_("context_chain", P)

        lam = np.broadcast_to(np.asarray(self.workload_rates, dtype=float), (self.horizon,)).copy() \
            if np.ndim(self.workload_rates) == 0 else np.asarray(self.workload_rates, dtype=float).copy()
        if lam.shape != (self.horizon,):
            raise ScenarioError(f"lambda: expected a scalar or {self.horizon} per-slot rates, got {lam.shape}")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ScenarioError("lambda: rates must be finite and >= 0")
        lam.flags.writeable = False
        set_("workload_rates", lam)

        init = np.array(self.initial_state, dtype=float)
        if init.shape != (nl, nx, nm):
            raise ScenarioError(f"initial_state: expected shape {(nl, nx, nm)}, got {init.shape}")
        if np.any(init < 0) or abs(init.sum() - 1.0) > _ROW_TOL:
            raise ScenarioError("initial_state: probabilities must be >= 0 and sum to 1")
        init.flags.writeable = False
        set_("initial_state", init)

        self._build_model()
        bad = np.argwhere(~self.feasible[:, :, :, 0].any(axis=2))
        if bad.size:
            l, x = bad[0]
            raise ScenarioError(
                f"distributions: no MNO meets service {self.services[x].id!r} "
                f"at location {self.locations[l]!r} even without switching"
            )

    # model tables -------------------------------------------------------

    def _build_model(self):
        nl, nx, nm = self.n_locations, self.n_services, self.n_mnos
        f_cloud = np.zeros((nl, nx, nm, 2))
        f_fog = np.zeros((nl, nx, nm, 2))
        alpha = np.ones((nl, nx, nm, 2))
        feasible = np.zeros((nl, nx, nm, 2), dtype=bool)
        for l, loc in enumerate(self.locations):
            for m, mno in enumerate(self.mnos):
                cloud = self.catalog[loc, mno, "cloud"]
                fog = self.catalog[loc, mno, "fog"]
                for x, spec in enumerate(self.services):
                    for sw in (0, 1):
                        tau = effective_tau(spec, bool(sw), self.switch_delay_ms)
                        fc, ff = confidence(cloud, tau), confidence(fog, tau)
                        split = alpha_star(fc, ff, spec.gamma)
                        f_cloud[l, x, m, sw], f_fog[l, x, m, sw] = fc, ff
                        alpha[l, x, m, sw], feasible[l, x, m, sw] = split.alpha, split.feasible
        penalty_rate = self.pricing.max_fog_price * self.penalty_factor
        # cost per unit of expected workload, indexed [l, x, m_prev, action]
        rate = np.empty((nl, nx, nm, nm))
        for m_prev in range(nm):
            for a in range(nm):
                sw = int(a != m_prev)
                for l in range(nl):
                    for x in range(nx):
                        if feasible[l, x, a, sw]:
                            rate[l, x, m_prev, a] = unit_cost(self.pricing, self.mnos[a], alpha[l, x, a, sw])
                        else:
                            rate[l, x, m_prev, a] = penalty_rate
        for arr in (f_cloud, f_fog, alpha, feasible, rate):
            arr.flags.writeable = False
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("f_cloud", f_cloud)
        set_("f_fog", f_fog)
        set_("alpha", alpha)
        set_("feasible", feasible)
        set_("cost_rate", rate)
        set_("penalty_rate", penalty_rate)

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def n_services(self) -> int:
        return len(self.services)

    @property
    def n_mnos(self) -> int:
        return len(self.mnos)

    @property
    def n_contexts(self) -> int:
        return self.n_locations * self.n_services

    def context_index(self, location: int, service: int) -> int:
        return location * self.n_services + service

    def context_of(self, c: int) -> tuple[int, int]:
        return divmod(c, self.n_services)

    def utility_table(self) -> np.ndarray:
        """Expected per-slot cost, shape ``(T, L, X, M_prev, A)``.

        Exact model accessor for the DP oracle; learners use :func:`step`.
        """
        return self.workload_rates[:, None, None, None, None] * self.cost_rate[None]

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def states(self, t: int = 1):
        for l in range(self.n_locations):
            for x in range(self.n_services):
                for m in range(self.n_mnos):
                    yield State(l, x, m, t)

    def check_state(self, state: State, allow_terminal: bool = False):
        ok = (0 <= state.location < self.n_locations and 0 <= state.service < self.n_services
              and 0 <= state.mno < self.n_mnos)
        tmax = self.horizon + 1 if allow_terminal else self.horizon
        if not ok or not 1 <= state.t <= tmax:
            raise ValueError(f"state {state} is outside the scenario")

    def check_action(self, action) -> int:
        if int(action) != action or not 0 <= action < self.n_mnos:
            raise ValueError(f"action {action!r} is not an MNO index in [0, {self.n_mnos})")
        return int(action)

    # serialisation ------------------------------------------------------

    def to_json(self) -> dict:
        legend = [[self.locations[l], self.services[x].id]
                  for l in range(self.n_locations) for x in range(self.n_services)]
        init = [
            {"location": self.locations[l], "service": self.services[x].id, "mno": self.mnos[m],
             "prob": float(self.initial_state[l, x, m])}
            for l in range(self.n_locations) for x in range(self.n_services) for m in range(self.n_mnos)
            if self.initial_state[l, x, m] > 0
        ]
        lam = self.workload_rates
        doc = {
            "name": self.name,
            "locations": list(self.locations),
            "services": [{"id": s.id, "tau_ms": s.tau_ms, "gamma": s.gamma} for s in self.services],
            "mnos": list(self.mnos),
            "horizon": self.horizon,
            "switch_delay_ms": float(self.switch_delay_ms),
            "pricing": {"fog": {m: float(self.pricing.fog_price[m]) for m in self.mnos},
                        "cloud": float(self.pricing.cloud_price)},
            "context_chain": {"index": legend, "matrix": self.context_chain.tolist()},
            "lambda": float(lam[0]) if np.all(lam == lam[0]) else lam.tolist(),
            "distributions": [
                {"location": l, "mno": m, "tier": t, **d.to_dict()} for (l, m, t), d in self.catalog.items()
            ],
            "initial_state": init,
            "penalty_factor": float(self.penalty_factor),
            "workload": self.workload_model,
        }
        return doc

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_json(cls, doc: dict, base_dir: Path | str | None = None) -> "Scenario":
        return scenario_from_json(doc, base_dir)


def _need(doc, key):
    if key not in doc:
        raise ScenarioError(f"{key}: missing required key")
    return doc[key]


def _load_catalog(spec, base_dir) -> LatencyCatalog:
    if isinstance(spec, list):
        entries = spec
        cat = LatencyCatalog()
    elif isinstance(spec, dict):
        cat = LatencyCatalog()
        if "catalog" in spec:
            path = Path(spec["catalog"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            try:
                cat = LatencyCatalog.from_json(json.loads(path.read_text()))
            except (OSError, ValueError, KeyError) as exc:
                raise ScenarioError(f"distributions.catalog: cannot load {str(path)!r}: {exc}") from None
        entries = spec.get("inline", [])
    else:
        raise ScenarioError("distributions: expected a list of inline bins or an object with 'catalog'")
    for i, e in enumerate(entries):
        try:
            cat[e["location"], e["mno"], e["tier"]] = LatencyDistribution(e["bins"], e["probs"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ScenarioError(f"distributions[{i}]: {exc}") from None
    return cat


def scenario_from_json(doc: dict, base_dir=None) -> Scenario:
    locations = [str(l) for l in _need(doc, "locations")]
    mnos = [str(m) for m in _need(doc, "mnos")]
    try:
        services = [ServiceSpec(str(s["id"]), float(s["tau_ms"]), float(s["gamma"])) for s in _need(doc, "services")]
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"services: {exc}") from None
    sid = [s.id for s in services]
    horizon = _need(doc, "horizon")
    try:
        pr = _need(doc, "pricing")
        pricing = Pricing({str(k): float(v) for k, v in pr["fog"].items()}, float(pr["cloud"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"pricing: {exc}") from None

    cc = _need(doc, "context_chain")
    try:
        legend = [(str(a), str(b)) for a, b in cc["index"]]
        raw = np.asarray(cc["matrix"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"context_chain: {exc}") from None
    expected = [(l, x) for l in locations for x in sid]
    if sorted(legend) != sorted(expected) or len(legend) != len(expected):
        raise ScenarioError("context_chain: index must list every (location, service) pair exactly once")
    if raw.shape != (len(legend), len(legend)):
        raise ScenarioError(f"context_chain: matrix shape {raw.shape} does not match index length {len(legend)}")
    order = [legend.index(p) for p in expected]
    P = raw[np.ix_(order, order)]

    init_doc = doc.get("initial_state", "uniform")
    init = np.zeros((len(locations), len(services), len(mnos)))
    if init_doc == "uniform":
        init[:] = 1.0 / init.size
    else:
        try:
            for e in init_doc:
                init[locations.index(str(e["location"])), sid.index(str(e["service"])),
                     mnos.index(str(e["mno"]))] += float(e["prob"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"initial_state: {exc}") from None

    return Scenario(
        locations=tuple(locations),
        services=tuple(services),
        mnos=tuple(mnos),
        horizon=horizon,
        catalog=_load_catalog(_need(doc, "distributions"), base_dir),
        pricing=pricing,
        switch_delay_ms=float(_need(doc, "switch_delay_ms")),
        context_chain=P,
        workload_rates=_need(doc, "lambda"),
        initial_state=init,
        penalty_factor=float(doc.get("penalty_factor", PENALTY_FACTOR)),
        workload_model=doc.get("workload", "poisson"),
        name=str(doc.get("name", "")),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return scenario_from_json(doc, path.parent)


def save_scenario(scenario: Scenario, path):
    Path(path).write_text(json.dumps(scenario.to_json(), indent=2, sort_keys=True) + "\n")


# dynamics -----------------------------------------------------------------

def expected_utility(scenario: Scenario, state: State, action: int) -> float:
    scenario.check_state(state)
    a = scenario.check_action(action)
    lam = scenario.workload_rates[state.t - 1]
    return float(lam * scenario.cost_rate[state.location, state.service, state.mno, a])


def draw_workload(scenario: Scenario, t: int, rng: np.random.Generator) -> float:
    lam = scenario.workload_rates[t - 1]
    if scenario.workload_model == "fixed":
        return float(lam)
    return float(rng.poisson(lam))


def realized_utility(scenario: Scenario, state: State, action: int, workload: float) -> float:
    sw = int(action != state.mno)
    l, x = state.location, state.service
    if not scenario.feasible[l, x, action, sw]:
        return float(scenario.penalty_rate * scenario.workload_rates[state.t - 1])
    return float(scenario.cost_rate[l, x, state.mno, action] * workload)


def reset(scenario: Scenario, rng: np.random.Generator) -> State:
    flat = scenario.initial_state.ravel()
    k = rng.choice(flat.size, p=flat)
    l, x, m = np.unravel_index(k, scenario.initial_state.shape)
    return State(int(l), int(x), int(m), 1)


def step(scenario: Scenario, state: State, action: int, rng: np.random.Generator) -> Transition:
    if state.t > scenario.horizon:
        raise ValueError(f"cannot step terminal state {state} (horizon {scenario.horizon})")
    scenario.check_state(state)
    a = scenario.check_action(action)
    w = draw_workload(scenario, state.t, rng)
    utility = realized_utility(scenario, state, a, w)
    c = scenario.context_index(state.location, state.service)
    c_next = rng.choice(scenario.n_contexts, p=scenario.context_chain[c])
    l2, x2 = scenario.context_of(int(c_next))
    nxt = State(l2, x2, a, state.t + 1)
    return Transition(state, a, utility, nxt, w, done=nxt.t > scenario.horizon)


def as_policy(policy) -> Policy:
    """Accept a callable or a ``(T, L, X, M)`` action array."""
    if callable(policy):
        return policy
    table = np.asarray(policy)
    return lambda t, s: int(table[t - 1, s.location, s.service, s.mno])


def rollout_costs(scenario: Scenario, policy, episodes: int, rng: np.random.Generator,
                  horizon: int | None = None) -> np.ndarray:
    """Total realised cost of each of ``episodes`` independent rollouts."""
    pi = as_policy(policy)
    T = scenario.horizon if horizon is None else min(int(horizon), scenario.horizon)
    totals = np.zeros(int(episodes))
    if T <= 0:
        return totals
    for e in range(int(episodes)):
        s = reset(scenario, rng)
        total = 0.0
        for _ in range(T):
            tr = step(scenario, s, pi(s.t, s), rng)
            total += tr.utility
            s = tr.next_state
        totals[e] = total
    return totals


def rollout_cost(scenario: Scenario, policy, episodes: int, rng: np.random.Generator,
                 horizon: int | None = None) -> float:
    if episodes <= 0:
        return 0.0
    return float(rollout_costs(scenario, policy, episodes, rng, horizon).mean())


def constant_policy(mno: int) -> Policy:
    return lambda t, s: mno


def stay_policy(t: int, s: State) -> int:
    return s.mno


def state_grid(scenario: Scenario) -> Sequence[State]:
    return list(scenario.states())
