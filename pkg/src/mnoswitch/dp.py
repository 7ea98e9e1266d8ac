"""Backward induction for the finite-horizon switching MDP.

Values are expected remaining costs, minimised.  Arrays are indexed
``[t-1, location, service, mno]`` for slots ``t = 1..T``; ``values`` carries
one extra all-zero layer for ``t = T+1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .env import Scenario, State


@dataclass(frozen=True)
class ValueTable:
    values: np.ndarray  # (T+1, L, X, M)
    policy: np.ndarray  # (T, L, X, M) action indices

    def value(self, t: int, state: State) -> float:
        return float(self.values[t - 1, state.location, state.service, state.mno])

    def action(self, t: int, state: State) -> int:
        return int(self.policy[t - 1, state.location, state.service, state.mno])

    def __call__(self, t: int, state: State) -> int:
        return self.action(t, state)

    def expected(self, scenario: Scenario) -> float:
        """Expected total cost from the scenario's initial distribution."""
        return float(np.sum(scenario.initial_state * self.values[0]))


def _next_value(scenario: Scenario, v_next: np.ndarray) -> np.ndarray:
    """E[V_{t+1}(l', x', a) | l, x] as an ``(L, X, A)`` array."""
    nl, nx, nm = v_next.shape
    ev = scenario.context_chain @ v_next.reshape(nl * nx, nm)
    return ev.reshape(nl, nx, nm)


def q_values(scenario: Scenario, values: np.ndarray) -> np.ndarray:
    """State-action values ``(T, L, X, M, A)`` implied by ``values``."""
    U = scenario.utility_table()
    T = scenario.horizon
    Q = np.empty_like(U)
    for k in range(T):
        Q[k] = U[k] + _next_value(scenario, values[k + 1])[:, :, None, :]
    return Q


def solve(scenario: Scenario) -> ValueTable:
    T = scenario.horizon
    shape = (scenario.n_locations, scenario.n_services, scenario.n_mnos)
    U = scenario.utility_table()
    V = np.zeros((T + 1,) + shape)
    pi = np.zeros((T,) + shape, dtype=np.int64)
    for k in range(T - 1, -1, -1):
        Q = U[k] + _next_value(scenario, V[k + 1])[:, :, None, :]
        # argmin picks the first minimiser, i.e. the smallest MNO index on ties
        pi[k] = np.argmin(Q, axis=-1)
        V[k] = np.take_along_axis(Q, pi[k][..., None], axis=-1)[..., 0]
    return ValueTable(V, pi)


def tabulate(scenario: Scenario, policy) -> np.ndarray:
    """Turn a ``(t, State) -> mno`` callable into a ``(T, L, X, M)`` array."""
    if isinstance(policy, ValueTable):
        return policy.policy
    if not callable(policy):
        table = np.asarray(policy, dtype=np.int64)
        expected = (scenario.horizon, scenario.n_locations, scenario.n_services, scenario.n_mnos)
        if table.shape != expected:
            raise ValueError(f"policy table has shape {table.shape}, expected {expected}")
        if np.any(table < 0) or np.any(table >= scenario.n_mnos):
            raise ValueError("policy table contains actions outside the MNO set")
        return table
    table = np.empty((scenario.horizon, scenario.n_locations, scenario.n_services, scenario.n_mnos), dtype=np.int64)
    for t in range(1, scenario.horizon + 1):
        for s in scenario.states(t):
            table[t - 1, s.location, s.service, s.mno] = scenario.check_action(policy(t, s))
    return table


def evaluate_policy(scenario: Scenario, policy) -> ValueTable:
    """Exact expected remaining cost of a deterministic policy."""
    pi = tabulate(scenario, policy)
    T = scenario.horizon
    shape = pi.shape[1:]
    U = scenario.utility_table()
    V = np.zeros((T + 1,) + shape)
    for k in range(T - 1, -1, -1):
        Q = U[k] + _next_value(scenario, V[k + 1])[:, :, None, :]
        V[k] = np.take_along_axis(Q, pi[k][..., None], axis=-1)[..., 0]
    return ValueTable(V, pi)


def policy_cost(scenario: Scenario, policy) -> float:
    return evaluate_policy(scenario, policy).expected(scenario)


def bellman_residual(scenario: Scenario, table: ValueTable) -> float:
    Q = q_values(scenario, table.values)
    return float(np.max(np.abs(table.values[:-1] - Q.min(axis=-1))))


def occupancy(scenario: Scenario, policy) -> np.ndarray:
    """Probability of visiting each state at each slot, ``(T, L, X, M)``."""
    pi = tabulate(scenario, policy)
    T = scenario.horizon
    nl, nx, nm = pi.shape[1:]
    d = np.zeros((T, nl, nx, nm))
    d[0] = scenario.initial_state
    onehot = np.eye(nm)
    for k in range(T - 1):
        # mass moved onto each action, aggregated over the previous MNO
        by_action = np.einsum("lxm,lxma->lxa", d[k], onehot[pi[k]])
        d[k + 1] = (scenario.context_chain.T @ by_action.reshape(nl * nx, nm)).reshape(nl, nx, nm)
    return d


def fog_workload_by_mno(scenario: Scenario, policy) -> np.ndarray:
    """Expected workload offloaded to each MNO's fog tier over the horizon."""
    pi = tabulate(scenario, policy)
    d = occupancy(scenario, pi)
    share = np.zeros(scenario.n_mnos)
    for k in range(scenario.horizon):
        lam = scenario.workload_rates[k]
        for (l, x, m), p in np.ndenumerate(d[k]):
            if p == 0:
                continue
            a = pi[k, l, x, m]
            sw = int(a != m)
            if scenario.feasible[l, x, a, sw]:
                share[a] += p * lam * scenario.alpha[l, x, a, sw]
    return share


POLICY_HEADER = ("t", "location", "service", "mno_in", "action")


def write_policy(scenario: Scenario, policy, path):
    pi = tabulate(scenario, policy)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POLICY_HEADER)
        for (k, l, x, m), a in np.ndenumerate(pi):
            w.writerow([k + 1, scenario.locations[l], scenario.services[x].id, scenario.mnos[m], scenario.mnos[a]])


def read_policy(scenario: Scenario, path) -> np.ndarray:
    loc = {n: i for i, n in enumerate(scenario.locations)}
    svc = {s.id: i for i, s in enumerate(scenario.services)}
    mno = {n: i for i, n in enumerate(scenario.mnos)}
    shape = (scenario.horizon, scenario.n_locations, scenario.n_services, scenario.n_mnos)
    pi = np.full(shape, -1, dtype=np.int64)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != POLICY_HEADER:
            raise ValueError(f"{path}: line 1: expected header {','.join(POLICY_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, l, x, m, a = (c.strip() for c in row)
                pi[int(t) - 1, loc[l], svc[x], mno[m]] = mno[a]
            except (ValueError, KeyError, IndexError) as exc:
                raise ValueError(f"{path}: line {lineno}: bad policy row ({exc})") from None
    if np.any(pi < 0):
        k, l, x, m = np.argwhere(pi < 0)[0]
        raise ValueError(
            f"{path}: policy has no action for t={k + 1}, location={scenario.locations[l]}, "
            f"service={scenario.services[x].id}, mno_in={scenario.mnos[m]}"
        )
    return pi
