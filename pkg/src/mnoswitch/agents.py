"""Tabular Q-learning and double DQN for MNO switching.

Q-values are expected costs and are minimised everywhere.  The learning
rate of the table is ``g`` and the discount is ``b`` for both learners.
"""
from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .dp import policy_cost
from .env import Scenario, State, Transition, reset, step


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 0.8
    end: float = 0.05
    mode: str = "linear"
    horizon: int = 1200

    def __post_init__(self):
        if not 0 <= self.end <= self.start <= 1:
            raise ValueError(f"need 0 <= end <= start <= 1, got start={self.start}, end={self.end}")
        if self.mode not in ("linear", "exponential"):
            raise ValueError(f"unknown decay mode {self.mode!r}")
        if self.horizon < 0:
            raise ValueError("decay horizon must be >= 0")

    def value(self, episode: int) -> float:
        if episode >= self.horizon:
            return self.end
        frac = episode / self.horizon
        if self.mode == "linear":
            eps = self.start + (self.end - self.start) * frac
        elif self.end > 0:
            eps = self.start * (self.end / self.start) ** frac
        else:
            eps = self.start * (1.0 - frac)
        return float(min(max(eps, self.end), self.start))


class ReplayBuffer:
    """FIFO transition pool with uniform (with-replacement) minibatches."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        self.capacity = int(capacity)
        self._data: deque = deque(maxlen=self.capacity)

    def __len__(self):
        return len(self._data)

    def __iter__(self):
        return iter(self._data)

    def add(self, transition: Transition):
        self._data.append(transition)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if not self._data:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, len(self._data), size=batch_size)
        return [self._data[i] for i in idx]


def select_action(q_values, epsilon: float, rng: np.random.Generator) -> int:
    q = np.asarray(q_values, dtype=float)
    if q.size == 0:
        raise ValueError("no actions to choose from")
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmin(q))


# tabular -----------------------------------------------------------------

@dataclass
class QTable:
    values: np.ndarray  # (T, L, X, M, A)
    g: float = 0.1
    b: float = 0.95
    visits: np.ndarray | None = None

    @classmethod
    def zeros(cls, scenario: Scenario, g: float = 0.1, b: float = 0.95) -> "QTable":
        shape = (scenario.horizon, scenario.n_locations, scenario.n_services, scenario.n_mnos, scenario.n_mnos)
        return cls(np.zeros(shape), g, b, np.zeros(shape, dtype=np.int64))

    def row(self, state: State) -> np.ndarray:
        return self.values[state.t - 1, state.location, state.service, state.mno]

    def greedy_policy(self) -> np.ndarray:
        return np.argmin(self.values, axis=-1)


def _entry(tr: Transition) -> tuple:
    s = tr.state
    return (s.t - 1, s.location, s.service, s.mno, tr.action)


def td_error(table: QTable, tr: Transition) -> float:
    bootstrap = 0.0 if tr.done else float(np.min(table.row(tr.next_state)))
    return tr.utility + table.b * bootstrap - float(table.values[_entry(tr)])


def q_update(table: QTable, tr: Transition, g: float | None = None) -> QTable:
    """One Q-learning backup on the visited ``(t, s, a)`` entry, in place.

    A transition past the horizon bootstraps from 0.
    """
    g = table.g if g is None else g
    idx = _entry(tr)
    table.values[idx] += g * td_error(table, tr)
    if table.visits is not None:
        table.visits[idx] += 1
    return table


@dataclass
class TrainResult:
    costs: np.ndarray  # greedy-policy expected cost after each episode
    epsilons: np.ndarray
    losses: np.ndarray
    model: object = None
    policy: np.ndarray | None = None

    def log_rows(self):
        for e, (eps, c, l) in enumerate(zip(self.epsilons, self.costs, self.losses), start=1):
            yield e, eps, c, l


def train_qlearning(scenario: Scenario, schedule: EpsilonSchedule, episodes: int, g: float, b: float,
                    rng: np.random.Generator, g_decay: str = "constant") -> TrainResult:
    """Time-indexed tabular Q-learning with epsilon-greedy exploration.

    ``g_decay="visits"`` uses ``g / n`` on the n-th visit of an entry.
    """
    if g_decay not in ("constant", "visits"):
        raise ValueError(f"unknown learning-rate decay {g_decay!r}")
    table = QTable.zeros(scenario, g, b)
    costs = np.zeros(episodes)
    eps_log = np.zeros(episodes)
    losses = np.full(episodes, np.nan)
    for e in range(episodes):
        eps = schedule.value(e)
        s = reset(scenario, rng)
        sq = 0.0
        for _ in range(scenario.horizon):
            a = select_action(table.row(s), eps, rng)
            tr = step(scenario, s, a, rng)
            rate = g
            if g_decay == "visits":
                rate = g / (table.visits[_entry(tr)] + 1)
            sq += td_error(table, tr) ** 2
            q_update(table, tr, rate)
            s = tr.next_state
        eps_log[e] = eps
        losses[e] = 0.5 * sq / scenario.horizon
        costs[e] = policy_cost(scenario, table.greedy_policy())
    return TrainResult(costs, eps_log, losses, model=table, policy=table.greedy_policy())


# double DQN --------------------------------------------------------------

@dataclass(frozen=True)
class DqnConfig:
    episodes: int = 2000
    minibatch: int = 32
    sync_period: int = 50
    discount: float = 0.95
    lr: float = 1e-2
    replay_capacity: int = 10_000
    hidden: tuple = (64, 64)
    activation: str = "relu"
    epsilon: EpsilonSchedule | None = None  # default: linear decay over 60% of episodes
    updates_per_episode: int = 1
    time_feature: bool = False
    cost_scale: float | None = None
    selection: str = "primary"

    def __post_init__(self):
        if self.minibatch < 1 or self.sync_period < 1:
            raise ValueError("minibatch and sync_period must be >= 1")
        if not 0 <= self.discount <= 1:
            raise ValueError(f"discount must lie in [0, 1], got {self.discount}")
        if self.selection not in ("primary", "target"):
            raise ValueError(f"selection must be 'primary' or 'target', got {self.selection!r}")
        if self.episodes < 0 or self.updates_per_episode < 1:
            raise ValueError("episodes must be >= 0 and updates_per_episode >= 1")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", EpsilonSchedule(horizon=int(0.6 * self.episodes)))
        elif isinstance(self.epsilon, dict):
            object.__setattr__(self, "epsilon", EpsilonSchedule(**self.epsilon))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DqnConfig":
        d = dict(d)
        if "epsilon" in d and isinstance(d["epsilon"], dict):
            d["epsilon"] = EpsilonSchedule(**d["epsilon"])
        return cls(**d)


def feature_dim(scenario: Scenario, time_feature: bool = False) -> int:
    return scenario.n_locations + scenario.n_services + scenario.n_mnos + int(time_feature)


def features(scenario: Scenario, state: State, time_feature: bool = False) -> np.ndarray:
    """One-hot location, service and current MNO, optionally remaining time."""
    nl, nx = scenario.n_locations, scenario.n_services
    v = np.zeros(feature_dim(scenario, time_feature))
    v[state.location] = 1.0
    v[nl + state.service] = 1.0
    v[nl + nx + state.mno] = 1.0
    if time_feature:
        v[-1] = (scenario.horizon - state.t) / scenario.horizon
    return v


def state_features(scenario: Scenario, time_feature: bool = False) -> np.ndarray:
    """Features of every state, shape ``(T, L, X, M, d)`` (``T`` = 1 without time)."""
    T = scenario.horizon if time_feature else 1
    out = np.zeros((T, scenario.n_locations, scenario.n_services, scenario.n_mnos,
                    feature_dim(scenario, time_feature)))
    for k in range(T):
        for s in scenario.states(k + 1):
            out[k, s.location, s.service, s.mno] = features(scenario, s, time_feature)
    return out


def greedy_policy(net: nn.Network, scenario: Scenario, time_feature: bool = False,
                  grid: np.ndarray | None = None) -> np.ndarray:
    """Argmin-Q action for every ``(t, state)``, shape ``(T, L, X, M)``."""
    X = state_features(scenario, time_feature) if grid is None else grid
    q = nn.forward(net, X.reshape(-1, X.shape[-1])).reshape(X.shape[:-1] + (scenario.n_mnos,))
    pi = np.argmin(q, axis=-1)
    if not time_feature:
        pi = np.broadcast_to(pi, (scenario.horizon,) + pi.shape[1:])
    return np.ascontiguousarray(pi)


def _batch_targets(primary: nn.Network, target: nn.Network, rewards, next_x, done, discount, selection):
    y = np.array(rewards, dtype=float)
    live = ~done
    if discount == 0 or not live.any():
        return y
    xs = next_x[live]
    q_primary = nn.forward(primary, xs)
    q_target = nn.forward(target, xs)
    if selection == "primary":
        pick, evaluate = q_primary, q_target
    else:
        pick, evaluate = q_target, q_primary
    a_sel = np.argmin(pick, axis=1)
    y[live] += discount * evaluate[np.arange(xs.shape[0]), a_sel]
    return y


def dqn_target(primary: nn.Network, target: nn.Network, transition: Transition, discount: float,
               scenario: Scenario | None = None, time_feature: bool = False, selection: str = "primary",
               scale: float = 1.0) -> float:
    """Double-DQN regression target for a single transition.

    The next action is chosen by one network and valued by the other:
    with ``selection="primary"`` the primary picks and the target evaluates.
    """
    r = transition.utility / scale
    if transition.done or discount == 0:
        return float(r)
    if scenario is None:
        raise ValueError("a scenario is needed to featurise a non-terminal next state")
    nx_ = features(scenario, transition.next_state, time_feature)[None, :]
    return float(_batch_targets(primary, target, [r], nx_, np.array([False]), discount, selection)[0])


def default_cost_scale(scenario: Scenario) -> float:
    lam = float(np.mean(scenario.workload_rates))
    scale = scenario.pricing.cloud_price * lam
    return scale if scale > 0 else 1.0


def train_dqn(scenario: Scenario, config: DqnConfig, rng: np.random.Generator) -> TrainResult:
    """Double DQN: epsilon-greedy episodes, replay pool, target sync every C episodes.

    After each episode the current greedy policy is evaluated exactly, giving
    the cost series used for convergence curves.
    """
    cfg = config
    scale = cfg.cost_scale if cfg.cost_scale is not None else default_cost_scale(scenario)
    d = feature_dim(scenario, cfg.time_feature)
    sizes = [d, *cfg.hidden, scenario.n_mnos]
    primary = nn.init_network(sizes, rng, cfg.activation)
    target = primary.copy()
    buffer = ReplayBuffer(cfg.replay_capacity)
    grid = state_features(scenario, cfg.time_feature)
    feat = grid.reshape(-1, d)
    feat_shape = grid.shape[:-1]

    def featurize(s: State) -> np.ndarray:
        k = s.t - 1 if cfg.time_feature else 0
        return grid[k, s.location, s.service, s.mno]

    costs = np.zeros(cfg.episodes)
    eps_log = np.zeros(cfg.episodes)
    losses = np.full(cfg.episodes, np.nan)
    for e in range(cfg.episodes):
        eps = cfg.epsilon.value(e)
        s = reset(scenario, rng)
        for _ in range(scenario.horizon):
            q = nn.forward(primary, featurize(s))
            a = select_action(q, eps, rng)
            tr = step(scenario, s, a, rng)
            buffer.add(tr)
            s = tr.next_state
        if len(buffer) >= cfg.minibatch:
            ep_loss = 0.0
            for _ in range(cfg.updates_per_episode):
                batch = buffer.sample(cfg.minibatch, rng)
                x = np.stack([featurize(t.state) for t in batch])
                acts = np.array([t.action for t in batch])
                done = np.array([t.done for t in batch])
                nxt = np.stack([featurize(t.next_state) if not t.done else np.zeros(d) for t in batch])
                rewards = np.array([t.utility for t in batch]) / scale
                y = _batch_targets(primary, target, rewards, nxt, done, cfg.discount, cfg.selection)
                grad = nn.backward(primary, x, acts, y)
                nn.sgd_step(primary, grad, cfg.lr)
                ep_loss += grad.loss
            losses[e] = ep_loss / cfg.updates_per_episode
        if (e + 1) % cfg.sync_period == 0:
            nn.sync(target, primary)
        eps_log[e] = eps
        q_all = nn.forward(primary, feat).reshape(feat_shape + (scenario.n_mnos,))
        pi = np.argmin(q_all, axis=-1)
        if not cfg.time_feature:
            pi = np.broadcast_to(pi, (scenario.horizon,) + pi.shape[1:])
        costs[e] = policy_cost(scenario, pi)
    policy = greedy_policy(primary, scenario, cfg.time_feature, grid)
    return TrainResult(costs, eps_log, losses, model=primary, policy=policy)


def episodes_to_threshold(costs, optimum: float, tol: float = 0.10) -> float:
    """1-based episode at which ``costs`` first falls within ``tol`` of ``optimum``."""
    hit = np.flatnonzero(np.asarray(costs) <= (1.0 + tol) * optimum)
    return float(hit[0] + 1) if hit.size else float("inf")
