import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_scenario
from mnoswitch import nn
from mnoswitch.agents import (
    DqnConfig,
    EpsilonSchedule,
    QTable,
    ReplayBuffer,
    default_cost_scale,
    dqn_target,
    episodes_to_threshold,
    features,
    q_update,
    select_action,
    train_dqn,
    train_qlearning,
)
from mnoswitch.dp import solve
from mnoswitch.env import State, Transition, expected_utility


def tiny_scenario(**kw):
    conf = {("L1", "A"): (0.8, 0.95), ("L1", "B"): (0.9, 0.95),
            ("L2", "A"): (0.9, 1.0), ("L2", "B"): (0.5, 0.92)}
    return make_scenario(conf, horizon=3, chain=[[0.7, 0.3], [0.4, 0.6]], lam=5.0, d=60.0, **kw)


def test_q_update_example():
    sc = tiny_scenario()
    table = QTable.zeros(sc, g=0.5, b=1.0)
    table.values[1, 1, 0, 1] = [2.0, 7.0]
    tr = Transition(State(0, 0, 0, 1), 1, 10.0, State(1, 0, 1, 2))
    q_update(table, tr)
    # 0 + 0.5 * (10 + 1.0 * 2 - 0) = 6
    assert table.values[0, 0, 0, 0, 1] == pytest.approx(6.0)
    assert table.visits[0, 0, 0, 0, 1] == 1
    q_update(table, tr)
    assert table.values[0, 0, 0, 0, 1] == pytest.approx(6.0 + 0.5 * (12.0 - 6.0))


def test_q_update_terminal_bootstraps_zero():
    sc = tiny_scenario()
    table = QTable.zeros(sc, g=1.0, b=1.0)
    table.values[:] = 100.0
    tr = Transition(State(0, 0, 0, 3), 0, 4.0, State(1, 0, 0, 4), done=True)
    q_update(table, tr)
    assert table.values[2, 0, 0, 0, 0] == pytest.approx(4.0)


def test_select_action_greedy_and_ties():
    rng = np.random.default_rng(0)
    assert select_action([3.0, 1.0, 2.0], 0.0, rng) == 1
    assert select_action([1.0, 1.0], 0.0, rng) == 0
    with pytest.raises(ValueError):
        select_action([], 0.1, rng)
    with pytest.raises(ValueError):
        select_action([1.0], 1.5, rng)


def test_select_action_frequencies():
    rng = np.random.default_rng(1)
    n = 30_000
    picks = np.bincount([select_action([0.0, 1.0, 2.0], 0.3, rng) for _ in range(n)], minlength=3) / n
    # greedy arm gets 0.7 + 0.1, the others 0.1 each; sd ~ 0.002
    assert np.allclose(picks, [0.8, 0.1, 0.1], atol=0.015)


def test_epsilon_schedule_endpoints():
    lin = EpsilonSchedule(0.8, 0.05, "linear", 100)
    assert lin.value(0) == 0.8 and lin.value(100) == 0.05 and lin.value(5000) == 0.05
    assert lin.value(50) == pytest.approx(0.425)
    exp = EpsilonSchedule(0.8, 0.05, "exponential", 100)
    assert exp.value(0) == pytest.approx(0.8) and exp.value(100) == pytest.approx(0.05)
    assert exp.value(50) == pytest.approx(np.sqrt(0.8 * 0.05))
    with pytest.raises(ValueError):
        EpsilonSchedule(0.1, 0.5)


@given(st.integers(0, 300), st.integers(0, 300), st.sampled_from(["linear", "exponential"]))
def test_epsilon_non_increasing(e1, e2, mode):
    s = EpsilonSchedule(0.9, 0.01, mode, 200)
    lo, hi = sorted((e1, e2))
    assert s.value(lo) >= s.value(hi)
    assert 0.01 <= s.value(hi) <= 0.9


def test_replay_eviction_and_sampling():
    buf = ReplayBuffer(3)
    for i in range(5):
        buf.add(Transition(State(0, 0, 0, 1), 0, float(i), State(0, 0, 0, 2)))
    assert [t.utility for t in buf] == [2.0, 3.0, 4.0]
    batch = buf.sample(50, np.random.default_rng(0))
    assert len(batch) == 50 and {t.utility for t in batch} <= {2.0, 3.0, 4.0}
    with pytest.raises(ValueError):
        ReplayBuffer(3).sample(1, np.random.default_rng(0))


def _linear(w):
    w = np.asarray(w, float)
    return nn.Network([w], [np.zeros(w.shape[0])])


def test_dqn_target_cases():
    sc = tiny_scenario()
    d = 2 + 1 + 2
    primary = _linear(np.zeros((2, d)))
    target = _linear(np.zeros((2, d)))
    # next state features: L2, service s, MNO B -> columns 1, 2, 4
    primary.weights[0][:, 1] = [5.0, 1.0]   # primary prefers action 1
    target.weights[0][:, 1] = [3.0, 8.0]    # target prefers action 0
    tr = Transition(State(0, 0, 0, 1), 0, 10.0, State(1, 0, 1, 2))
    assert dqn_target(primary, target, tr, 0.5, sc) == pytest.approx(10.0 + 0.5 * 8.0)
    assert dqn_target(primary, target, tr, 0.5, sc, selection="target") == pytest.approx(10.0 + 0.5 * 5.0)
    assert dqn_target(primary, target, tr, 0.0, sc) == 10.0
    assert dqn_target(primary, target, tr, 0.5, sc, scale=2.0) == pytest.approx(5.0 + 0.5 * 8.0)
    done = Transition(State(0, 0, 0, 3), 0, 10.0, State(1, 0, 1, 4), done=True)
    assert dqn_target(primary, target, done, 0.9) == 10.0


def test_features_one_hot():
    sc = tiny_scenario()
    v = features(sc, State(1, 0, 0, 2), time_feature=True)
    assert np.array_equal(v, [0, 1, 1, 1, 0, 1 / 3])


def test_discount_zero_regresses_expected_utility():
    # one context, no switching effect: Q(s, a) * scale should approach E[utility]
    sc = make_scenario({("L", "A"): (0.8, 0.95), ("L", "B"): (0.9, 0.95)}, horizon=4, lam=5.0, d=0.0,
                       fog={"A": 3.0, "B": 2.0})
    cfg = DqnConfig(episodes=1500, discount=0.0, hidden=(16,), epsilon=EpsilonSchedule(1.0, 1.0, horizon=0),
                    lr=1e-2, updates_per_episode=4)
    res = train_dqn(sc, cfg, np.random.default_rng(0))
    scale = default_cost_scale(sc)
    truth = np.array([expected_utility(sc, State(0, 0, m), a) for m in range(2) for a in range(2)])
    learned = np.array([res.model(features(sc, State(0, 0, m)))[a] * scale for m in range(2) for a in range(2)])
    assert np.mean(np.abs(learned - truth) / truth) < 0.05


def test_single_mno_dqn_matches_dp():
    sc = make_scenario({("L1", "A"): (0.8, 0.95), ("L2", "A"): (0.9, 1.0)}, horizon=3,
                       chain=[[0.5, 0.5], [0.5, 0.5]])
    res = train_dqn(sc, DqnConfig(episodes=5, hidden=(8,)), np.random.default_rng(0))
    assert res.costs[-1] == pytest.approx(solve(sc).expected(sc), rel=1e-12)


def test_dqn_same_seed_is_deterministic():
    sc = tiny_scenario()
    cfg = DqnConfig(episodes=30, hidden=(8, 8), minibatch=8, sync_period=5)
    a = train_dqn(sc, cfg, np.random.default_rng(42))
    b = train_dqn(sc, cfg, np.random.default_rng(42))
    assert np.array_equal(a.costs, b.costs)
    assert np.array_equal(a.model.flat(), b.model.flat())


def test_dqn_config_round_trip():
    cfg = DqnConfig(episodes=100, hidden=[32], epsilon={"start": 0.5, "end": 0.1, "horizon": 10})
    assert DqnConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        DqnConfig(selection="other")


def test_qlearning_toy_converges_to_dp():
    sc = tiny_scenario(workload="fixed")
    opt = solve(sc).expected(sc)
    res = train_qlearning(sc, EpsilonSchedule(0.8, 0.05, horizon=1500), 2000, 1.0, 1.0,
                          np.random.default_rng(0), g_decay="visits")
    assert res.costs[-1] <= opt * (1 + 1e-3)


def test_qlearning_zero_episodes():
    sc = tiny_scenario()
    res = train_qlearning(sc, EpsilonSchedule(), 0, 0.1, 0.95, np.random.default_rng(0))
    assert res.costs.size == 0 and res.policy.shape == (3, 2, 1, 2)


def test_episodes_to_threshold():
    assert episodes_to_threshold([20, 12, 10.9, 10.0], 10.0) == 3
    assert episodes_to_threshold([20, 12], 10.0) == float("inf")
    assert episodes_to_threshold([11.0], 10.0) == 1
