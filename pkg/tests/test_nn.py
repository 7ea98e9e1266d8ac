import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnoswitch import nn


def zero_net(sizes):
    return nn.Network([np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
                      [np.zeros(o) for o in sizes[1:]])


def manual_forward(net, x):
    """Layer-by-layer loops, written independently of the vectorised path."""
    a = list(map(float, x))
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = [sum(w[j, i] * a[i] for i in range(len(a))) + b[j] for j in range(w.shape[0])]
        if k < len(net.weights) - 1:
            z = [max(v, 0.0) if net.activation == "relu" else np.tanh(v) for v in z]
        a = z
    return np.array(a)


def test_zero_network_outputs_zero():
    net = zero_net([4, 3, 2])
    assert np.array_equal(nn.forward(net, np.ones(4)), np.zeros(2))


def test_identity_linear_layer():
    net = nn.Network([np.eye(3)], [np.zeros(3)])
    x = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(nn.forward(net, x), x)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["relu", "tanh"]))
def test_forward_matches_manual(seed, act):
    rng = np.random.default_rng(seed)
    net = nn.init_network([5, 7, 4, 3], rng, act)
    x = rng.normal(size=5)
    assert np.allclose(nn.forward(net, x), manual_forward(net, x), atol=1e-12)


def test_batch_forward_matches_single():
    rng = np.random.default_rng(1)
    net = nn.init_network([4, 8, 2], rng)
    X = rng.normal(size=(6, 4))
    assert np.allclose(nn.forward(net, X), np.stack([nn.forward(net, x) for x in X]))


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension 4"):
        nn.forward(zero_net([4, 2]), np.ones(3))


def test_glorot_limits():
    net = nn.init_network([10, 30, 2], np.random.default_rng(0))
    assert np.max(np.abs(net.weights[0])) <= np.sqrt(6 / 40)
    assert np.all(net.biases[0] == 0)


@pytest.mark.parametrize("act", ["relu", "tanh"])
def test_gradient_finite_differences(act):
    rng = np.random.default_rng(7)
    net = nn.init_network([6, 16, 16, 2], rng, act)
    X = rng.normal(size=(5, 6))
    a = rng.integers(0, 2, size=5)
    y = rng.normal(size=5)
    g = nn.backward(net, X, a, y).flat()
    h = 1e-5
    num = np.empty_like(g)
    i = 0
    for p in net.params():
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = nn.loss(net, X, a, y)
            p[idx] = old - h
            down = nn.loss(net, X, a, y)
            p[idx] = old
            num[i] = (up - down) / (2 * h)
            i += 1
    rel = np.linalg.norm(g - num) / max(np.linalg.norm(g) + np.linalg.norm(num), 1e-12)
    assert rel < 1e-4


def test_linear_gradient_hand_formula():
    # single linear layer: dL/dW[a] = (q_a - y) x, dL/db[a] = q_a - y, other rows zero
    w = np.array([[1.0, 2.0], [0.5, -1.0]])
    net = nn.Network([w], [np.array([0.1, 0.2])])
    x = np.array([3.0, -1.0])
    q = w @ x + np.array([0.1, 0.2])
    g = nn.backward(net, x, 1, 4.0)
    assert np.allclose(g.weights[0][1], (q[1] - 4.0) * x)
    assert np.allclose(g.weights[0][0], 0.0)
    assert g.biases[0][1] == pytest.approx(q[1] - 4.0)
    assert g.loss == pytest.approx(0.5 * (q[1] - 4.0) ** 2)


def test_sgd_step_in_place_and_errors():
    rng = np.random.default_rng(0)
    net = nn.init_network([3, 4, 2], rng)
    before = net.flat()
    g = nn.backward(net, rng.normal(size=3), 0, 1.0)
    assert nn.sgd_step(net, g, 0.1) is net
    assert np.allclose(net.flat(), before - 0.1 * g.flat())
    with pytest.raises(ValueError):
        nn.sgd_step(net, g, 0.0)
    g.weights[0][0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        nn.sgd_step(net, g, 0.1)


def test_sgd_reduces_loss():
    rng = np.random.default_rng(2)
    net = nn.init_network([3, 8, 2], rng)
    X, a, y = rng.normal(size=(16, 3)), rng.integers(0, 2, 16), rng.normal(size=16)
    before = nn.loss(net, X, a, y)
    nn.sgd_step(net, nn.backward(net, X, a, y), 1e-2)
    assert nn.loss(net, X, a, y) < before


def test_sync_copies_and_detaches():
    rng = np.random.default_rng(3)
    p, t = nn.init_network([3, 4, 2], rng), nn.init_network([3, 4, 2], rng)
    nn.sync(t, p)
    assert np.array_equal(t.flat(), p.flat())
    p.weights[0][0, 0] += 1.0
    assert not np.array_equal(t.flat(), p.flat())
    with pytest.raises(ValueError):
        nn.sync(nn.init_network([3, 5, 2], rng), p)


def test_checkpoint_bit_exact(tmp_path):
    net = nn.init_network([5, 9, 3], np.random.default_rng(4), "tanh")
    nn.save_checkpoint(net, tmp_path / "c.json")
    back = nn.load_checkpoint(tmp_path / "c.json")
    assert np.array_equal(back.flat(), net.flat())
    assert back.sizes == net.sizes and back.activation == "tanh"


def test_toy_regression():
    # learn q_0(x) = 2 x_0 - x_1 + 0.5 on one output head
    rng = np.random.default_rng(5)
    net = nn.init_network([2, 16, 2], rng)
    X = rng.uniform(-1, 1, size=(256, 2))
    y = 2 * X[:, 0] - X[:, 1] + 0.5
    a = np.zeros(256, dtype=int)
    for _ in range(10_000):
        idx = rng.integers(0, 256, size=32)
        nn.sgd_step(net, nn.backward(net, X[idx], a[idx], y[idx]), 0.05)
    mse = np.mean((nn.forward(net, X)[:, 0] - y) ** 2)
    assert mse < 1e-3
