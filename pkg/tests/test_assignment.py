import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mnoswitch.assignment import Pricing, alpha_star, slot_cost

GRID = np.linspace(0.0, 1.0, 10_001)  # step 1e-4


def grid_alpha(fc, ff, gamma):
    """Smallest grid alpha meeting the mixed-confidence floor, or None."""
    ok = fc * (1 - GRID) + ff * GRID >= gamma
    return GRID[np.argmax(ok)] if ok.any() else None


@pytest.mark.parametrize(
    "fc, ff, gamma, alpha, feasible",
    [
        (0.9, 0.95, 0.9, 0.0, True),
        (0.8, 0.95, 0.9, 2 / 3, True),
        (0.5, 0.85, 0.9, None, False),
        (0.7, 0.7, 0.6, 0.0, True),
        (0.7, 0.7, 0.8, None, False),
        (0.2, 1.0, 1.0, 1.0, True),
    ],
)
def test_alpha_star_examples(fc, ff, gamma, alpha, feasible):
    split = alpha_star(fc, ff, gamma)
    assert split.feasible is feasible
    if feasible:
        assert split.alpha == pytest.approx(alpha, abs=1e-12)


def test_alpha_star_rejects_out_of_range():
    with pytest.raises(ValueError):
        alpha_star(1.2, 0.5, 0.5)


probs = st.floats(0.0, 1.0, allow_nan=False)


@given(probs, probs, probs)
def test_alpha_star_agrees_with_grid(fc, ff, gamma):
    split = alpha_star(fc, ff, gamma)
    ref = grid_alpha(fc, ff, gamma)
    assert split.feasible == (ref is not None)
    if split.feasible:
        assert 0.0 <= split.alpha <= 1.0
        mixed = fc * (1 - split.alpha) + ff * split.alpha
        assert mixed >= gamma - 1e-12
        if 0 < split.alpha < 1:
            assert mixed == pytest.approx(gamma, abs=1e-12)
        if ref is not None:
            assert abs(split.alpha - ref) <= 1e-4 + 1e-12


def test_slot_cost_examples():
    pr = Pricing({"A": 3.0}, 1.0)
    assert slot_cost(pr, "A", 0.25, 4) == pytest.approx(6.0)
    assert slot_cost(pr, "A", 0.7, 0) == 0.0
    assert slot_cost(pr, "A", 0.0, 7) == pytest.approx(7.0)
    with pytest.raises(ValueError):
        slot_cost(pr, "A", 0.5, -1)


def test_pricing_requires_fog_above_cloud():
    with pytest.raises(ValueError):
        Pricing({"A": 1.0}, 1.0)


@given(st.floats(0.01, 10), st.floats(0.001, 10), probs, probs, st.floats(0, 100))
def test_slot_cost_monotone_in_alpha(nu, extra, a1, a2, w):
    pr = Pricing({"A": nu + extra}, nu)
    lo, hi = sorted((a1, a2))
    assert slot_cost(pr, "A", lo, w) <= slot_cost(pr, "A", hi, w) + 1e-9
