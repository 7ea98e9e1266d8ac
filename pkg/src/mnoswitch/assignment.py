"""Optimal fog/cloud workload split and the per-slot payment."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping


@dataclass(frozen=True)
class Pricing:
    """Fog price per MNO and the (shared) cloud price, per workload unit."""

    fog_price: Mapping[str, float]
    cloud_price: float

    def __post_init__(self):
        if not self.cloud_price > 0:
            raise ValueError(f"cloud price must be > 0, got {self.cloud_price}")
        for mno, mu in self.fog_price.items():
            if not mu > self.cloud_price:
                raise ValueError(
                    f"fog price for {mno!r} ({mu}) must exceed the cloud price ({self.cloud_price})"
                )
        object.__setattr__(self, "fog_price", dict(self.fog_price))

    def fog(self, mno) -> float:
        try:
            return self.fog_price[mno]
        except KeyError:
            raise KeyError(f"no fog price for MNO {mno!r}") from None

    @property
    def max_fog_price(self) -> float:
        return max(self.fog_price.values())


@dataclass(frozen=True)
class Split:
    alpha: float
    feasible: bool


INFEASIBLE = Split(alpha=1.0, feasible=False)


def alpha_star(f_cloud: float, f_fog: float, gamma: float) -> Split:
    """Smallest fog fraction whose mixed confidence reaches ``gamma``.

    The mixed confidence ``f_cloud*(1-a) + f_fog*a`` is linear in ``a``, so
    the answer is 0 when the cloud already suffices, the crossing point when
    the fog tier is good enough, and infeasible otherwise.
    """
    for name, v in (("f_cloud", f_cloud), ("f_fog", f_fog), ("gamma", gamma)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    if f_cloud >= gamma:
        return Split(0.0, True)
    if f_fog < gamma:
        return INFEASIBLE
    # here f_fog >= gamma > f_cloud, so the denominator is positive
    alpha = (gamma - f_cloud) / (f_fog - f_cloud)
    return Split(min(alpha, 1.0), True)


def slot_cost(pricing: Pricing, mno, alpha: float, workload: float) -> float:
    if workload < 0:
        raise ValueError(f"workload must be >= 0, got {workload}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return pricing.fog(mno) * alpha * workload + pricing.cloud_price * (1.0 - alpha) * workload


def unit_cost(pricing: Pricing, mno, alpha: float) -> float:
    """Cost per workload unit at fog fraction ``alpha``."""
    return slot_cost(pricing, mno, alpha, 1.0)
