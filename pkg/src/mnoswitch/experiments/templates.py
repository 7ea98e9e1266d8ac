"""Synthetic scenario templates.

Latency profiles are discretised two-component mixtures: a log-normal body
around the typical RTT plus a secondary hump for congested periods, cut off
at ``cap_ms``.  A small far-tail mass on the fog tier decides whether the
0.999-reliability services are achievable on a given (location, MNO).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..assignment import Pricing
from ..dp import policy_cost, solve
from ..env import Scenario, ScenarioError, constant_policy
from ..latency import DEFAULT_BIN_WIDTH, LatencyCatalog, LatencyDistribution, ServiceSpec

REFERENCE_SERVICES = (
    ServiceSpec("left_turn_assist", 100.0, 0.90),
    ServiceSpec("emergency_brake_warning", 120.0, 0.999),
    ServiceSpec("lane_change_warning", 400.0, 0.999),
)


@dataclass(frozen=True)
class MixtureProfile:
    body_median: float
    body_sigma: float
    hump_mean: float
    hump_sd: float
    hump_weight: float
    far_mean: float = 0.0
    far_weight: float = 0.0
    cap_ms: float = 300.0


def discretized_mixture(p: MixtureProfile, bin_width: float = DEFAULT_BIN_WIDTH) -> LatencyDistribution:
    """Mass of each ``(k*w - w, k*w]`` bin up to ``cap_ms``, renormalised."""
    edges = np.arange(bin_width, p.cap_ms + bin_width / 2, bin_width)
    lo = edges - bin_width
    body = stats.lognorm(s=p.body_sigma, scale=p.body_median)
    hump = stats.norm(p.hump_mean, p.hump_sd)
    mass = (1 - p.hump_weight - p.far_weight) * (body.cdf(edges) - body.cdf(lo))
    mass += p.hump_weight * (hump.cdf(edges) - hump.cdf(lo))
    if p.far_weight > 0:
        far = stats.norm(p.far_mean, 10.0)
        mass += p.far_weight * (far.cdf(edges) - far.cdf(lo))
    mass = np.clip(mass, 0.0, None)
    keep = mass > 1e-12
    edges, mass = edges[keep], mass[keep]
    return LatencyDistribution(edges, mass / mass.sum())


# Per-MNO baselines: MNO 1 has the better cloud path, MNO 2 the better fog.
_BASE = {
    ("cloud", 0): dict(median=(60, 80), sigma=(0.12, 0.22), hump=(150, 230), hump_w=(0.03, 0.12)),
    ("cloud", 1): dict(median=(80, 100), sigma=(0.12, 0.22), hump=(150, 230), hump_w=(0.05, 0.15)),
    ("fog", 0): dict(median=(40, 60), sigma=(0.15, 0.25), hump=(70, 90), hump_w=(0.05, 0.15)),
    ("fog", 1): dict(median=(20, 35), sigma=(0.15, 0.25), hump=(50, 80), hump_w=(0.05, 0.15)),
}


def _draw_profile(rng, tier, mno_kind, swap) -> MixtureProfile:
    kind = 1 - mno_kind if swap else mno_kind
    b = _BASE[(tier, kind)]
    u = lambda lohi: float(rng.uniform(*lohi))  # noqa: E731
    far_w = 0.0
    far_mean = 0.0
    if tier == "fog":
        # about half of the fog profiles miss the 0.999 floor through a far tail
        far_w = float(rng.choice([0.0, 0.0005, 0.003, 0.01]))
        far_mean = u((160, 260))
    return MixtureProfile(
        body_median=u(b["median"]), body_sigma=u(b["sigma"]),
        hump_mean=u(b["hump"]), hump_sd=10.0, hump_weight=u(b["hump_w"]),
        far_mean=far_mean, far_weight=far_w,
    )


def _route_chain(rng, n_loc, n_svc, p_move):
    """Ring route: advance one location w.p. ``p_move``; service drawn from the new location's mix."""
    mix = rng.dirichlet(np.ones(n_svc), size=n_loc)
    P = np.zeros((n_loc * n_svc, n_loc * n_svc))
    for l in range(n_loc):
        for x in range(n_svc):
            for l2, pl in ((l, 1 - p_move), ((l + 1) % n_loc, p_move)):
                for x2 in range(n_svc):
                    P[l * n_svc + x, l2 * n_svc + x2] += pl * mix[l2, x2]
    return P


def _switching_gain(sc: Scenario) -> float:
    opt = solve(sc).expected(sc)
    best_fixed = min(policy_cost(sc, constant_policy(m)) for m in range(sc.n_mnos))
    return best_fixed / opt if opt > 0 else float("inf")


def standard(rng: np.random.Generator, *, n_locations=5, horizon=20, lam=5.0, switch_delay_ms=20.0,
             cloud_price=1.0, fog_prices=(3.0, 2.5), p_move=0.6, swap_prob=0.4,
             services=REFERENCE_SERVICES, min_switching_gain=1.2, max_tries=1000) -> Scenario:
    """5 locations, the three reference services, 2 MNOs with crossed cloud/fog quality.

    Draws are rejected until every (location, service) has a feasible MNO
    and the best single-MNO policy costs at least ``min_switching_gain``
    times the optimum, so that operator choice matters.
    """
    mnos = ("MNO1", "MNO2")
    locations = tuple(f"L{i + 1}" for i in range(n_locations))
    for _ in range(max_tries):
        cat = LatencyCatalog()
        for loc in locations:
            swap = rng.random() < swap_prob
            for m, mno in enumerate(mnos):
                for tier in ("cloud", "fog"):
                    cat[loc, mno, tier] = discretized_mixture(_draw_profile(rng, tier, m, swap))
        P = _route_chain(rng, n_locations, len(services), p_move)
        init = np.full((n_locations, len(services), len(mnos)), 1.0 / (n_locations * len(services) * len(mnos)))
        try:
            sc = Scenario(
                locations=locations, services=tuple(services), mnos=mnos, horizon=horizon,
                catalog=cat, pricing=Pricing(dict(zip(mnos, fog_prices)), cloud_price),
                switch_delay_ms=switch_delay_ms, context_chain=P, workload_rates=lam,
                initial_state=init, name="standard",
            )
        except ScenarioError:
            # some (location, service) had no feasible MNO; redraw
            continue
        if min_switching_gain and _switching_gain(sc) < min_switching_gain:
            continue
        return sc
    raise RuntimeError(f"no feasible standard scenario after {max_tries} draws")


def single_mno(rng: np.random.Generator, **kw) -> Scenario:
    """The standard scenario restricted to its first MNO, made feasible everywhere."""
    base = standard(rng, **kw)
    mno = base.mnos[0]
    cat = LatencyCatalog()
    for loc in base.locations:
        cat[loc, mno, "cloud"] = base.catalog[loc, mno, "cloud"]
        # a tight fog profile keeps every service feasible on the lone MNO
        cat[loc, mno, "fog"] = discretized_mixture(MixtureProfile(25, 0.15, 50, 5, 0.05, cap_ms=95))
    init = base.initial_state.sum(axis=2, keepdims=True)[:, :, :1]
    return base.replace(mnos=(mno,), catalog=cat, initial_state=init,
                        pricing=Pricing({mno: base.pricing.fog(mno)}, base.pricing.cloud_price),
                        name="single_mno")


TEMPLATES = {"standard": standard, "single_mno": single_mno}


def generate_scenario(template: str, rng: np.random.Generator, **overrides) -> Scenario:
    try:
        build = TEMPLATES[template]
    except KeyError:
        raise ValueError(f"unknown scenario template {template!r}; known: {sorted(TEMPLATES)}") from None
    return build(rng, **overrides)
