import numpy as np
import pytest

from mnoswitch.assignment import Pricing
from mnoswitch.env import Scenario
from mnoswitch.experiments.templates import generate_scenario
from mnoswitch.latency import LatencyCatalog, LatencyDistribution, ServiceSpec

FAST, SLOW = 50.0, 500.0


def two_point(p_fast):
    """Latency that is FAST w.p. ``p_fast`` and SLOW otherwise."""
    if p_fast >= 1.0:
        return LatencyDistribution([FAST], [1.0])
    if p_fast <= 0.0:
        return LatencyDistribution([SLOW], [1.0])
    return LatencyDistribution([FAST, SLOW], [p_fast, 1.0 - p_fast])


def make_scenario(conf, *, services=None, horizon=1, chain=None, lam=10.0, fog=None, cloud=1.0,
                  d=0.0, init=None, workload="poisson"):
    """Scenario from ``conf[(location, mno)] = (f_cloud, f_fog)`` at any bound in [FAST, SLOW)."""
    services = services or [ServiceSpec("s", 100.0, 0.9)]
    locations = sorted({l for l, _ in conf})
    mnos = sorted({m for _, m in conf})
    cat = LatencyCatalog()
    for (l, m), (fc, ff) in conf.items():
        cat[l, m, "cloud"] = two_point(fc)
        cat[l, m, "fog"] = two_point(ff)
    n_ctx = len(locations) * len(services)
    if chain is None:
        chain = np.eye(n_ctx)
    if init is None:
        init = np.full((len(locations), len(services), len(mnos)), 1.0 / (n_ctx * len(mnos)))
    fog = fog or {m: 3.0 for m in mnos}
    return Scenario(
        locations=tuple(locations), services=tuple(services), mnos=tuple(mnos), horizon=horizon,
        catalog=cat, pricing=Pricing(fog, cloud), switch_delay_ms=d, context_chain=np.asarray(chain, float),
        workload_rates=lam, initial_state=init, workload_model=workload,
    )


@pytest.fixture(scope="session")
def standard():
    return generate_scenario("standard", np.random.default_rng(0))


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
