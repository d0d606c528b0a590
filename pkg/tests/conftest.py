import time

import numpy as np
import pytest

from elsafe.basis import build_circle_basis
from elsafe.config import build, load_config
from elsafe.params import preset

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a criterion outcome for the end-of-run summary; returns the outcome."""
    def _record(criterion: int, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def arm_sim():
    cfg, base = load_config("arm_sim")
    return build(cfg, base)


@pytest.fixture(scope="session")
def sim_preset():
    p, fns = preset("arm_sim")
    return p, fns, build_circle_basis(p.c0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def full_log(arm_sim):
    from elsafe.scenario import run_closed_loop
    t0 = time.perf_counter()
    log = run_closed_loop(arm_sim.scenario, "full")
    log.wall_s = time.perf_counter() - t0
    return log


@pytest.fixture(scope="session")
def reduced_log(arm_sim):
    from elsafe.scenario import run_closed_loop
    return run_closed_loop(arm_sim.scenario, "reduced")


@pytest.fixture(scope="session")
def mu_bounds(arm_sim):
    from elsafe.dynamics import estimate_mu_bounds
    return estimate_mu_bounds(arm_sim.model, 1000, 0)


@pytest.fixture(scope="session")
def certificate(arm_sim):
    from elsafe.conditions import lipschitz_certificate
    return lipschitz_certificate(arm_sim.params, arm_sim.shaping, arm_sim.basis, arm_sim.field)
