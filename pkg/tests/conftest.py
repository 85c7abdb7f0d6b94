from pathlib import Path

import numpy as np
import pytest

from gbdp.model import DPInstance, load_instance
from gbdp.oracle import solve_exact

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def tiny(**kw):
    """Two slots of capacity one, three epochs, coarse grid."""
    p = dict(n=2, x_max=[1, 1], horizon=3, lam=0.4, beta_c=0.2, beta_d=-0.15,
             beta_s=[0.3, -0.2], price_lo=0.0, price_hi=10.0, revenue=5.0,
             cost_per_order=0.083, price_grid_step=2.5)
    p.update(kw)
    return DPInstance(**p)


@pytest.fixture(scope="session")
def small():
    return load_instance(CONFIGS / "small.toml")


@pytest.fixture(scope="session")
def small_exact(small):
    return solve_exact(small)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
