import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vortexflow import fields as fl
from vortexflow.lattice import TorusGrid

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(ROOT, "configs")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid16():
    return TorusGrid(16, 16)


@pytest.fixture
def rect_grid():
    return TorusGrid(12, 10, 1.3, 0.8)


@pytest.fixture
def u1_spec():
    return fl.ActionSpec([[1]], [4 * np.pi], [1])


@pytest.fixture
def t2_spec():
    return fl.ActionSpec([[1, 1], [0, 1]], [14.0, 2.0], [1, 0])


def random_pair(grid, spec, rng, amp=0.5):
    """Generic (non-holomorphic) pair: random links and random section values."""
    a = amp * rng.normal(size=(spec.k, 2) + grid.shape)
    u = rng.normal(size=(spec.n,) + grid.shape) + 1j * rng.normal(size=(spec.n,) + grid.shape)
    return fl.Connection(grid, spec, a), fl.Section(grid, spec, u)


def random_tangent(grid, spec, rng):
    da = rng.normal(size=(spec.k, 2) + grid.shape)
    du = rng.normal(size=(spec.n,) + grid.shape) + 1j * rng.normal(size=(spec.n,) + grid.shape)
    return da, du
