import numpy as np
import pytest

from charflow import linear_solver as ls
from charflow import verify as V


@pytest.fixture(scope="session")
def radial_cos():
    """Radial cosine problem and its 128-grid solve (shared: it is expensive)."""
    p = V.radial_problem()
    g = ls.solve_on_grid(p, 128, step=1e-3)
    return p, g


@pytest.fixture(scope="session")
def radial_f1():
    p = V.radial_problem(u0=V.u0_zero, f=V.f_one)
    g = ls.solve_on_grid(p, 128, step=1e-3)
    return p, g


@pytest.fixture(scope="session")
def segment_step():
    p = V.segment_problem()
    g = ls.solve_on_grid(p, 128, step=1e-3)
    return p, g


@pytest.fixture(scope="session")
def segment_step_traces(segment_step):
    p, _ = segment_step
    return ls.traces_on_stopset(p, 0, 64, step=1e-3)


@pytest.fixture(scope="session")
def spiral_cos():
    p = V.radial_problem(theta=np.pi / 6)
    g = ls.solve_on_grid(p, 128, step=1e-3)
    return p, g
