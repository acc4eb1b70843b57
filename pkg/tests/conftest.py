import numpy as np
import pytest

from invsqnls.ground_state import solve_shooting
from invsqnls.params_grid import PhysicalParams, build_grid


@pytest.fixture(scope="session")
def par3():
    return PhysicalParams.critical(3, 0.125)


@pytest.fixture(scope="session")
def grid_small(par3):
    # coarse grid for fast tests; r_max = 30 still holds the whole tail
    return build_grid(par3, 1024, 30.0)


@pytest.fixture(scope="session")
def gs_small(par3, grid_small):
    return solve_shooting(par3, grid_small)


@pytest.fixture(scope="session")
def grid_run(par3):
    return build_grid(par3, 2048, 40.0)


@pytest.fixture(scope="session")
def gs_run(par3, grid_run):
    return solve_shooting(par3, grid_run)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260822)
