import numpy as np
import pytest

from lsnuc import Grid, RateModel, SimState


@pytest.fixture
def growth_model():
    """Strictly increasing threshold, quadratic nucleation."""
    return RateModel(a_coef=1.0, alpha=1.0 / 3.0, b_coef=1.0, beta=2.0 / 3.0,
                     n_coef=1.0, i0=2)


@pytest.fixture
def flat_model():
    """Constant threshold phi0 = 0.5 with shifted quadratic nucleation."""
    return RateModel(a_coef=1.0, alpha=0.0, b_coef=0.5, beta=0.0,
                     n_coef=1.0, i0=2, shifted_nucleation=True)


def bump_values(x, c=2000.0, r1=0.2, r2=0.3):
    """Compact parabolic bump; with the defaults M0 = 1/3 and M1 = 1/12."""
    return np.maximum(-c * (x - r1) * (x - r2), 0.0)


@pytest.fixture
def bump_state():
    grid = Grid(x_max=1.0, n_cells=4000)
    return SimState(grid=grid, f=bump_values(grid.centers), t=0.0, rho=1.0)
