import numpy as np
import pytest
from numpy.testing import assert_allclose

from lsnuc import (
    ConfigError,
    Grid,
    OracleError,
    OracleSolution,
    RateModel,
    SimState,
    SolverConfig,
    characteristic_X,
    compare_with_fv,
    density_at,
    limit_density,
    run,
    solve_history,
)
from lsnuc.oracle import exp_bound_violations, mild_moment, sigma_inverse, x_critical

from conftest import bump_values


@pytest.fixture
def init_state():
    grid = Grid(x_max=1.0, n_cells=4000)
    return SimState(grid=grid, f=bump_values(grid.centers), t=0.0, rho=1.0)


@pytest.fixture
def decay_model():
    """Constant unit growth rate, no nucleation: u decays exponentially."""
    return RateModel(a_coef=1.0, alpha=0.0, b_coef=0.5, beta=0.0, n_coef=0.0)


def test_closed_form_exponential_decay(decay_model, init_state):
    # with a == 1 and no nucleation the reduced system is linear:
    # u(t) = phi0 + (u0 - phi0) exp(-Ma(0) t)
    sol = solve_history(decay_model, init_state, t_end=1.0, dt=1e-4)
    assert sol.u[0] == pytest.approx(1.0 - 1.0 / 12.0, rel=2e-5)
    assert_allclose(sol.ma, np.full_like(sol.ma, 1.0 / 3.0), rtol=2e-5)
    exact = 0.5 + (sol.u[0] - 0.5) * np.exp(-sol.ma[0] * sol.times)
    rel = np.max(np.abs(sol.u - exact) / exact)
    assert rel < 1e-8
    assert exp_bound_violations(sol) == 0


def test_decay_bound_holds_with_nucleation(flat_model, init_state):
    sol = solve_history(flat_model, init_state, t_end=5.0, dt=1e-3)
    assert exp_bound_violations(sol) == 0
    assert np.all(np.diff(sol.u) < 0)
    assert np.all(np.diff(sol.gamma) > 0)
    assert np.all(sol.ma > 0)


def test_mild_formulation_consistency(flat_model, init_state):
    # the transported-measure representation must reproduce the mass
    # identity int x f dx = rho - u and the count balance
    sol = solve_history(flat_model, init_state, t_end=1.0, dt=2e-5)
    for t in (0.25, 1.0):
        lhs = mild_moment(sol, t, lambda x: x)
        rhs = 1.0 - float(sol.u_at(t))
        assert lhs == pytest.approx(rhs, rel=1e-9)
    nuc_integral = np.trapezoid((sol.u - 0.5) ** 2, sol.times)
    count = mild_moment(sol, 1.0, lambda x: np.ones_like(x))
    assert count == pytest.approx(float(sol.ma[0]) + nuc_integral, rel=1e-9)


def test_density_two_branch_mass(flat_model, init_state):
    sol = solve_history(flat_model, init_state, t_end=1.0, dt=1e-4)
    x = np.linspace(1e-5, 1.5, 30000)
    f = density_at(sol, 1.0, x)
    mass = np.trapezoid(x * f, x)
    assert mass + float(sol.u_at(1.0)) == pytest.approx(1.0, abs=1e-4)
    # the nucleated branch ends at the critical size; for a == 1 the
    # critical size is exactly gamma(t)
    g1 = float(sol.gamma_at(1.0))
    assert x_critical(sol, 1.0) == pytest.approx(g1, rel=1e-12)
    # transported branch vanishes beyond the advected initial support
    # (pad past the interpolation skirt at the last nonzero cell)
    beyond = x > 0.3 + g1 + 2.0 * init_state.grid.dx
    assert np.all(f[beyond] == 0.0)
    with pytest.raises(ValueError):
        density_at(sol, 1.0, np.array([0.0, 0.5]))


def test_characteristic_closed_form():
    # alpha = 1/2 gives A(x) = 2 sqrt(x), so X = ((2 sqrt(x) + g)/2)^2
    model = RateModel(a_coef=1.0, alpha=0.5, b_coef=0.5, beta=0.5)
    grid = Grid(x_max=1.0, n_cells=10)
    init = SimState(grid=grid, f=np.zeros(10), t=0.0, rho=1.0)
    sol = OracleSolution(model=model, rho=1.0, initial=init,
                         times=np.array([0.0, 1.0]), u=np.array([1.0, 0.9]),
                         gamma=np.array([0.0, 2.0]), ma=np.array([0.5, 0.5]),
                         dt=1.0)
    assert characteristic_X(sol, 1.0, 1.0) == pytest.approx(4.0)
    x = np.array([0.25, 1.0, 2.25])
    assert_allclose(characteristic_X(sol, 1.0, x),
                    ((2.0 * np.sqrt(x) + 2.0) / 2.0) ** 2, rtol=1e-12)
    # size at t of an aggregate nucleated at time s, and its guards
    assert sigma_inverse(sol, 1.0, 0.0) == pytest.approx(1.0)
    assert sigma_inverse(sol, 1.0, 1.0) == 0.0
    with pytest.raises(OracleError):
        sigma_inverse(sol, 0.0, 1.0)


def test_limit_density_books_balance(flat_model, init_state):
    sol = solve_history(flat_model, init_state, t_end=40.0, dt=1e-3)
    lim = limit_density(sol)
    assert lim.residual < 1e-8          # u has converged to phi0
    assert lim.mass + 0.5 == pytest.approx(1.0, abs=1e-6)
    assert lim.xc_bar == pytest.approx(lim.gamma_bar, rel=1e-12)  # a == 1
    assert np.all(lim.fbar >= 0)
    # late births have had no time to grow: the branch closes
    # continuously at x -> 0
    assert lim.fbar[0] < 1e-3
    # earliest births sit just below the critical size, where the density
    # jumps from u0 - phi0 down to zero (the bump has moved past xc)
    f_left = lim.fbar[lim.x < lim.xc_bar][-1]
    assert f_left == pytest.approx(float(sol.u[0]) - 0.5, rel=1e-6)
    assert lim.fbar[lim.x > lim.xc_bar][0] == 0.0


def test_history_requires_constant_threshold(init_state):
    slope = RateModel(a_coef=1.0, alpha=0.0, b_coef=1.0, beta=1.0, n_coef=1.0)
    with pytest.raises(OracleError):
        solve_history(slope, init_state, t_end=1.0, dt=1e-3)


def test_history_requires_vanishing_nucleation_at_threshold(init_state):
    unshifted = RateModel(a_coef=1.0, alpha=0.0, b_coef=0.5, beta=0.0,
                          n_coef=1.0, i0=2, shifted_nucleation=False)
    with pytest.raises(OracleError):
        solve_history(unshifted, init_state, t_end=1.0, dt=1e-3)


def test_history_requires_supersaturated_start(flat_model):
    grid = Grid(x_max=1.0, n_cells=100)
    heavy = SimState(grid=grid, f=np.full(100, 1.9), t=0.0, rho=1.0)
    # u0 = 1 - 0.95 = 0.05 < phi0 = 0.5
    with pytest.raises(OracleError):
        solve_history(flat_model, heavy, t_end=1.0, dt=1e-3)


def test_step_halving_on_stiff_start(decay_model):
    # count 10 makes the first dt = 1 midpoint stage overshoot the
    # threshold; the solve must restart with smaller steps, not fail
    grid = Grid(x_max=1.0, n_cells=2000)
    f = bump_values(grid.centers, c=60000.0)
    init = SimState(grid=grid, f=f, t=0.0, rho=4.0)
    sol = solve_history(decay_model, init, t_end=2.0, dt=1.0)
    assert sol.dt < 1.0
    assert sol.ma[0] == pytest.approx(10.0, rel=2e-5)
    assert np.all(sol.u > 0.5)
    assert sol.u[-1] == pytest.approx(0.5, abs=1e-3)


def test_times_outside_horizon_rejected(decay_model, init_state):
    sol = solve_history(decay_model, init_state, t_end=1.0, dt=1e-3)
    with pytest.raises(OracleError):
        sol.u_at(2.0)
    with pytest.raises(OracleError):
        density_at(sol, -0.5, np.array([0.1]))


def test_compare_with_fv_guards_and_agreement(flat_model, init_state):
    sol = solve_history(flat_model, init_state, t_end=2.0, dt=1e-3)
    cfg = SolverConfig(t_end=2.0, dt=None, sample_times=(2.0,),
                       series_stride=20)
    result = run(init_state, flat_model, cfg)
    rep = compare_with_fv(sol, result.series, result.snapshots, flat_model,
                          rho=1.0)
    assert rep.sup_u_error < 2e-3
    assert rep.u_fv_strictly_decreasing
    assert rep.exp_bound_violations == 0
    assert rep.final_time == pytest.approx(2.0)

    other = RateModel(a_coef=1.0, alpha=0.0, b_coef=0.4, beta=0.0,
                      n_coef=1.0, i0=2, shifted_nucleation=True)
    with pytest.raises(ConfigError):
        compare_with_fv(sol, result.series, result.snapshots, other, rho=1.0)
    with pytest.raises(ConfigError):
        compare_with_fv(sol, result.series, result.snapshots, flat_model,
                        rho=2.0)
    short = solve_history(flat_model, init_state, t_end=1.0, dt=1e-3)
    with pytest.raises(ConfigError):
        compare_with_fv(short, result.series, result.snapshots, flat_model,
                        rho=1.0)
