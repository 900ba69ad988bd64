"""End-to-end acceptance checks, one test per numbered criterion.

Each test exercises a full configured run (or refinement/sweep study)
and asserts the quantitative behavior the package promises: conjectured
coarsening exponents, closed mass budgets, first-order consistency,
Lyapunov monotonicity, agreement with the semi-analytic reference,
trapped invariants, and loss of memory of the initial datum.

The whole module runs in about a minute.  Criterion 1 also has a
production-resolution variant that takes far longer; it is skipped
unless LS_PRODUCTION_TIER is set in the environment.
"""

import os
import time

import numpy as np
import pytest

from lsnuc import (
    Grid,
    RateModel,
    SimState,
    SolverConfig,
    TimeSeries,
    beta_one_limit,
    config_from_preset,
    conjectured_exponents,
    fit_power_law,
    invariant_product,
    mass_concentration,
    run,
    solve_history,
)
from lsnuc.oracle import exp_bound_violations
from lsnuc.runner import run_refinement, run_sweep

from conftest import bump_values

DESK_TOL = 0.08
PRODUCTION_TOL = 0.05
BUDGET_TOL = 1e-10        # relative to the total concentration rho
RESIDUAL_HALVING_SLACK = 1.3


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def fig1():
    """Desk-resolution growing-threshold run (shared by criteria 1/2/4/10)."""
    cfg = config_from_preset("fig1_desk", overrides=[
        "diagnostics.fractional_moments=[0.5]"])
    initial = SimState(grid=cfg.grid, f=cfg.initial.sample(cfg.grid),
                       t=0.0, rho=cfg.rho)
    t0 = time.perf_counter()
    result = run(initial, cfg.model, cfg.solver)
    elapsed = time.perf_counter() - t0
    return {"cfg": cfg, "result": result, "elapsed": elapsed}


@pytest.fixture(scope="module")
def time_refinement(outdir):
    cfg = config_from_preset("fig1_desk", overrides=[
        "grid.n_cells=200", "solver.t_end=2", "solver.dt=0.001",
        "solver.series_stride=1", "solver.sample_times=[2.0]"])
    return run_refinement(cfg, levels=3, mode="time",
                          out_dir=str(outdir / "refine_time"), figures=False)


@pytest.fixture(scope="module")
def space_refinement(outdir):
    cfg = config_from_preset("constphi", overrides=["solver.t_end=20"])
    return run_refinement(cfg, levels=3, mode="space",
                          out_dir=str(outdir / "refine_space"), figures=False)


@pytest.fixture(scope="module")
def invariant_run():
    """Linear dissolution with quadratic nucleation, flat growth rate."""
    model = RateModel(a_coef=1.0, alpha=0.0, b_coef=1.0, beta=1.0,
                      n_coef=1.0, i0=2)
    grid = Grid(x_max=1.0, n_cells=1000)
    initial = SimState(grid=grid, f=np.zeros(grid.n_cells), t=0.0, rho=1.0)
    cfg = SolverConfig(t_end=200.0, dt=None, series_stride=100,
                       sample_times=(200.0,))
    return {"model": model, "rho": 1.0, "result": run(initial, model, cfg)}


@pytest.fixture(scope="module")
def beta_one_run():
    """Linear dissolution with linear nucleation, run long enough for the
    mass-flux balance to settle."""
    model = RateModel(a_coef=1.0, alpha=0.0, b_coef=1.0, beta=1.0,
                      n_coef=1.0, i0=1)
    grid = Grid(x_max=1.0, n_cells=1000)
    initial = SimState(grid=grid, f=np.zeros(grid.n_cells), t=0.0, rho=1.0)
    cfg = SolverConfig(t_end=1000.0, dt=None, series_stride=100,
                       sample_times=(1000.0,))
    return {"model": model, "rho": 1.0, "result": run(initial, model, cfg)}


@pytest.fixture(scope="module")
def sweep_result(outdir):
    # horizon chosen so the mid-time sample (t_end/2) still resolves the
    # systematic convergence of the two profiles; much later the curves
    # have already collapsed and their sup-distance is grid-level noise
    # that bounces non-monotonically around 1e-3
    cfg = config_from_preset("fig1_desk", overrides=["solver.t_end=100"])
    d = str(outdir / "sweep")
    return {"summary": run_sweep(cfg, out_dir=d, figures=False), "dir": d}


def _fit_exponents(series):
    t = series.column("t")
    fit_m0 = fit_power_law(t, series.column("M0"))
    fit_u = fit_power_law(t, series.column("u"))
    return fit_m0.exponent, fit_u.exponent


def test_criterion_01_conjectured_coarsening_exponents(fig1):
    em, eu = conjectured_exponents(fig1["cfg"].model)
    assert em == pytest.approx(3.0 / 5.0)
    assert eu == pytest.approx(-1.0 / 5.0)
    p_m0, p_u = _fit_exponents(fig1["result"].series)
    assert abs(p_m0 - em) <= DESK_TOL
    assert abs(p_u - eu) <= DESK_TOL
    assert fig1["elapsed"] < 300.0


@pytest.mark.skipif(not os.environ.get("LS_PRODUCTION_TIER"),
                    reason="production-resolution tier (set LS_PRODUCTION_TIER=1; "
                           "takes far longer than the desk tier)")
def test_criterion_01_conjectured_coarsening_exponents_production_tier():
    cfg = config_from_preset("fig1")
    initial = SimState(grid=cfg.grid, f=cfg.initial.sample(cfg.grid),
                       t=0.0, rho=cfg.rho)
    result = run(initial, cfg.model, cfg.solver)
    em, eu = conjectured_exponents(cfg.model)
    p_m0, p_u = _fit_exponents(result.series)
    assert abs(p_m0 - em) <= PRODUCTION_TOL
    assert abs(p_u - eu) <= PRODUCTION_TOL


def test_criterion_02_mass_budget_closes_on_every_run(
        fig1, invariant_run, beta_one_run, sweep_result,
        time_refinement, space_refinement):
    for bundle in (fig1, invariant_run, beta_one_run):
        rho = bundle.get("rho", 1.0)
        budget = bundle["result"].series.column("budget")
        assert np.max(np.abs(budget)) <= BUDGET_TOL * rho
    for member in ("run_a", "run_b"):
        ts = TimeSeries.from_csv(
            os.path.join(sweep_result["dir"], member, "timeseries.csv"))
        assert np.max(np.abs(ts.column("budget"))) <= BUDGET_TOL * 1.0
    for row in list(time_refinement) + list(space_refinement):
        assert row["budget_max"] <= BUDGET_TOL * 1.0


def test_criterion_03_count_residual_halves_with_dt(time_refinement):
    residuals = [row["count_residual_max"] for row in time_refinement]
    assert all(r > 0 for r in residuals)
    for coarse, fine in zip(residuals[:-1], residuals[1:]):
        assert coarse / fine >= 2.0 / RESIDUAL_HALVING_SLACK


def test_criterion_04_lyapunov_decreases_with_nonnegative_dissipation(fig1):
    series = fig1["result"].series
    H = series.column("H")
    D = series.column("D")
    assert np.max(np.diff(H)) <= 1e-6 * H[0]
    assert np.min(D) >= -1e-12 * np.max(D)


def test_criterion_05_tracks_reference_and_converges(space_refinement):
    sup = [row["u_sup_err"] for row in space_refinement]
    l1 = [row["l1_final_err"] for row in space_refinement]
    assert sup[0] <= 5e-3
    assert sup[0] > sup[1] > sup[2]
    assert l1[0] > l1[1] > l1[2]


def test_criterion_06_reference_decay_bound_and_closed_form(flat_model):
    grid = Grid(x_max=1.0, n_cells=4000)
    initial = SimState(grid=grid, f=bump_values(grid.centers), t=0.0, rho=1.0)
    quiet = RateModel(a_coef=1.0, alpha=0.0, b_coef=0.5, beta=0.0, n_coef=0.0)
    sol = solve_history(quiet, initial, t_end=1.0, dt=1e-4)
    exact = 0.5 + (sol.u[0] - 0.5) * np.exp(-sol.ma[0] * sol.times)
    assert np.max(np.abs(sol.u - exact) / exact) <= 1e-8
    assert exp_bound_violations(sol, slack=1e-8) == 0
    active = solve_history(flat_model, initial, t_end=20.0, dt=1e-3)
    assert exp_bound_violations(active, slack=1e-8) == 0


def test_criterion_07_product_trapped_in_invariant_band(invariant_run):
    inv = invariant_product(invariant_run["result"].series,
                            invariant_run["model"],
                            rho=invariant_run["rho"], tol=0.05)
    assert inv.bound == pytest.approx(1.0)
    assert inv.within_bound


def test_criterion_08_linear_dissolution_flux_balance(beta_one_run):
    lim = beta_one_limit(beta_one_run["result"].series,
                         beta_one_run["model"], rho=beta_one_run["rho"])
    assert lim.expected == pytest.approx(1.0)
    assert lim.rel_error <= 0.05


def test_criterion_09_initial_datum_is_forgotten(sweep_result):
    s = sweep_result["summary"]
    assert s["cross_distance_final"] < 0.25 * s["ref_sup_norm"]
    assert s["cross_distance_final"] < s["cross_distance_mid"]


def test_criterion_10_coarsening_markers(fig1):
    series = fig1["result"].series
    t = series.column("t")
    m0 = series.column("M0")
    u = series.column("u")
    assert np.all(np.diff(m0) > 0)
    first_positive = m0[m0 > 0][0]
    assert m0[-1] / first_positive > 10.0
    assert np.all(np.diff(u) < 0)
    assert u[-1] < 0.5 * u[0]
    assert mass_concentration(fig1["result"].final_state, eps=0.05) > 0.9
    last_decade = t >= t[-1] / 10.0
    for col in ("M0", "M_0.5"):
        vals = series.column(col)[last_decade]
        assert np.all(np.diff(vals) > 0)
