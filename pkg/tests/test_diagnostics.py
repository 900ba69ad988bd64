import io

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from lsnuc import (
    ConstantPhiError,
    Grid,
    LyapunovChoice,
    NotApplicableError,
    RateModel,
    SimState,
    TimeSeries,
    dissipation_D,
    lyapunov_H,
    moment,
    monomer,
    normalized_profile,
    tail_distribution,
)
from lsnuc.diagnostics import capital_K, moment_column_name, weight_of_x

from conftest import bump_values


def test_capital_K_phi_primitive_is_regime_free(growth_model, flat_model):
    for model in (growth_model, flat_model):
        v = np.linspace(0.0, 2.0, 7)
        assert_allclose(capital_K(model, LyapunovChoice.phi_primitive(), v),
                        0.5 * v ** 2)


def test_capital_K_quadratic_matches_quadrature(growth_model):
    from lsnuc import eval_phi_inverse
    for v in (0.3, 0.8, 1.5):
        quad, _ = integrate.quad(
            lambda z: eval_phi_inverse(growth_model, z), 0.0, v)
        assert capital_K(growth_model, LyapunovChoice.quadratic(), v) \
            == pytest.approx(quad, rel=1e-8)


def test_capital_K_power_weight_closed_form(growth_model):
    # eta = 3 with this model: K(0.8) computed by direct quadrature
    choice = LyapunovChoice.power(3.0)
    assert capital_K(growth_model, choice, 0.8) \
        == pytest.approx(0.0898779428571429, rel=1e-12)
    with pytest.raises(ConstantPhiError):
        capital_K(RateModel(alpha=0.5, beta=0.5), choice, 1.0)


def test_weight_of_x_choices(growth_model):
    x = np.array([0.0, 1.0, 4.0])
    assert_allclose(weight_of_x(growth_model, LyapunovChoice.quadratic(), x),
                    [0.0, 0.5, 8.0])
    assert_allclose(weight_of_x(growth_model, LyapunovChoice.power(1.0), x),
                    x)
    # primitive of phi: (b/a) x^{4/3} / (4/3) for these exponents
    prim = weight_of_x(growth_model, LyapunovChoice.phi_primitive(), x)
    assert_allclose(prim, x ** (4.0 / 3.0) * 0.75, rtol=1e-12)


def test_lyapunov_value_against_direct_sum(growth_model, bump_state):
    from lsnuc import antiderivative_Psi
    u = monomer(bump_state)
    h = lyapunov_H(bump_state, growth_model, LyapunovChoice.quadratic())
    direct = 0.5 * moment(bump_state, 2) + antiderivative_Psi(growth_model, u)
    assert h == pytest.approx(direct, rel=1e-12)


def test_lyapunov_needs_increasing_threshold(flat_model, bump_state):
    with pytest.raises(ConstantPhiError):
        lyapunov_H(bump_state, flat_model, LyapunovChoice.phi_primitive())


def test_dissipation_nonnegative_for_mixed_sign_gap(growth_model):
    # support straddles the critical size so u - phi changes sign
    grid = Grid(x_max=2.0, n_cells=2000)
    f = bump_values(grid.centers) + bump_values(grid.centers, c=1.0,
                                                r1=1.4, r2=1.8)
    state = SimState(grid=grid, f=f, t=0.0, rho=1.0)
    u = monomer(state)
    from lsnuc import eval_phi
    gap = u - eval_phi(growth_model, grid.centers)
    assert gap.max() > 0 and gap.min() < 0
    for choice in (LyapunovChoice.quadratic(), LyapunovChoice.phi_primitive(),
                   LyapunovChoice.power(2.5)):
        assert dissipation_D(state, growth_model, choice) >= 0.0


def test_dissipation_constant_threshold_uses_phi_primitive(flat_model,
                                                           bump_state):
    d = dissipation_D(bump_state, flat_model, LyapunovChoice.phi_primitive())
    u = monomer(bump_state)
    expected = (u - 0.5) ** 2 * moment(bump_state, 0)  # a = 1, phi = 0.5
    assert d == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ConstantPhiError):
        dissipation_D(bump_state, flat_model, LyapunovChoice.quadratic())


def test_tail_distribution_partial_sums():
    grid = Grid(x_max=1.0, n_cells=4)
    f = np.array([4.0, 3.0, 2.0, 1.0])
    state = SimState(grid=grid, f=f, t=0.0, rho=2.0)
    F = tail_distribution(state)
    assert_allclose(F, [2.5, 1.5, 0.75, 0.25, 0.0])
    assert F[0] == pytest.approx(moment(state, 0))
    assert np.all(np.diff(F) <= 0)


def test_normalized_profile_against_hand_interpolation():
    grid = Grid(x_max=1.0, n_cells=10)
    f = np.full(10, 2.0)           # F(x) = 2 (1 - x), M0 = 2
    state = SimState(grid=grid, f=f, t=0.0, rho=5.0)
    out = np.array([0.0, 1.5, 3.0, 9.0])
    prof = normalized_profile(state, out, scaling="divide")
    # divide: y -> F(y/3)/3, linear here, zero once y/3 > 1
    assert_allclose(prof, [2.0 / 3.0, 2.0 * (1 - 0.5) / 3.0, 0.0, 0.0],
                    rtol=1e-12)
    prof_m = normalized_profile(state, np.array([0.1]), scaling="multiply")
    assert prof_m[0] == pytest.approx(2.0 * (1 - 0.3) / 3.0)
    with pytest.raises(ValueError):
        normalized_profile(state, out, scaling="sideways")


def test_moment_column_names():
    assert moment_column_name(0) == "M0"
    assert moment_column_name(1) == "M1"
    assert moment_column_name(2) == "M2"
    assert moment_column_name(0.5) == "M_0.5"
    # float noise collapses to one canonical name
    k = 1.0 / 3.0
    assert moment_column_name(k) == moment_column_name(1.0 + k - 1.0)


def test_timeseries_schema_and_roundtrip(tmp_path):
    ts = TimeSeries(["t", "u", "M0"])
    ts.append({"t": 0.0, "u": 1.0, "M0": 0.0})
    ts.append({"t": 0.1, "u": 0.9123456789012345, "M0": 1e-7})
    with pytest.raises(ValueError):
        ts.append({"t": 0.2, "u": 0.8})
    with pytest.raises(ValueError):
        ts.append({"t": 0.2, "u": 0.8, "M0": 0.0, "extra": 1.0})
    with pytest.raises(KeyError):
        ts.column("nope")
    assert len(ts) == 2

    path = tmp_path / "series.csv"
    ts.to_csv(path)
    back = TimeSeries.from_csv(path)
    assert back.columns == ts.columns
    assert_allclose(back.column("u"), ts.column("u"), rtol=0, atol=0)
    assert_allclose(back.column("M0"), ts.column("M0"), rtol=0, atol=0)


def test_timeseries_puts_t_first_and_rejects_duplicates():
    ts = TimeSeries(["u", "t", "M0"])
    assert ts.columns[0] == "t"
    with pytest.raises(ValueError):
        TimeSeries(["t", "u", "u"])


def test_moment_balance_residual_manufactured():
    from lsnuc.diagnostics import moment_balance_residual
    model = RateModel(a_coef=1.0, alpha=0.0, b_coef=1.0, beta=1.0,
                      n_coef=1.0, i0=1)
    t = np.linspace(0.0, 1.0, 1001)
    # u = 1, M0 = t satisfies the count law exactly; M1 solves
    # M1' = u*M0 - M1 with M1(0) = 0
    ts = TimeSeries(["t", "u", "M0", "M1"])
    for tv, m1 in zip(t, t - 1.0 + np.exp(-t)):
        ts.append({"t": tv, "u": 1.0, "M0": tv, "M1": m1})
    _, res0, _ = moment_balance_residual(ts, model, 0)
    assert np.max(np.abs(res0)) < 1e-12
    _, res1, rel1 = moment_balance_residual(ts, model, 1)
    assert np.max(np.abs(res1[1:-1])) < 1e-5
    # relative form is meaningful once the balance is away from zero
    assert np.max(np.abs(rel1[10:-1])) < 1e-4


def test_moment_balance_residual_guards():
    from lsnuc.diagnostics import moment_balance_residual
    model = RateModel(a_coef=1.0, alpha=1.0 / 3.0, b_coef=1.0, beta=2.0 / 3.0,
                      n_coef=1.0, i0=2)
    short = TimeSeries(["t", "u", "M0"])
    short.append({"t": 0.0, "u": 1.0, "M0": 0.0})
    short.append({"t": 0.1, "u": 0.9, "M0": 0.1})
    with pytest.raises(NotApplicableError):
        moment_balance_residual(short, model, 0)
    ts = TimeSeries(["t", "u", "M0", "M1"])
    for tv in (0.0, 0.1, 0.2):
        ts.append({"t": tv, "u": 1.0, "M0": tv, "M1": 0.0})
    # first moment law needs the fractional columns for these exponents
    with pytest.raises(KeyError):
        moment_balance_residual(ts, model, 1)
    with pytest.raises(ValueError):
        moment_balance_residual(ts, model, -1)
