"""Semi-analytic reference solution for the constant-threshold regime.

When the dissolution threshold is constant (alpha == beta, value phi0),
every aggregate transports along the characteristics of

    dX/ds = (u(s) - phi0) * a(X),

so in the coordinate A(x) (integral of 1/a) all characteristics advance
by the same amount gamma(t) = int_0^t (u - phi0).  The solution is then
determined by the scalar history (u, gamma):

    u'(t)     = -(u - phi0) * Ma(t),
    Ma(t)     = int_0^t nucleation(u(s)) a(X(t; s, 0)) ds
                + int f_in(x) a(X(t; 0, x)) dx,

and the density splits at the critical size x_c(t) = A^{-1}(gamma(t))
into a nucleated branch (sizes below x_c) and a transported branch of
the initial data (sizes above).

The history ODE is integrated with the explicit midpoint rule; the
memory integral in Ma uses trapezoidal quadrature over the step nodes.
This is a reference for validating the finite-volume solver, not a
production path: the memory term costs O(N^2) in general (O(N) when a
is constant, i.e. alpha == 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OracleError
from .kinetics import (RateModel, antiderivative_A, eval_a, eval_nucleation,
                       inverse_A)
from .state import SimState, weighted_cell_sum


class _ThresholdCrossing(Exception):
    """Internal: u dipped to phi0 within a step (dt too large)."""


def _a_of_A_inv(model: RateModel, w):
    """a(A^{-1}(w)) in one power: a_coef * ((1-alpha) a_coef w)**(alpha/(1-alpha))."""
    if model.alpha == 0:
        return np.full_like(np.asarray(w, dtype=float), model.a_coef)
    q = model.alpha / (1.0 - model.alpha)
    return model.a_coef * ((1.0 - model.alpha) * model.a_coef * np.asarray(w)) ** q


@dataclass
class OracleSolution:
    """History arrays of the scalar reduction, plus the initial data."""

    model: RateModel
    rho: float
    initial: SimState
    times: np.ndarray      # uniform, 0 .. t_end
    u: np.ndarray
    gamma: np.ndarray      # strictly increasing, gamma[0] = 0
    ma: np.ndarray         # a-weighted moment along the solution
    dt: float              # step actually used (after any halving)

    @property
    def phi0(self) -> float:
        return self.model.phi0

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def u_at(self, t):
        self._check_t(t)
        return np.interp(t, self.times, self.u)

    def gamma_at(self, t):
        self._check_t(t)
        return np.interp(t, self.times, self.gamma)

    def ma_at(self, t):
        self._check_t(t)
        return np.interp(t, self.times, self.ma)

    def _check_t(self, t):
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.t_end * (1 + 1e-12)):
            raise OracleError(f"time outside tabulated range [0, {self.t_end:g}]")


def solve_history(model: RateModel, initial: SimState, t_end: float,
                  dt: float, max_halvings: int = 4) -> OracleSolution:
    """Integrate the (u, gamma) history for a constant-threshold model.

    Requires alpha == beta, nucleation(phi0) == 0 (use the shifted
    nucleation variant when n_coef > 0), and initial u above phi0.  If a
    step drives u to or below phi0 the integration restarts with dt/2,
    up to ``max_halvings`` times.
    """
    if not model.constant_phi:
        raise OracleError(
            "reference solve applies to the constant-threshold regime only "
            f"(alpha={model.alpha} != beta={model.beta})")
    phi0 = model.phi0
    if model.n_coef > 0 and eval_nucleation(model, phi0) != 0.0:
        raise OracleError(
            "nucleation(phi0) must vanish for the reference solve; "
            "set shifted_nucleation=true for constant-threshold runs")
    if t_end < 0 or not dt > 0:
        raise ConfigError("t_end >= 0 and dt > 0 required")

    grid = initial.grid
    x_in = grid.centers
    f_in = initial.f
    dx = grid.dx
    u0 = initial.rho - weighted_cell_sum(x_in, f_in, dx)
    if not u0 > phi0:
        raise OracleError(f"initial monomer u={u0:g} must exceed phi0={phi0:g}")

    A_in = antiderivative_A(model, x_in)
    const_a = model.alpha == 0
    m0_in = weighted_cell_sum(np.ones_like(f_in), f_in, dx)

    for attempt in range(max_halvings + 1):
        try:
            return _integrate(model, initial, u0, t_end, dt, A_in, f_in, dx,
                              const_a, m0_in)
        except _ThresholdCrossing:
            dt /= 2.0
    raise OracleError(
        f"u reached phi0 numerically even at dt={dt:g}; the step control "
        "cannot resolve this configuration")


def _integrate(model, initial, u0, t_end, dt, A_in, f_in, dx, const_a, m0_in):
    phi0 = model.phi0
    n = max(int(round(t_end / dt)), 1) if t_end > 0 else 0
    dt = t_end / n if n else dt
    times = np.linspace(0.0, t_end, n + 1)
    u = np.empty(n + 1)
    gamma = np.empty(n + 1)
    ma = np.empty(n + 1)
    nuc = np.empty(n + 1)
    u[0], gamma[0] = u0, 0.0
    nuc[0] = eval_nucleation(model, u0)

    def ma_eval(g_now, s_nodes, g_nodes, n_nodes, trapz_nuc):
        if const_a:
            hist = model.a_coef * trapz_nuc
            init = model.a_coef * m0_in
        else:
            w = np.clip(g_now - g_nodes, 0.0, None)
            hist = np.trapezoid(n_nodes * _a_of_A_inv(model, w), s_nodes)
            init = float(np.dot(f_in, _a_of_A_inv(model, A_in + g_now))) * dx
        return hist + init

    run_trapz = 0.0  # running trapezoid of the nucleation rate (const-a path)
    for j in range(n):
        ma[j] = ma_eval(gamma[j], times[:j + 1], gamma[:j + 1], nuc[:j + 1],
                        run_trapz)
        du1 = -(u[j] - phi0) * ma[j]
        u_h = u[j] + 0.5 * dt * du1
        g_h = gamma[j] + 0.5 * dt * (u[j] - phi0)
        if u_h <= phi0:
            raise _ThresholdCrossing
        nuc_h = eval_nucleation(model, u_h)
        if const_a:
            ma_h = ma_eval(g_h, None, None, None,
                           run_trapz + 0.25 * dt * (nuc[j] + nuc_h))
        else:
            s_half = np.append(times[:j + 1], times[j] + 0.5 * dt)
            g_half = np.append(gamma[:j + 1], g_h)
            n_half = np.append(nuc[:j + 1], nuc_h)
            ma_h = ma_eval(g_h, s_half, g_half, n_half, None)
        u[j + 1] = u[j] - dt * (u_h - phi0) * ma_h
        gamma[j + 1] = gamma[j] + dt * (u_h - phi0)
        if u[j + 1] <= phi0:
            raise _ThresholdCrossing
        nuc[j + 1] = eval_nucleation(model, u[j + 1])
        run_trapz += 0.5 * dt * (nuc[j] + nuc[j + 1])
    ma[n] = ma_eval(gamma[n], times, gamma, nuc, run_trapz)

    return OracleSolution(model=model, rho=initial.rho, initial=initial,
                          times=times, u=u, gamma=gamma, ma=ma, dt=dt)


def characteristic_X(sol: OracleSolution, t, x):
    """Size at time t of an aggregate that had size x at time 0."""
    g = sol.gamma_at(t)
    return inverse_A(sol.model, antiderivative_A(sol.model, x) + g)


def sigma_inverse(sol: OracleSolution, t, s):
    """Size at time t of an aggregate nucleated at time s <= t."""
    g_t = np.asarray(sol.gamma_at(t))
    g_s = np.asarray(sol.gamma_at(s))
    if np.any(g_s > g_t * (1 + 1e-12) + 1e-300):
        raise OracleError("nucleation time s must not exceed evaluation time t")
    w = np.clip(g_t - g_s, 0.0, None)
    return inverse_A(sol.model, w)


def x_critical(sol: OracleSolution, t):
    """Size separating nucleated aggregates from transported initial data."""
    return inverse_A(sol.model, sol.gamma_at(t))


def _f_in_at(sol: OracleSolution, xi):
    vals = sol.initial.f
    return np.interp(xi, sol.initial.grid.centers, vals,
                     left=float(vals[0]), right=0.0)


def _density_two_branch(sol: OracleSolution, x, g_ref, u_of_w):
    """Evaluate the transported density for a given advance g_ref.

    ``u_of_w`` maps a gamma-value w in [0, g_ref] to the monomer
    concentration when gamma(s) = w.  Sizes at the critical point are
    assigned to the nucleated (left) branch.
    """
    model = sol.model
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("density evaluation requires x > 0")
    out = np.empty(x.shape)
    xc = inverse_A(model, g_ref)
    A_x = antiderivative_A(model, x)
    left = x <= xc
    if np.any(left):
        w = np.clip(g_ref - A_x[left], 0.0, None)
        u_s = u_of_w(w)
        out[left] = (eval_nucleation(model, u_s)
                     / (eval_a(model, x[left]) * (u_s - model.phi0)))
    right = ~left
    if np.any(right):
        w = np.clip(A_x[right] - g_ref, 0.0, None)
        xi = inverse_A(model, w)
        a_xi = eval_a(model, xi)
        out[right] = _f_in_at(sol, xi) * a_xi / eval_a(model, x[right])
    return out


def density_at(sol: OracleSolution, t, x):
    """Density at time t and sizes x > 0 (vectorized in x).

    Below the critical size x_c(t) the density comes from nucleation:
    f = nucleation(u(s)) / (a(x) (u(s) - phi0)) with s the birth time of
    the characteristic through (t, x); above x_c it is the transported
    initial density f_in(X^{-1}) a(X^{-1}) / a(x).  The jump at x_c is
    genuine and evaluated one-sided (left branch at x_c itself).
    """
    g_t = float(sol.gamma_at(t))
    u_of_w = lambda w: np.interp(w, sol.gamma, sol.u)
    return _density_two_branch(sol, x, g_t, u_of_w)


@dataclass(frozen=True)
class LimitDensity:
    """Extrapolated t -> infinity density and its bookkeeping."""

    x: np.ndarray
    fbar: np.ndarray
    gamma_bar: float       # extrapolated total advance
    xc_bar: float          # limiting critical size
    residual: float        # u(t_end) - phi0, the unconverged tail
    mass: float            # int x fbar dx (trapezoid on the output grid)


def limit_density(sol: OracleSolution, x_out=None) -> LimitDensity:
    """Two-branch limiting density with the tail advance extrapolated.

    Beyond the computed horizon the decay is asymptotically exponential
    with rate Ma(t_end), so the remaining advance is estimated as
    (u(t_end) - phi0) / Ma(t_end).  Birth times past the horizon use the
    same frozen-rate model for u as a function of the advance.  The
    output abscissa gets a sample on each side of the jump at xc_bar.
    """
    model = sol.model
    phi0 = model.phi0
    u_T = float(sol.u[-1])
    ma_T = float(sol.ma[-1])
    g_T = float(sol.gamma[-1])
    residual = u_T - phi0
    if ma_T <= 0:
        raise OracleError(
            "a-weighted moment vanishes at the horizon; u does not converge "
            "and no limiting density exists for this configuration")
    g_bar = g_T + residual / ma_T
    xc_bar = float(inverse_A(model, g_bar))

    if x_out is None:
        grid = sol.initial.grid
        x_hi = float(inverse_A(model, antiderivative_A(model, grid.x_max) + g_bar))
        n = int(math.ceil(x_hi / grid.dx))
        x_out = (np.arange(n) + 0.5) * grid.dx
    x_out = np.asarray(x_out, dtype=float)
    for side in (1.0 - 1e-9, 1.0 + 1e-9):
        pt = xc_bar * side
        if 0 < pt <= x_out.max() and pt not in x_out:
            x_out = np.insert(x_out, np.searchsorted(x_out, pt), pt)

    def u_of_w(w):
        w = np.asarray(w, dtype=float)
        out = np.interp(w, sol.gamma, sol.u)
        tail = w > g_T
        if np.any(tail):
            out = np.where(tail, phi0 + ma_T * (g_bar - w), out)
        return out

    fbar = _density_two_branch(sol, x_out, g_bar, u_of_w)
    mass = float(np.trapezoid(x_out * fbar, x_out))
    return LimitDensity(x=x_out, fbar=fbar, gamma_bar=g_bar, xc_bar=xc_bar,
                        residual=residual, mass=mass)


def mild_moment(sol: OracleSolution, t, weight, n_sub: int = 8) -> float:
    """Weak-form moment int weight(x) f(t, x) dx via the mild formulation.

    Evaluates the right-hand side

        int_0^t nucleation(u(s)) weight(X(t; s, 0)) ds
        + int f_in(x) weight(X(t; 0, x)) dx

    with the history subsampled ``n_sub`` times per step (linear
    interpolation, consistent with the tabulated representation).
    """
    model = sol.model
    g_t = float(sol.gamma_at(t))
    j = int(np.searchsorted(sol.times, t))
    s_fine = np.linspace(0.0, float(t), n_sub * max(j, 1) + 1)
    u_f = np.interp(s_fine, sol.times, sol.u)
    g_f = np.interp(s_fine, sol.times, sol.gamma)
    xs = inverse_A(model, np.clip(g_t - g_f, 0.0, None))
    hist = float(np.trapezoid(eval_nucleation(model, u_f) * weight(xs), s_fine))
    grid = sol.initial.grid
    x_new = inverse_A(model, antiderivative_A(model, grid.centers) + g_t)
    init = weighted_cell_sum(weight(x_new), sol.initial.f, grid.dx)
    return hist + init


@dataclass(frozen=True)
class CompareReport:
    """Discrepancies between a finite-volume run and the reference solve."""

    sup_u_error: float
    final_l1_error: float
    final_time: float
    exp_bound_violations: int
    u_fv_strictly_decreasing: bool
    oracle_dt: float

    def to_dict(self) -> dict:
        return {
            "sup_u_error": self.sup_u_error,
            "final_l1_error": self.final_l1_error,
            "final_time": self.final_time,
            "exp_bound_violations": self.exp_bound_violations,
            "u_fv_strictly_decreasing": self.u_fv_strictly_decreasing,
            "oracle_dt": self.oracle_dt,
        }


def exp_bound_violations(sol: OracleSolution, slack: float = 1e-8) -> int:
    """Count history samples violating u - phi0 <= (u0 - phi0) e^{-Ma(0) t}.

    The bound holds when a is non-decreasing (always true for the
    power-law family); ``slack`` is a relative allowance for the time
    discretization error of the integrator.
    """
    rhs = (sol.u[0] - sol.phi0) * np.exp(-sol.ma[0] * sol.times) * (1.0 + slack)
    return int(np.count_nonzero(sol.u - sol.phi0 > rhs))


def compare_with_fv(sol: OracleSolution, series, snapshots,
                    model: RateModel, rho: float) -> CompareReport:
    """Validate a finite-volume run against the reference histories.

    ``series``/``snapshots`` come from the solver run; the model, total
    concentration, and initial data must match the ones the reference
    was built with, and the reference horizon must cover the run.
    """
    if model != sol.model:
        raise ConfigError("reference and run use different rate models")
    if rho != sol.rho:
        raise ConfigError(f"rho mismatch: run {rho} vs reference {sol.rho}")
    init = snapshots[0]
    if (init.grid != sol.initial.grid
            or not np.array_equal(init.f, sol.initial.f)):
        raise ConfigError("reference and run start from different initial data")
    t_fv = series.t
    if t_fv[-1] > sol.t_end * (1 + 1e-12):
        raise ConfigError(
            f"reference horizon {sol.t_end:g} shorter than run end {t_fv[-1]:g}")

    u_ref = np.interp(t_fv, sol.times, sol.u)
    sup_u = float(np.max(np.abs(series.column("u") - u_ref)))

    final = snapshots[-1]
    f_ref = density_at(sol, final.t, final.grid.centers)
    l1 = float(np.sum(np.abs(final.f - f_ref)) * final.grid.dx)

    du = np.diff(series.column("u"))
    return CompareReport(
        sup_u_error=sup_u,
        final_l1_error=l1,
        final_time=float(final.t),
        exp_bound_violations=exp_bound_violations(sol),
        u_fv_strictly_decreasing=bool(np.all(du < 0)),
        oracle_dt=sol.dt,
    )
