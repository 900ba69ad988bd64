"""Late-time scaling analysis of sampled trajectories.

For growing-threshold models the expected long-time behaviour is a pure
power law in the count and the monomer concentration,

    M0(t) ~ t**(1/(1 + i0*(beta - alpha))),
    u(t)  ~ t**(-(beta - alpha)/(1 + i0*(beta - alpha))),

(the exponents; prefactors are reported, not asserted).  For beta = 1
the product u * M_alpha converges to b_coef * rho / a_coef, and for
alpha = 0 the combination u * M0**beta is eventually trapped in
[0, rho**beta * b_coef / a_coef].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import TimeSeries
from .errors import ConstantPhiError, FitError, NotApplicableError
from .kinetics import RateModel


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares line through (log t, log y).

    ``exponent`` is the slope; ``log_prefactor`` the intercept in natural
    log, i.e. y ~ exp(log_prefactor) * t**exponent.
    """

    exponent: float
    log_prefactor: float
    t_lo: float
    t_hi: float
    n_points: int
    rms_residual: float


def conjectured_exponents(model: RateModel) -> tuple[float, float]:
    """(count exponent, monomer exponent) expected at late times.

    Requires a strictly increasing threshold and active nucleation.
    """
    if model.constant_phi:
        raise ConstantPhiError(
            "no power-law scaling in the constant-threshold regime "
            "(count saturates, u converges exponentially)")
    if model.n_coef <= 0:
        raise NotApplicableError("scaling requires active nucleation (n_coef > 0)")
    d = model.beta - model.alpha
    denom = 1.0 + model.i0 * d
    return 1.0 / denom, -d / denom


def fit_power_law(t, y, window: tuple[float, float] | None = None) -> PowerLawFit:
    """Fit y ~ C * t**p on a time window (default: the last decade).

    Only samples with t > 0 and y > 0 enter the fit; fewer than 10 such
    samples raise :class:`FitError`.  The exponent is invariant under
    rescaling y.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitError("t and y must be 1-d arrays of equal length")
    if window is None:
        pos = t > 0
        if not np.any(pos):
            raise FitError("no positive times to fit")
        t_hi = float(t[pos].max())
        window = (t_hi / 10.0, t_hi)
    t_lo, t_hi = float(window[0]), float(window[1])
    if not 0 < t_lo < t_hi:
        raise FitError(f"bad fit window [{t_lo}, {t_hi}]")
    keep = (t >= t_lo) & (t <= t_hi) & (y > 0)
    n = int(np.count_nonzero(keep))
    if n < 10:
        raise FitError(f"only {n} usable samples in window [{t_lo:g}, {t_hi:g}]; "
                       "need at least 10")
    lt = np.log(t[keep])
    ly = np.log(y[keep])
    slope, intercept = np.polyfit(lt, ly, 1)
    resid = ly - (slope * lt + intercept)
    return PowerLawFit(exponent=float(slope), log_prefactor=float(intercept),
                       t_lo=t_lo, t_hi=t_hi, n_points=n,
                       rms_residual=float(np.sqrt(np.mean(resid ** 2))))


@dataclass(frozen=True)
class InvariantProduct:
    """The series u * M0**(beta - alpha) and, when applicable, its bound."""

    t: np.ndarray
    values: np.ndarray
    bound: float | None            # rho**beta * b_coef/a_coef, alpha = 0 only
    within_bound: bool | None      # stays in [0, bound + tol] on final half

    def final_value(self) -> float:
        return float(self.values[-1])


def invariant_product(series: TimeSeries, model: RateModel,
                      rho: float | None = None, tol: float = 0.05) -> InvariantProduct:
    """Compute u * M0**(beta - alpha) along a sampled run.

    For alpha = 0 (and rho given) the product is additionally checked
    against the band [0, rho**beta * b_coef/a_coef + tol] over the final
    half of the run, where it is expected to be trapped.
    """
    t = series.t
    u = series.column("u")
    m0 = series.column("M0")
    values = u * m0 ** (model.beta - model.alpha)
    bound = None
    within = None
    if model.alpha == 0 and rho is not None:
        bound = rho ** model.beta * model.b_coef / model.a_coef
        half = t >= t[-1] / 2.0
        vals = values[half]
        within = bool(vals.size and np.all((vals >= 0) & (vals <= bound + tol)))
    return InvariantProduct(t=t, values=values, bound=bound, within_bound=within)


@dataclass(frozen=True)
class BetaOneLimit:
    t: np.ndarray
    values: np.ndarray             # u * M_alpha
    window: tuple[float, float]
    mean: float
    expected: float                # b_coef * rho / a_coef
    rel_error: float


def beta_one_limit(series: TimeSeries, model: RateModel, rho: float,
                   window: tuple[float, float] | None = None) -> BetaOneLimit:
    """Late-window mean of u * M_alpha against its limit b_coef*rho/a_coef.

    Applies to beta = 1 models.  M_alpha is read from the series (column
    M0/M1 for integer alpha, else the recorded fractional moment).  The
    default window is the last decade of the run.
    """
    if model.beta != 1:
        raise NotApplicableError(f"limit law requires beta = 1, got beta={model.beta}")
    t = series.t
    values = series.column("u") * series.moment_column(model.alpha)
    if window is None:
        window = (t[-1] / 10.0, t[-1])
    lo, hi = window
    keep = (t >= lo) & (t <= hi)
    if not np.any(keep):
        raise FitError(f"no samples in window [{lo:g}, {hi:g}]")
    mean = float(np.mean(values[keep]))
    expected = model.b_coef * rho / model.a_coef
    return BetaOneLimit(t=t, values=values, window=(float(lo), float(hi)),
                        mean=mean, expected=expected,
                        rel_error=abs(mean - expected) / abs(expected))
