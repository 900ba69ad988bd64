"""Power-law rate family for aggregate growth, dissolution and nucleation.

An aggregate of size ``x`` gains monomers at rate ``a(x) * u`` (``u`` is
the free-monomer concentration) and loses them at rate ``b(x)``, with

    a(x) = a_coef * x**alpha,      b(x) = b_coef * x**beta,

so the net transport speed is ``a(x)*u - b(x)``.  The dissolution
threshold ``phi(x) = b(x)/a(x)`` separates growth (``u > phi(x)``) from
shrinkage.  Fresh aggregates of vanishing size are injected at rate
``nucleation(u) = n_coef * u**i0`` (optionally shifted by the threshold
limit ``phi0``, see :func:`eval_nucleation`).

Closed forms used elsewhere:

* ``antiderivative_A`` integrates ``1/a`` from 0, giving the natural
  coordinate in which size transport at unit excess concentration has
  unit speed; requires ``alpha < 1``.
* ``antiderivative_Psi`` integrates the inverse threshold,
  ``Psi(v) = int_0^v phi^{-1}(z) dz``; requires ``alpha < beta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantPhiError, HypothesisError


@dataclass(frozen=True)
class RateModel:
    """Power-law kinetic coefficients.

    Parameters
    ----------
    a_coef, alpha : float
        Growth-rate prefactor (> 0) and exponent.
    b_coef, beta : float
        Dissolution-rate prefactor (> 0) and exponent.  The ordering
        ``alpha <= beta`` is required so the threshold ``b/a`` is
        non-decreasing.
    n_coef : float
        Nucleation prefactor (>= 0; zero disables nucleation).
    i0 : int
        Nucleation order (>= 1), the number of monomers in a fresh
        aggregate for mass-action nucleation.
    shifted_nucleation : bool
        When True the nucleation law is ``n_coef * max(u - phi0, 0)**i0``.
        Only meaningful when ``phi0 > 0`` (constant-threshold regime);
        for ``alpha < beta`` it coincides with the unshifted law.

    Exponents outside ``[0, 1]`` are accepted so hypothesis-violating
    regimes can be explored; :func:`validate_hypotheses` reports which
    assumptions hold.  Closed forms raise when evaluated outside their
    validity range.
    """

    a_coef: float = 1.0
    alpha: float = 0.0
    b_coef: float = 1.0
    beta: float = 0.0
    n_coef: float = 0.0
    i0: int = 1
    shifted_nucleation: bool = False

    def __post_init__(self):
        if not self.a_coef > 0:
            raise ValueError(f"a_coef must be > 0, got {self.a_coef}")
        if not self.b_coef > 0:
            raise ValueError(f"b_coef must be > 0, got {self.b_coef}")
        if self.n_coef < 0:
            raise ValueError(f"n_coef must be >= 0, got {self.n_coef}")
        if float(self.i0) != int(self.i0) or int(self.i0) < 1:
            raise ValueError(f"i0 must be an integer >= 1, got {self.i0}")
        object.__setattr__(self, "i0", int(self.i0))
        if self.alpha > self.beta:
            raise ValueError(
                f"alpha <= beta required (got alpha={self.alpha}, beta={self.beta})")

    @property
    def phi0(self) -> float:
        """Small-size limit of the dissolution threshold b(x)/a(x)."""
        if self.alpha < self.beta:
            return 0.0
        return self.b_coef / self.a_coef

    @property
    def constant_phi(self) -> bool:
        """True when the threshold is constant in size (alpha == beta)."""
        return self.alpha == self.beta


def _eval_power(coef, expo, x, name):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError(f"{name} requires x >= 0")
    out = coef * x ** expo
    return float(out) if out.ndim == 0 else out


def eval_a(model: RateModel, x):
    """Growth-rate factor a(x) = a_coef * x**alpha for x >= 0."""
    return _eval_power(model.a_coef, model.alpha, x, "eval_a")


def eval_b(model: RateModel, x):
    """Dissolution rate b(x) = b_coef * x**beta for x >= 0."""
    return _eval_power(model.b_coef, model.beta, x, "eval_b")


def eval_phi(model: RateModel, x):
    """Dissolution threshold phi(x) = (b_coef/a_coef) * x**(beta-alpha).

    Defined at x = 0 by continuity (equals ``model.phi0``).
    """
    return _eval_power(model.b_coef / model.a_coef,
                       model.beta - model.alpha, x, "eval_phi")


def eval_phi_inverse(model: RateModel, y):
    """Inverse of the threshold: the size at which phi equals y.

    Requires a strictly increasing threshold (alpha < beta) and y >= 0.
    """
    if model.constant_phi:
        raise ConstantPhiError(
            "threshold is constant (alpha == beta); it has no inverse -- "
            "use the characteristics/transport path for this regime")
    return _eval_power((model.a_coef / model.b_coef) ** (1.0 / (model.beta - model.alpha)),
                       1.0 / (model.beta - model.alpha), y, "eval_phi_inverse")


def eval_nucleation(model: RateModel, u):
    """Nucleation inflow at vanishing size for monomer concentration u >= 0.

    Returns ``n_coef * u**i0``, or ``n_coef * max(u - phi0, 0)**i0`` when
    the model requests the shifted variant.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("eval_nucleation requires u >= 0")
    base = np.maximum(u - model.phi0, 0.0) if model.shifted_nucleation else u
    out = model.n_coef * base ** model.i0
    return float(out) if out.ndim == 0 else out


def antiderivative_A(model: RateModel, x):
    """Integral of 1/a from 0 to x: x**(1-alpha) / (a_coef*(1-alpha)).

    Diverges at the origin for alpha >= 1, in which case a
    :class:`HypothesisError` is raised.
    """
    if model.alpha >= 1:
        raise HypothesisError(
            f"antiderivative_A requires alpha < 1 (got alpha={model.alpha})")
    return _eval_power(1.0 / (model.a_coef * (1.0 - model.alpha)),
                       1.0 - model.alpha, x, "antiderivative_A")


def inverse_A(model: RateModel, v):
    """Inverse of :func:`antiderivative_A` for v >= 0."""
    if model.alpha >= 1:
        raise HypothesisError(
            f"inverse_A requires alpha < 1 (got alpha={model.alpha})")
    return _eval_power((model.a_coef * (1.0 - model.alpha)) ** (1.0 / (1.0 - model.alpha)),
                       1.0 / (1.0 - model.alpha), v, "inverse_A")


def antiderivative_Psi(model: RateModel, v):
    """Integral of the inverse threshold from 0 to v.

    For the power-law family, with p = 1/(beta - alpha):

        Psi(v) = (a_coef/b_coef)**p * v**(p+1) / (p+1)

    Requires alpha < beta and v >= 0.
    """
    if model.constant_phi:
        raise ConstantPhiError(
            "antiderivative_Psi undefined for constant threshold (alpha == beta)")
    p = 1.0 / (model.beta - model.alpha)
    return _eval_power((model.a_coef / model.b_coef) ** p / (p + 1.0),
                       p + 1.0, v, "antiderivative_Psi")


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool | None  # None: not applicable / informational
    detail: str


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of the structural assumptions behind the analysis.

    Validation is advisory: a failing check does not block construction or
    simulation, it flags that the long-time statements relying on it are
    not guaranteed.
    """

    model: RateModel
    checks: tuple[HypothesisCheck, ...] = field(default_factory=tuple)

    @property
    def all_passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    @property
    def constant_phi(self) -> bool:
        return self.model.constant_phi

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = {True: "pass", False: "FAIL", None: "info"}[c.passed]
            lines.append(f"[{status:4s}] {c.name}: {c.detail}")
        return "\n".join(lines)


def validate_hypotheses(model: RateModel) -> HypothesisReport:
    """Check the structural assumptions for the power-law rate family.

    Never raises; returns a report with one entry per assumption:

    * positive growth coefficient,
    * strictly increasing threshold (alpha < beta); equality is reported
      as the constant-threshold regime, not a failure,
    * sublinear rates (alpha, beta <= 1, giving a(x)+b(x) <= C(1+x)),
    * integrable inverse growth rate near 0 (alpha < 1),
    * threshold-weighted dissolution bounded below by min(1, x^2)/C
      (holds iff 2*beta - alpha <= 2),
    * active nucleation (n_coef > 0, integer order i0 >= 1).
    """
    a, b = model.alpha, model.beta
    checks = []

    checks.append(HypothesisCheck(
        "positive_growth", model.a_coef > 0,
        f"a_coef = {model.a_coef:g}"))

    if a < b:
        checks.append(HypothesisCheck(
            "increasing_threshold", True,
            f"alpha = {a:g} < beta = {b:g}"))
    else:
        checks.append(HypothesisCheck(
            "increasing_threshold", None,
            f"alpha == beta = {b:g}: constant-threshold regime "
            f"(phi identically {model.phi0:g}); use the characteristics "
            "reference path"))

    ok2 = (0 <= a <= 1) and (0 <= b <= 1)
    bound_c = model.a_coef + model.b_coef
    checks.append(HypothesisCheck(
        "sublinear_rates", ok2,
        f"alpha, beta in [0, 1]: a(x)+b(x) <= {bound_c:g}*(1+x)" if ok2
        else f"exponents alpha={a:g}, beta={b:g} outside [0, 1]"))

    checks.append(HypothesisCheck(
        "integrable_inverse_growth", a < 1,
        f"alpha = {a:g} {'<' if a < 1 else '>='} 1"))

    ok4 = 2 * b - a <= 2
    checks.append(HypothesisCheck(
        "threshold_dissolution_bound", ok4,
        f"b(x)*phi(x) ~ x**{2 * b - a:g} vs min(1, x^2): "
        f"{'bounded below' if ok4 else 'decays too fast at infinity'}"))

    ok5 = model.n_coef > 0 and model.i0 >= 1
    checks.append(HypothesisCheck(
        "nucleation_active", ok5,
        f"n_coef = {model.n_coef:g}, i0 = {model.i0}"))

    return HypothesisReport(model=model, checks=tuple(checks))
