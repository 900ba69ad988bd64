"""Diagnostics: Lyapunov functionals, dissipation, tails, scaling profiles.

For a convex weight k(x) the functional

    H(t) = int k(x) f(t,x) dx + K(u(t)),       K(v) = int_0^v k'(phi^{-1}(z)) dz

is non-increasing along solutions, with instantaneous dissipation

    D(t) = int (K'(u) - K'(phi(x))) (u - phi(x)) a(x) f(t,x) dx >= 0.

Three weight choices are supported:

* ``quadratic``      k(x) = x^2/2, so K = Psi (integral of the inverse
  threshold) and K'(v) = phi^{-1}(v);
* ``phi_primitive``  k(x) = int_0^x phi, so K(v) = v^2/2 and the
  dissipation is int (u - phi)^2 a f dx (valid in every regime);
* ``power``          k(x) = x^eta with eta >= 1.

H and the quadratic/power K require a strictly increasing threshold
(alpha < beta); the phi_primitive dissipation does not.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConstantPhiError, NotApplicableError
from .kinetics import (RateModel, antiderivative_Psi, eval_a, eval_nucleation,
                       eval_phi, eval_phi_inverse)
from .state import SimState, monomer, weighted_cell_sum


@dataclass(frozen=True)
class LyapunovChoice:
    """Weight selector: kind in {'quadratic', 'phi_primitive', 'power'}."""

    kind: str
    eta: float = 2.0  # power kind only

    def __post_init__(self):
        if self.kind not in ("quadratic", "phi_primitive", "power"):
            raise ValueError(f"unknown Lyapunov weight kind {self.kind!r}")
        if self.kind == "power" and self.eta < 1:
            raise ValueError(f"power weight requires eta >= 1, got {self.eta}")

    @classmethod
    def quadratic(cls):
        return cls("quadratic")

    @classmethod
    def phi_primitive(cls):
        return cls("phi_primitive")

    @classmethod
    def power(cls, eta: float):
        return cls("power", eta=eta)


def weight_of_x(model: RateModel, choice: LyapunovChoice, x):
    """The weight k(x) itself (vectorized)."""
    x = np.asarray(x, dtype=float)
    if choice.kind == "quadratic":
        out = 0.5 * x ** 2
    elif choice.kind == "power":
        out = x ** choice.eta
    else:  # primitive of the threshold: (b/a) x^{beta-alpha+1} / (beta-alpha+1)
        q = model.beta - model.alpha + 1.0
        out = (model.b_coef / model.a_coef) * x ** q / q
    return float(out) if out.ndim == 0 else out


def capital_K(model: RateModel, choice: LyapunovChoice, v):
    """Monomer-side companion K(v) = int_0^v k'(phi^{-1}(z)) dz.

    Closed forms for the power-law family; requires alpha < beta except
    for the phi_primitive weight, whose K(v) = v^2/2 is regime-free.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("capital_K requires v >= 0")
    if choice.kind == "phi_primitive":
        out = 0.5 * v ** 2
        return float(out) if out.ndim == 0 else out
    if model.constant_phi:
        raise ConstantPhiError(
            "capital_K needs an invertible threshold (alpha < beta) "
            f"for the {choice.kind!r} weight")
    if choice.kind == "quadratic":
        return antiderivative_Psi(model, v)
    # power: k'(x) = eta x^{eta-1}, k'(phi^{-1}(z)) = eta (a z / b)^{p (eta-1)}
    p = 1.0 / (model.beta - model.alpha)
    q = p * (choice.eta - 1.0)
    out = choice.eta * (model.a_coef / model.b_coef) ** q * v ** (q + 1.0) / (q + 1.0)
    return float(out) if out.ndim == 0 else out


def _capital_K_prime(model: RateModel, choice: LyapunovChoice, v: float):
    if choice.kind == "phi_primitive":
        return v
    if choice.kind == "quadratic":
        return eval_phi_inverse(model, v)
    return choice.eta * eval_phi_inverse(model, v) ** (choice.eta - 1.0)


def lyapunov_H(state: SimState, model: RateModel, choice: LyapunovChoice,
               u: float | None = None) -> float:
    """H = int k(x) f dx + K(u).  Requires alpha < beta."""
    if model.constant_phi:
        raise ConstantPhiError("lyapunov_H requires a strictly increasing threshold")
    if u is None:
        u = monomer(state)
    kx = weight_of_x(model, choice, state.grid.centers)
    return weighted_cell_sum(kx, state.f, state.grid.dx) + capital_K(model, choice, u)


def dissipation_D(state: SimState, model: RateModel, choice: LyapunovChoice,
                  u: float | None = None) -> float:
    """Instantaneous dissipation of H; non-negative up to roundoff.

    The integrand uses K'(phi(x_i)) = k'(x_i) exactly (no inverse
    round-trip).  The phi_primitive weight gives int (u-phi)^2 a f dx and
    is valid in the constant-threshold regime as well.
    """
    if u is None:
        u = monomer(state)
    x = state.grid.centers
    ax = eval_a(model, x)
    gap = u - eval_phi(model, x)
    if choice.kind == "phi_primitive":
        integrand = gap * gap * ax
    else:
        if model.constant_phi:
            raise ConstantPhiError(
                f"dissipation with {choice.kind!r} weight requires alpha < beta; "
                "use the phi_primitive weight in the constant-threshold regime")
        if choice.kind == "quadratic":
            kprime_at_x = x
        else:
            kprime_at_x = choice.eta * x ** (choice.eta - 1.0)
        integrand = (_capital_K_prime(model, choice, u) - kprime_at_x) * gap * ax
    return weighted_cell_sum(integrand, state.f, state.grid.dx)


def tail_distribution(state: SimState) -> np.ndarray:
    """F(x_face) = number of aggregates of size >= x_face, on cell faces.

    Exact partial sums of the cell averages from the right; F[0] equals
    the count moment and F[-1] = 0.
    """
    dx = state.grid.dx
    F = np.zeros(state.grid.n_cells + 1)
    F[:-1] = np.cumsum(state.f[::-1])[::-1] * dx
    return F


def normalized_profile(state: SimState, out_x: np.ndarray,
                       scaling: str = "divide") -> np.ndarray:
    """Self-similar rescaling of the tail distribution on a fixed abscissa.

    With m = count moment, the curve is

        divide (default):   y -> F(y / (1 + m)) / (1 + m)
        multiply:           y -> F(y * (1 + m)) / (1 + m)

    evaluated by linear interpolation of the face values of F (zero
    beyond x_max).  'divide' matches size scales shrinking like 1/m, so
    late-time curves from different initial data collapse; 'multiply' is
    kept as a config-selectable alternative reading of the rescaling.
    """
    if scaling not in ("divide", "multiply"):
        raise ValueError(f"unknown profile scaling {scaling!r}")
    out_x = np.asarray(out_x, dtype=float)
    F = tail_distribution(state)
    m = F[0]
    arg = out_x / (1.0 + m) if scaling == "divide" else out_x * (1.0 + m)
    return np.interp(arg, state.grid.faces, F, left=F[0], right=0.0) / (1.0 + m)


def moment_column_name(k: float) -> str:
    """Canonical series column for the k-th moment (M0/M1/M2, else M_<k>)."""
    if k == 0:
        return "M0"
    if k == 1:
        return "M1"
    if k == 2:
        return "M2"
    return f"M_{k:.12g}"


class TimeSeries:
    """Append-only sampled run history with a fixed column schema.

    Column 't' is always first.  Rows are appended as dicts covering every
    column; arrays are materialized on access.
    """

    def __init__(self, columns):
        columns = list(columns)
        if not columns or columns[0] != "t":
            columns = ["t"] + [c for c in columns if c != "t"]
        if len(set(columns)) != len(columns):
            raise ValueError("duplicate column names")
        self.columns = columns
        self._rows = {c: [] for c in columns}

    def append(self, row: dict) -> None:
        if set(row) != set(self.columns):
            missing = set(self.columns) - set(row)
            extra = set(row) - set(self.columns)
            raise ValueError(f"row keys mismatch (missing {missing}, extra {extra})")
        for c in self.columns:
            self._rows[c].append(float(row[c]))

    def __len__(self) -> int:
        return len(self._rows["t"])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def column(self, name: str) -> np.ndarray:
        if name not in self._rows:
            raise KeyError(f"series has no column {name!r} "
                           f"(have {', '.join(self.columns)})")
        return np.asarray(self._rows[name], dtype=float)

    def moment_column(self, k: float) -> np.ndarray:
        return self.column(moment_column_name(k))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh) -> None:
        fh.write(",".join(self.columns) + "\n")
        cols = [self._rows[c] for c in self.columns]
        for vals in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        if hasattr(path, "read"):
            text = path.read()
        else:
            with open(path) as fh:
                text = fh.read()
        lines = text.strip().splitlines()
        if not lines:
            raise ConfigError(f"{path}: empty series file")
        series = cls(lines[0].split(","))
        try:
            data = np.loadtxt(io.StringIO("\n".join(lines[1:])),
                              delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ConfigError(f"{path}: cannot read series rows: {exc}") from exc
        if data.size and data.shape[1] != len(series.columns):
            raise ConfigError(f"{path}: {data.shape[1]} fields per row but "
                              f"{len(series.columns)} header columns")
        for row in data:
            series.append(dict(zip(series.columns, row)))
        return series


def moment_balance_residual(series: TimeSeries, model: RateModel, k: float):
    """Residual of the k-th moment law along a sampled trajectory.

    The time derivative (centered differences; one-sided second order at
    the ends) is compared against the exact balance:

        k = 0:  dM0/dt = nucleation(u)
        k > 0:  dMk/dt = k a_coef u M_{k+alpha-1} - k b_coef M_{k+beta-1}

    The needed moment columns must have been recorded in the series.
    Returns (t, residual, relative) where relative divides by the
    pointwise magnitude of the balance right-hand side (guarded).
    """
    if k < 0:
        raise ValueError("moment order k must be >= 0")
    t = series.t
    if len(t) < 3:
        raise NotApplicableError("need at least 3 samples for a derivative")
    mk = series.moment_column(k)
    dmdt = np.gradient(mk, t)
    if k == 0:
        rhs = eval_nucleation(model, np.maximum(series.column("u"), 0.0))
    else:
        rhs = (k * model.a_coef * series.column("u")
               * series.moment_column(k + model.alpha - 1.0)
               - k * model.b_coef * series.moment_column(k + model.beta - 1.0))
    residual = dmdt - rhs
    relative = residual / np.maximum(np.abs(rhs), np.finfo(float).tiny)
    return t, residual, relative
