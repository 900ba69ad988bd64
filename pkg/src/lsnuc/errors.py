"""Exception hierarchy used across the package."""

from __future__ import annotations


class LsnucError(Exception):
    """Base class for all package-specific errors."""


class ConstantPhiError(LsnucError):
    """Raised when an operation requires a strictly increasing dissolution
    threshold but the model has alpha == beta (constant threshold).

    Callers hitting this should switch to the transport/characteristics
    path, which handles the constant-threshold regime.
    """


class HypothesisError(LsnucError):
    """Raised when a closed form is evaluated outside its validity range
    (e.g. the growth-rate antiderivative with alpha >= 1)."""


class SolverError(LsnucError):
    """Base class for time-stepping failures. Carries the failing time."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class NegativeDensityError(SolverError):
    """A cell average went negative during an update (CFL violation or bug)."""

    def __init__(self, t: float, cell: int, value: float):
        super().__init__(
            f"negative density {value:.3e} in cell {cell} at t={t:.6g}", t)
        self.cell = cell
        self.value = value


class MonomerUnderflowError(SolverError):
    """The free-monomer concentration went negative."""

    def __init__(self, t: float, u: float):
        super().__init__(f"monomer concentration u={u:.3e} < 0 at t={t:.6g}", t)
        self.u = u


class OracleError(LsnucError):
    """Semi-analytic reference solve failed (step size too large, or the
    configuration is outside the constant-threshold regime)."""


class FitError(LsnucError):
    """Power-law fitting failed (too few usable samples, bad window)."""


class NotApplicableError(LsnucError):
    """A diagnostic was requested for a model regime where it is undefined."""


class ConfigError(LsnucError):
    """Invalid or unknown configuration content. Messages carry the key path."""
