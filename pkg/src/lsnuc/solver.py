"""First-order finite-volume transport solver with nucleation inflow.

The density advects in size with speed ``v(x) = a(x) u - b(x)`` on a
uniform grid; fluxes are donor-cell upwind with the face value taken
from the upwind side of the sign of ``v``.  The left boundary carries
the nucleation inflow: the flux at x = 0 is exactly ``nucleation(u)``
while ``u > phi0`` and zero otherwise.  The right boundary uses a zero
ghost cell, so mass can leave but never enter; the leaked mass and
count are tracked in a running budget.

After every update the monomer concentration is recomputed from the
conserved total minus the recorded leak (never integrated as its own
equation), so u + aggregate mass + departed mass cannot drift; leaked
aggregate mass stays aggregate mass, it is not handed back to the
monomer pool.

Time stepping is explicit Euler.  When no fixed dt is given, the step
is chosen every iteration as ``cfl_safety * dx / max|v|``, which also
keeps the update positivity-preserving for this velocity family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .diagnostics import (LyapunovChoice, TimeSeries, capital_K, dissipation_D,
                          moment_column_name, weight_of_x)
from .errors import ConfigError, MonomerUnderflowError, NegativeDensityError
from .kinetics import (RateModel, antiderivative_Psi, eval_a, eval_b,
                       eval_nucleation, eval_phi, eval_phi_inverse)
from .state import Grid, SimState, monomer, weighted_cell_sum


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping and sampling parameters.

    dt = None selects the adaptive CFL step.  ``sample_times`` are the
    instants at which full density snapshots are kept (the initial and
    final states are always included); the diagnostic series is sampled
    every ``series_stride`` steps plus at each snapshot time.
    ``extra_moments`` lists additional moment orders recorded online as
    series columns (needed e.g. for fractional-moment growth checks).
    """

    t_end: float
    dt: float | None = None
    cfl_safety: float = 0.9
    sample_times: tuple[float, ...] = ()
    series_stride: int = 100
    extra_moments: tuple[float, ...] = ()
    lyapunov: tuple[LyapunovChoice, ...] | None = None  # None: regime default

    def __post_init__(self):
        if self.t_end < 0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be > 0 or None (auto), got {self.dt}")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError(f"cfl_safety must be in (0, 1], got {self.cfl_safety}")
        if self.series_stride < 1:
            raise ConfigError(f"series_stride must be >= 1, got {self.series_stride}")
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))
        object.__setattr__(self, "extra_moments", tuple(float(k) for k in self.extra_moments))
        for t in self.sample_times:
            if t < 0 or t > self.t_end:
                raise ConfigError(f"sample time {t} outside [0, t_end]")


@dataclass(frozen=True)
class StepBudget:
    """Mass and count leaving through the right boundary in one step."""

    mass_outflow: float
    count_outflow: float


@dataclass
class RunResult:
    series: TimeSeries
    snapshots: list[SimState]
    n_steps: int
    mass_outflow: float
    count_outflow: float
    final_state: SimState

    @property
    def dt_mean(self) -> float:
        t = self.final_state.t
        return t / self.n_steps if self.n_steps else 0.0


class _RateTables:
    """Per-(grid, model) cached arrays used by the hot loop."""

    def __init__(self, grid: Grid, model: RateModel):
        self.a_faces = eval_a(model, grid.faces)
        self.b_faces = eval_b(model, grid.faces)
        self.a_centers = eval_a(model, grid.centers)
        self.phi_centers = eval_phi(model, grid.centers)
        self.x_last = grid.centers[-1]


@lru_cache(maxsize=16)
def _tables(grid: Grid, model: RateModel) -> _RateTables:
    return _RateTables(grid, model)


def face_velocity(model: RateModel, u: float, x):
    """Transport speed in size, v(x) = a(x) u - b(x)."""
    return eval_a(model, x) * u - eval_b(model, x)


def upwind_fluxes(state: SimState, model: RateModel, u: float | None = None) -> np.ndarray:
    """Fluxes at the n_cells + 1 faces for the current state.

    Interior faces are donor-cell upwind.  The left face is the
    nucleation inflow (active only while u > phi0); the right face sees
    a zero ghost cell, so only outflow is possible there.
    """
    if u is None:
        u = monomer(state)
    tab = _tables(state.grid, model)
    f = state.f
    v = tab.a_faces * u - tab.b_faces
    F = np.empty(state.grid.n_cells + 1)
    vi = v[1:-1]
    F[1:-1] = np.maximum(vi, 0.0) * f[:-1] + np.minimum(vi, 0.0) * f[1:]
    F[0] = eval_nucleation(model, u) if u > model.phi0 else 0.0
    F[-1] = max(v[-1], 0.0) * f[-1]
    return F


def cfl_dt(state: SimState, model: RateModel, u: float | None = None,
           cfl_safety: float = 0.9) -> float:
    """Stable explicit step ``cfl_safety * dx / max|v|`` at the current u.

    Returns inf when every face velocity vanishes (caller caps the step
    at the remaining run time).
    """
    if u is None:
        u = monomer(state)
    tab = _tables(state.grid, model)
    vmax = float(np.max(np.abs(tab.a_faces * u - tab.b_faces)))
    if vmax == 0.0:
        return math.inf
    return cfl_safety * state.grid.dx / vmax


def step(state: SimState, model: RateModel, dt: float) -> tuple[SimState, StepBudget]:
    """One explicit Euler update.  Returns the new state and the step budget.

    The monomer concentration is taken as rho - aggregate mass; callers
    that stepped mass out of the domain earlier must fold the returned
    budgets into ``rho`` themselves (the run loop does this).

    Raises :class:`MonomerUnderflowError` when conservation yields u < 0
    and :class:`NegativeDensityError` when a cell average goes negative
    (a CFL violation with a fixed dt).
    """
    grid = state.grid
    u = state.rho - weighted_cell_sum(grid.centers, state.f, grid.dx)
    return _advance(state, model, u, dt)


def _advance(state: SimState, model: RateModel, u: float, dt: float):
    grid = state.grid
    if u < 0:
        raise MonomerUnderflowError(state.t, u)
    F = upwind_fluxes(state, model, u)
    f_new = state.f - (dt / grid.dx) * np.diff(F)
    worst = int(np.argmin(f_new))
    if f_new[worst] < 0.0:
        # cells drained to zero can land a few ulp below it; clamp that
        # noise and raise only on overshoot at the scale of the data
        if f_new[worst] < -1e-13 * float(np.max(state.f)):
            raise NegativeDensityError(state.t + dt, worst, float(f_new[worst]))
        np.maximum(f_new, 0.0, out=f_new)
    tab = _tables(grid, model)
    budget = StepBudget(mass_outflow=dt * tab.x_last * F[-1],
                        count_outflow=dt * F[-1])
    return state.with_f(f_new, t=state.t + dt), budget


def _series_columns(model: RateModel, cfg: SolverConfig):
    """Column schema and the Lyapunov choices actually recorded."""
    if cfg.lyapunov is None:
        if model.constant_phi:
            choices = (LyapunovChoice.phi_primitive(),)
        else:
            choices = (LyapunovChoice.quadratic(), LyapunovChoice.phi_primitive())
    else:
        choices = cfg.lyapunov
        for c in choices:
            if c.kind != "phi_primitive" and model.constant_phi:
                raise ConfigError(
                    f"Lyapunov weight {c.kind!r} undefined for alpha == beta; "
                    "only phi_primitive applies in the constant-threshold regime")
    cols = ["t", "u", "M0", "M1", "M2", "Ma"]
    for c in choices:
        if c.kind == "quadratic":
            cols += ["H", "D"]
        elif c.kind == "phi_primitive":
            cols += ["Dphi"]
        else:
            tag = f"{c.eta:.6g}"
            cols += [f"H_pow{tag}", f"D_pow{tag}"]
    cols += [moment_column_name(k) for k in cfg.extra_moments]
    cols += ["budget"]
    if len(set(cols)) != len(cols):
        raise ConfigError("duplicate series columns (repeated moment or weight?)")
    return cols, choices


def run(initial: SimState, model: RateModel, cfg: SolverConfig) -> RunResult:
    """March the state to t_end, sampling diagnostics and snapshots.

    The series rows carry: t, u, the count/mass/second moments, the
    a-weighted moment, the Lyapunov value(s) and dissipation(s) for the
    recorded weight choices, any extra moments, and the mass-budget
    residual u + M1 - rho + accumulated right-boundary leak.

    On a failed step the raised error carries the partial series and
    snapshots in its ``partial`` attribute.
    """
    grid = initial.grid
    rho = initial.rho
    cols, choices = _series_columns(model, cfg)
    series = TimeSeries(cols)
    tab = _tables(grid, model)
    centers, dx = grid.centers, grid.dx
    extra_w = [centers ** k for k in cfg.extra_moments]
    x_sq = centers ** 2
    psi_ok = not model.constant_phi

    events = sorted({t for t in (*cfg.sample_times, cfg.t_end) if t > 0})
    snapshots = [initial]

    mass_out = 0.0
    count_out = 0.0

    def sample_row(state: SimState):
        f = state.f
        m1 = weighted_cell_sum(centers, f, dx)
        u = rho - mass_out - m1
        row = {
            "t": state.t, "u": u,
            "M0": weighted_cell_sum(np.ones_like(f), f, dx),
            "M1": m1,
            "M2": weighted_cell_sum(x_sq, f, dx),
            "Ma": weighted_cell_sum(tab.a_centers, f, dx),
            "budget": (u + m1 - rho) + mass_out,
        }
        uc = max(u, 0.0)
        gap = uc - tab.phi_centers
        for c in choices:
            if c.kind == "quadratic":
                row["H"] = 0.5 * row["M2"] + antiderivative_Psi(model, uc)
                row["D"] = weighted_cell_sum(
                    (eval_phi_inverse(model, uc) - centers) * gap * tab.a_centers, f, dx)
            elif c.kind == "phi_primitive":
                row["Dphi"] = weighted_cell_sum(gap * gap * tab.a_centers, f, dx)
            else:
                tag = f"{c.eta:.6g}"
                row[f"H_pow{tag}"] = (weighted_cell_sum(
                    weight_of_x(model, c, centers), f, dx) + capital_K(model, c, uc))
                row[f"D_pow{tag}"] = dissipation_D(state, model, c, u=uc)
        for k, w in zip(cfg.extra_moments, extra_w):
            row[moment_column_name(k)] = weighted_cell_sum(w, f, dx)
        series.append(row)

    state = initial
    sample_row(state)

    n_steps = 0
    event_idx = 0
    t_scale = max(cfg.t_end, 1.0)
    try:
        while state.t < cfg.t_end - 1e-13 * t_scale:
            f = state.f
            u = rho - mass_out - float(np.dot(centers, f)) * dx
            if u < 0:
                raise MonomerUnderflowError(state.t, u)
            if cfg.dt is None:
                v = tab.a_faces * u - tab.b_faces
                vmax = float(np.max(np.abs(v)))
                dt = cfg.cfl_safety * dx / vmax if vmax > 0 else math.inf
            else:
                dt = cfg.dt
            next_event = events[event_idx]
            hit_event = state.t + dt >= next_event - 1e-13 * t_scale
            if hit_event:
                dt = next_event - state.t
            state, b = _advance(state, model, u, dt)
            if hit_event:
                state = state.with_f(state.f, t=next_event)
            mass_out += b.mass_outflow
            count_out += b.count_outflow
            n_steps += 1
            if hit_event:
                event_idx += 1
                if next_event in cfg.sample_times or next_event == cfg.t_end:
                    snapshots.append(state)
                sample_row(state)
            elif n_steps % cfg.series_stride == 0:
                sample_row(state)
    except (MonomerUnderflowError, NegativeDensityError) as err:
        err.partial = RunResult(series, snapshots, n_steps, mass_out, count_out, state)
        raise

    return RunResult(series, snapshots, n_steps, mass_out, count_out, state)
