"""Run orchestration: execute solves and lay down artifacts on disk.

A single run directory contains:

    timeseries.csv        sampled scalar series (t, u, moments, budgets, ...)
    snapshot_<t>.csv      cell-centered density at each sample time
    tail_<t>.csv          cumulative tail counts on cell faces
    profile_<t>.csv       rescaled tail profile on the reporting abscissa
    fit_report.json       power-law fits and regime-specific limit checks
    oracle.csv            reference trajectory (constant-threshold runs)
    fbar.csv              reference terminal density profile
    compare.json          solver-vs-reference error report
    run.json              status, resolved config echo, runtime, budgets
    fig_*.png             rendered figures (unless disabled)

Refinement studies add convergence.csv; initial-data sweeps add sweep.json.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics, oracle as oracle_mod, plots
from .config import RunConfig, config_from_dict
from .diagnostics import TimeSeries, moment_balance_residual, normalized_profile
from .errors import ConfigError, FitError, NotApplicableError, SolverError
from .errors import ConstantPhiError
from .solver import RunResult, run
from .state import SimState, monomer


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _write_columns_csv(path: str, names, columns):
    arr = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in arr:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _time_tag(t: float) -> str:
    return f"{t:.6g}".replace(".", "p").replace("-", "m")


@dataclass
class RunArtifacts:
    """What a run produced, in memory and on disk."""
    out_dir: str
    result: RunResult | None
    fit_report: dict = field(default_factory=dict)
    oracle_solution: object | None = None
    compare: dict | None = None
    status: str = "ok"
    failure: dict | None = None


def _write_snapshots(cfg: RunConfig, result: RunResult, out_dir: str):
    faces = cfg.grid.faces
    xi = cfg.diagnostics.profile_abscissa()
    dx = cfg.grid.dx
    for snap in result.snapshots:
        tag = _time_tag(snap.t)
        _write_columns_csv(os.path.join(out_dir, f"snapshot_{tag}.csv"),
                           ["x", "f"], [cfg.grid.centers, snap.f])
        tail = np.concatenate([np.cumsum(snap.f[::-1])[::-1] * dx, [0.0]])
        _write_columns_csv(os.path.join(out_dir, f"tail_{tag}.csv"),
                           ["x", "tail"], [faces, tail])
        if snap.t > 0:
            prof = normalized_profile(snap, xi,
                                      scaling=cfg.diagnostics.profile_scaling)
            _write_columns_csv(os.path.join(out_dir, f"profile_{tag}.csv"),
                               ["xi", "profile"], [xi, prof])


def _fit_block(series: TimeSeries, column: str, model) -> dict:
    t = series.column("t")
    try:
        fit = asymptotics.fit_power_law(t, series.column(column))
    except FitError as e:
        return {"status": "unavailable", "note": str(e)}
    return {"status": "ok", "exponent": fit.exponent,
            "log_prefactor": fit.log_prefactor,
            "window": [fit.t_lo, fit.t_hi], "n_points": fit.n_points,
            "rms_residual": fit.rms_residual}


def build_fit_report(cfg: RunConfig, series: TimeSeries) -> dict:
    """Power-law fits plus the regime-specific limit checks."""
    model, rho = cfg.model, cfg.rho
    report: dict = {}
    try:
        em, eu = asymptotics.conjectured_exponents(model)
        report["conjectured"] = {"M0_exponent": em, "u_exponent": eu}
    except (ConstantPhiError, NotApplicableError) as e:
        report["conjectured"] = {"status": "not_applicable", "note": str(e)}
    report["fit_M0"] = _fit_block(series, "M0", model)
    report["fit_u"] = _fit_block(series, "u", model)
    if model.alpha == 0.0:
        inv = asymptotics.invariant_product(series, model, rho=rho)
        report["invariant_product"] = {
            "bound": inv.bound, "within_bound": inv.within_bound,
            "final_value": inv.final_value()}
    if model.beta == 1.0:
        try:
            lim = asymptotics.beta_one_limit(series, model, rho)
            report["beta_one_limit"] = {
                "expected": lim.expected, "window_mean": lim.mean,
                "rel_error": lim.rel_error, "window": list(lim.window)}
        except NotApplicableError as e:
            report["beta_one_limit"] = {"status": "not_applicable",
                                        "note": str(e)}
    return report


def _run_oracle(cfg: RunConfig, initial: SimState, result: RunResult,
                out_dir: str):
    t_solver = cfg.solver.t_end
    t_oracle = cfg.oracle.t_end if cfg.oracle.t_end is not None else t_solver
    sol = oracle_mod.solve_history(cfg.model, initial, t_end=t_oracle,
                                   dt=cfg.oracle.dt)
    _write_columns_csv(os.path.join(out_dir, "oracle.csv"),
                       ["t", "u", "gamma", "Ma"],
                       [sol.times, sol.u, sol.gamma, sol.ma])
    compare: dict = {"oracle_dt": sol.dt, "oracle_t_end": sol.t_end}
    try:
        lim = oracle_mod.limit_density(sol)
        _write_columns_csv(os.path.join(out_dir, "fbar.csv"),
                           ["x", "fbar"], [lim.x, lim.fbar])
        compare["limit"] = {"gamma_bar": lim.gamma_bar, "xc_bar": lim.xc_bar,
                            "residual": lim.residual, "mass": lim.mass,
                            "u_plus_mass": sol.phi0 + lim.mass}
    except oracle_mod.OracleError as e:
        compare["limit"] = {"status": "unavailable", "note": str(e)}
    if t_oracle >= t_solver:
        rep = oracle_mod.compare_with_fv(sol, result.series, result.snapshots,
                                         cfg.model, cfg.rho)
        compare.update(rep.to_dict())
    else:
        compare["note"] = ("oracle horizon shorter than the solver run; "
                           "trajectory comparison skipped")
    _write_json(os.path.join(out_dir, "compare.json"), compare)
    return sol, compare


def run_single(cfg: RunConfig, out_dir: str | None = None,
               figures: bool | None = None) -> RunArtifacts:
    """Execute one solve and write the full artifact set."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    if figures is None:
        figures = cfg.figures

    f0 = cfg.initial.sample(cfg.grid)
    initial = SimState(grid=cfg.grid, f=f0, t=0.0, rho=cfg.rho)
    if monomer(initial) < 0:
        raise ConfigError(
            "initial data holds more mass than the total concentration rho")

    t0 = time.perf_counter()
    art = RunArtifacts(out_dir=out_dir, result=None)
    try:
        result = run(initial, cfg.model, cfg.solver)
    except SolverError as e:
        art.status = "failed"
        art.failure = {"type": type(e).__name__, "t": getattr(e, "t", None),
                       "detail": str(e)}
        result = getattr(e, "partial", None)
        art.result = result
    else:
        art.result = result
    runtime = time.perf_counter() - t0

    if result is not None:
        result.series.to_csv(os.path.join(out_dir, "timeseries.csv"))
        _write_snapshots(cfg, result, out_dir)
        if art.status == "ok":
            art.fit_report = build_fit_report(cfg, result.series)
            _write_json(os.path.join(out_dir, "fit_report.json"),
                        art.fit_report)
            if cfg.oracle.enabled:
                art.oracle_solution, art.compare = _run_oracle(
                    cfg, initial, result, out_dir)

    run_info = {
        "status": art.status,
        "runtime_s": runtime,
        "n_steps": None if result is None else result.n_steps,
        "dt_mean": None if result is None else result.dt_mean,
        "mass_outflow": None if result is None else result.mass_outflow,
        "count_outflow": None if result is None else result.count_outflow,
        "config": cfg.resolved,
    }
    if art.failure is not None:
        run_info["failure"] = art.failure
    _write_json(os.path.join(out_dir, "run.json"), run_info)

    if figures and result is not None:
        plots.render_run_figures(cfg, result, out_dir,
                                 fit_report=art.fit_report,
                                 oracle_solution=art.oracle_solution)
    return art


def _level_variant(cfg: RunConfig, level: int, mode: str) -> RunConfig:
    raw = json.loads(json.dumps(cfg.resolved, default=_json_default))
    factor = 2 ** level
    if mode == "space":
        raw["grid"]["n_cells"] = cfg.grid.n_cells * factor
        if cfg.solver.dt is not None:
            raw["solver"]["dt"] = cfg.solver.dt / factor
    elif mode == "time":
        if cfg.solver.dt is None:
            raise ConfigError("time refinement requires an explicit solver.dt")
        raw["solver"]["dt"] = cfg.solver.dt / factor
    else:
        raise ConfigError(f"refinement mode must be space or time, got {mode!r}")
    raw["output"]["figures"] = False
    return config_from_dict(raw)


def _refine_worker(resolved: dict) -> dict:
    cfg = config_from_dict(resolved)
    f0 = cfg.initial.sample(cfg.grid)
    initial = SimState(grid=cfg.grid, f=f0, t=0.0, rho=cfg.rho)
    result = run(initial, cfg.model, cfg.solver)
    series = result.series
    _, res, _ = moment_balance_residual(series, cfg.model, 0)
    interior = res[1:-1] if res.size >= 5 else res
    metrics = {
        "n_cells": cfg.grid.n_cells,
        "dx": cfg.grid.dx,
        "dt": result.dt_mean,
        "count_residual_max": float(np.max(np.abs(interior))),
        "budget_max": float(np.max(np.abs(series.column("budget")))),
    }
    if cfg.oracle.enabled:
        t_oracle = cfg.oracle.t_end if cfg.oracle.t_end is not None \
            else cfg.solver.t_end
        sol = oracle_mod.solve_history(cfg.model, initial, t_end=t_oracle,
                                       dt=cfg.oracle.dt)
        rep = oracle_mod.compare_with_fv(sol, series, result.snapshots,
                                         cfg.model, cfg.rho)
        metrics["u_sup_err"] = rep.sup_u_error
        metrics["l1_final_err"] = rep.final_l1_error
    return metrics


def run_refinement(cfg: RunConfig, levels: int = 3, mode: str = "time",
                   out_dir: str | None = None,
                   figures: bool | None = None) -> list[dict]:
    """Halve dt (or dx) ``levels`` times and tabulate residuals/errors."""
    if levels < 2:
        raise ConfigError("refinement needs at least 2 levels")
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    if figures is None:
        figures = cfg.figures

    variants = [_level_variant(cfg, lev, mode) for lev in range(levels)]
    n_workers = int(os.environ.get("LS_THREADS", "0")) or min(levels,
                                                              os.cpu_count() or 1)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_refine_worker,
                                 [v.resolved for v in variants]))
    else:
        rows = [_refine_worker(v.resolved) for v in variants]

    names = ["level", "n_cells", "dx", "dt", "count_residual_max", "budget_max"]
    if cfg.oracle.enabled:
        names += ["u_sup_err", "l1_final_err"]
    columns = [[i for i in range(levels)]]
    for name in names[1:]:
        columns.append([row[name] for row in rows])
    _write_columns_csv(os.path.join(out_dir, "convergence.csv"), names, columns)
    if figures:
        plots.render_convergence_figure(rows, mode, out_dir)
    return rows


def run_sweep(cfg: RunConfig, out_dir: str | None = None,
              figures: bool | None = None) -> dict:
    """Run the configured initial datum against a contrasting one and
    measure how far the rescaled tail profiles sit from each other."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    if figures is None:
        figures = cfg.figures

    raw_b = json.loads(json.dumps(cfg.resolved, default=_json_default))
    if cfg.initial.kind == "zero":
        x_max = cfg.grid.x_max
        raw_b["initial_condition"] = {"kind": "poly_bump", "c": 2000.0 / x_max,
                                      "r1": 0.2 * x_max, "r2": 0.3 * x_max}
    else:
        raw_b["initial_condition"] = {"kind": "zero"}
    raw_b["output"]["figures"] = False
    cfg_b = config_from_dict(raw_b)

    art_a = run_single(cfg, out_dir=os.path.join(out_dir, "run_a"),
                       figures=False)
    art_b = run_single(cfg_b, out_dir=os.path.join(out_dir, "run_b"),
                       figures=False)
    if art_a.status != "ok" or art_b.status != "ok":
        raise SolverError("sweep member run failed; see run_a/run_b run.json",
                          t=float("nan"))

    xi = cfg.diagnostics.profile_abscissa()
    scaling = cfg.diagnostics.profile_scaling
    times = [t for t in cfg.solver.sample_times if t > 0][-2:]
    profiles = {}
    for label, art in (("a", art_a), ("b", art_b)):
        for snap in art.result.snapshots:
            if any(abs(snap.t - t) <= 1e-9 * max(t, 1.0) for t in times):
                profiles[(label, snap.t)] = normalized_profile(
                    snap, xi, scaling=scaling)
    ref = profiles[("a", times[-1])]
    ref_sup = float(np.max(np.abs(ref)))
    summary = {
        "times": times,
        "initial_a": cfg.resolved["initial_condition"],
        "initial_b": raw_b["initial_condition"],
        "ref_sup_norm": ref_sup,
        "self_distance_a": float(np.max(np.abs(
            profiles[("a", times[0])] - profiles[("a", times[-1])]))),
        "self_distance_b": float(np.max(np.abs(
            profiles[("b", times[0])] - profiles[("b", times[-1])]))),
        "cross_distance_mid": float(np.max(np.abs(
            profiles[("a", times[0])] - profiles[("b", times[0])]))),
        "cross_distance_final": float(np.max(np.abs(
            profiles[("a", times[-1])] - profiles[("b", times[-1])]))),
    }
    _write_json(os.path.join(out_dir, "sweep.json"), summary)
    if figures:
        plots.render_sweep_figure(xi, profiles, times, out_dir)
    return summary
