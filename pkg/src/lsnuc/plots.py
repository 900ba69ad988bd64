"""Figure rendering. Everything goes straight to PNG files (Agg backend)."""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .asymptotics import conjectured_exponents
from .diagnostics import normalized_profile
from .errors import ConstantPhiError, NotApplicableError


def _loglog_positive(ax, t, y, **kw):
    mask = (t > 0) & (y > 0)
    if np.any(mask):
        ax.loglog(t[mask], y[mask], **kw)


def _slope_guide(ax, t, y, exponent, label):
    mask = (t > 0) & (y > 0)
    if np.count_nonzero(mask) < 2:
        return
    t_ref = t[mask][-1]
    y_ref = y[mask][-1]
    tt = np.geomspace(max(t_ref / 100.0, t[mask][0]), t_ref, 50)
    ax.loglog(tt, y_ref * (tt / t_ref) ** exponent, "k--", lw=0.8, label=label)


def render_run_figures(cfg, result, out_dir, fit_report=None,
                       oracle_solution=None):
    series = result.series
    t = series.column("t")
    u = series.column("u")
    m0 = series.column("M0")

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    ax = axes[0, 0]
    _loglog_positive(ax, t, u, label="u(t)")
    _loglog_positive(ax, t, m0, label="M0(t)")
    try:
        em, eu = conjectured_exponents(cfg.model)
        _slope_guide(ax, t, m0, em, f"slope {em:+.3g}")
        _slope_guide(ax, t, u, eu, f"slope {eu:+.3g}")
    except (ConstantPhiError, NotApplicableError):
        pass
    ax.set_xlabel("t")
    ax.set_title("monomer density and aggregate count")
    ax.legend(fontsize=8)

    ax = axes[0, 1]
    budget = np.abs(series.column("budget"))
    ax.semilogy(t, np.maximum(budget, 1e-18))
    ax.set_xlabel("t")
    ax.set_title("|conservation budget residual|")

    ax = axes[1, 0]
    h_cols = [c for c in series.columns if c.startswith("H")]
    for c in h_cols:
        ax.plot(t, series.column(c), label=c)
    ax.set_xlabel("t")
    ax.set_title("Lyapunov functionals")
    if h_cols:
        ax.legend(fontsize=8)

    ax = axes[1, 1]
    d_cols = [c for c in series.columns if c.startswith("D")]
    for c in d_cols:
        y = series.column(c)
        ax.semilogy(t[y > 0], y[y > 0], label=c)
    ax.set_xlabel("t")
    ax.set_title("dissipation rates")
    if d_cols:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "fig_timeseries.png"), dpi=130)
    plt.close(fig)

    x = cfg.grid.centers
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for snap in result.snapshots:
        ax.plot(x, snap.f, lw=1.0, label=f"t={snap.t:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("f(t, x)")
    ax.set_title("density snapshots")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "fig_snapshots.png"), dpi=130)
    plt.close(fig)

    xi = cfg.diagnostics.profile_abscissa()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for snap in result.snapshots:
        if snap.t <= 0:
            continue
        prof = normalized_profile(snap, xi,
                                  scaling=cfg.diagnostics.profile_scaling)
        ax.semilogx(xi, prof, lw=1.0, label=f"t={snap.t:g}")
    ax.set_xlabel("rescaled size")
    ax.set_ylabel("rescaled tail")
    ax.set_title("self-similar profile collapse")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "fig_profiles.png"), dpi=130)
    plt.close(fig)

    if oracle_solution is not None:
        render_oracle_figure(cfg, result, oracle_solution, out_dir)


def render_oracle_figure(cfg, result, sol, out_dir):
    from .oracle import density_at

    series = result.series
    t = series.column("t")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    ax = axes[0]
    ax.plot(sol.times, sol.u, "k-", lw=1.0, label="reference u")
    ax.plot(t, series.column("u"), "C1--", lw=1.0, label="solver u")
    ax.axhline(sol.phi0, color="gray", lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("u")
    ax.legend(fontsize=8)
    ax.set_title("monomer trajectory vs reference")

    ax = axes[1]
    x = cfg.grid.centers
    final = result.snapshots[-1]
    f_ref = density_at(sol, final.t, x)
    ax.plot(x, final.f, "C1-", lw=1.0, label=f"solver t={final.t:g}")
    ax.plot(x, f_ref, "k--", lw=1.0, label="reference")
    ax.set_xlabel("x")
    ax.set_ylabel("f")
    ax.legend(fontsize=8)
    ax.set_title("final density vs reference")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "fig_oracle.png"), dpi=130)
    plt.close(fig)


def render_convergence_figure(rows, mode, out_dir):
    key = "dt" if mode == "time" else "dx"
    h = np.array([r[key] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    res = np.array([r["count_residual_max"] for r in rows])
    ax.loglog(h, res, "o-", label="count-law residual")
    for err_key, lbl in (("u_sup_err", "sup |u - u_ref|"),
                         ("l1_final_err", "final L1 error")):
        if err_key in rows[0]:
            vals = np.array([r[err_key] for r in rows])
            ax.loglog(h, vals, "s-", label=lbl)
    ax.loglog(h, res[0] * (h / h[0]), "k--", lw=0.8, label="first order")
    ax.set_xlabel(key)
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    ax.set_title(f"{mode} refinement")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "fig_convergence.png"), dpi=130)
    plt.close(fig)


def render_sweep_figure(xi, profiles, times, out_dir):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    styles = {"a": "-", "b": "--"}
    for (label, t_snap), prof in sorted(profiles.items()):
        ax.semilogx(xi, prof, styles[label], lw=1.0,
                    label=f"run {label}, t={t_snap:g}")
    ax.set_xlabel("rescaled size")
    ax.set_ylabel("rescaled tail")
    ax.set_title("profile overlap across initial data")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "fig_sweep.png"), dpi=130)
    plt.close(fig)
