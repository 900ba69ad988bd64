"""Command-line interface.

Verbs:
    run       execute a configured solve and write artifacts + figures
    refine    halve dt (or dx) over several levels and tabulate residuals
    sweep     rerun with a contrasting initial datum, compare tail profiles
    validate  check the structural assumptions behind a configuration
    fit       fit power laws to an existing timeseries.csv

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 exponent assertion failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import asymptotics, runner
from .config import config_from_preset, load_config
from .diagnostics import TimeSeries
from .errors import ConfigError, ConstantPhiError, NotApplicableError, SolverError
from .kinetics import validate_hypotheses


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--preset", help="named preset (used alone or as a base)")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VAL",
                   help="dotted-path config override, repeatable")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")


def _build_config(args):
    if args.config:
        return load_config(args.config, preset=args.preset,
                           overrides=args.override)
    if args.preset:
        return config_from_preset(args.preset, overrides=args.override)
    raise ConfigError("either --config or --preset is required")


def _figures_flag(args):
    return False if args.no_figures else None


def _cmd_run(args) -> int:
    cfg = _build_config(args)
    art = runner.run_single(cfg, out_dir=args.out, figures=_figures_flag(args))
    if art.status != "ok":
        info = art.failure or {}
        print(f"run FAILED ({info.get('type')}) at t={info.get('t')}: "
              f"{info.get('detail')}", file=sys.stderr)
        print(f"partial artifacts in {art.out_dir}", file=sys.stderr)
        return 3
    res = art.result
    print(f"run ok: {res.n_steps} steps, final t={res.final_state.t:g}, "
          f"artifacts in {art.out_dir}")
    fit_u = art.fit_report.get("fit_u", {})
    if fit_u.get("status") == "ok":
        print(f"  fitted u exponent {fit_u['exponent']:+.4f} "
              f"over t in [{fit_u['window'][0]:g}, {fit_u['window'][1]:g}]")
    fit_m0 = art.fit_report.get("fit_M0", {})
    if fit_m0.get("status") == "ok":
        print(f"  fitted M0 exponent {fit_m0['exponent']:+.4f}")
    return 0


def _cmd_refine(args) -> int:
    cfg = _build_config(args)
    rows = runner.run_refinement(cfg, levels=args.levels, mode=args.mode,
                                 out_dir=args.out,
                                 figures=_figures_flag(args))
    print(f"{args.mode} refinement over {args.levels} levels:")
    for lev, row in enumerate(rows):
        extra = ""
        if "u_sup_err" in row:
            extra = (f"  sup|u err|={row['u_sup_err']:.3e}"
                     f"  L1={row['l1_final_err']:.3e}")
        print(f"  level {lev}: n={row['n_cells']}  dt={row['dt']:.3e}  "
              f"count residual={row['count_residual_max']:.3e}{extra}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _build_config(args)
    summary = runner.run_sweep(cfg, out_dir=args.out,
                               figures=_figures_flag(args))
    print("initial-data sweep:")
    print(f"  profile sup norm (reference)   {summary['ref_sup_norm']:.4e}")
    print(f"  self distance, run a           {summary['self_distance_a']:.4e}")
    print(f"  self distance, run b           {summary['self_distance_b']:.4e}")
    print(f"  cross distance at mid time     {summary['cross_distance_mid']:.4e}")
    print(f"  cross distance at final time   {summary['cross_distance_final']:.4e}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _build_config(args)
    report = validate_hypotheses(cfg.model)
    print(report)
    if not report.all_passed:
        print("note: some structural assumptions fail; results outside the "
              "supported regime are not covered by the convergence checks")
    return 0


def _cmd_fit(args) -> int:
    cfg = _build_config(args)
    ts_path = args.timeseries
    if ts_path is None:
        ts_path = os.path.join(args.out or cfg.output_dir, "timeseries.csv")
    if not os.path.exists(ts_path):
        raise ConfigError(f"no timeseries at {ts_path}; run first or pass "
                          "--timeseries")
    series = TimeSeries.from_csv(ts_path)
    report = runner.build_fit_report(cfg, series)
    for key in ("fit_M0", "fit_u"):
        block = report.get(key, {})
        if block.get("status") == "ok":
            print(f"{key}: exponent {block['exponent']:+.5f}  "
                  f"rms residual {block['rms_residual']:.2e}")
        else:
            print(f"{key}: {block.get('note', 'unavailable')}")
    conj = report.get("conjectured", {})
    if "M0_exponent" in conj:
        print(f"conjectured: M0 {conj['M0_exponent']:+.5f}, "
              f"u {conj['u_exponent']:+.5f}")
    if "beta_one_limit" in report:
        print(f"beta=1 limit check: {report['beta_one_limit']}")
    if "invariant_product" in report:
        print(f"invariant product check: {report['invariant_product']}")
    if args.assert_exponents:
        if "M0_exponent" not in conj:
            print("exponent assertion unavailable for this model",
                  file=sys.stderr)
            return 4
        for key, expected in (("fit_M0", conj["M0_exponent"]),
                              ("fit_u", conj["u_exponent"])):
            block = report.get(key, {})
            if block.get("status") != "ok":
                print(f"{key}: no fit available", file=sys.stderr)
                return 4
            err = abs(block["exponent"] - expected)
            if err > args.tol:
                print(f"{key}: |{block['exponent']:+.4f} - {expected:+.4f}| "
                      f"= {err:.4f} exceeds tolerance {args.tol}",
                      file=sys.stderr)
                return 4
        print(f"fitted exponents match conjectured values within {args.tol}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsnuc",
        description="finite-volume simulator for nucleation-driven "
                    "growth/dissolution of aggregate size distributions")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one configured solve")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("refine", help="refinement study")
    _add_common(p)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--mode", choices=("time", "space"), default="time")
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("sweep", help="initial-data sensitivity sweep")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="check structural assumptions")
    _add_common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("fit", help="fit power laws to a finished run")
    _add_common(p)
    p.add_argument("--timeseries", help="path to a timeseries.csv "
                   "(default: <out>/timeseries.csv)")
    p.add_argument("--assert-exponents", action="store_true",
                   help="exit 4 unless fitted exponents match conjectured")
    p.add_argument("--tol", type=float, default=0.1,
                   help="tolerance for --assert-exponents")
    p.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (ConstantPhiError, NotApplicableError) as e:
        print(f"not applicable to this model: {e}", file=sys.stderr)
        return 2
    except SolverError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
