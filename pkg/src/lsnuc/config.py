"""Run configuration: YAML schema, presets, strict validation.

A run is described by a nested mapping with blocks ``model``, ``rho``,
``initial_condition``, ``grid``, ``solver``, ``diagnostics``, ``oracle``
and ``output``.  Validation is strict: unknown keys anywhere are
rejected with their full path, so typos cannot silently fall back to
defaults.  A ``preset`` key (or the CLI --preset flag) merges a named
baseline first; explicit keys override it.

``load_config`` returns a :class:`RunConfig` whose ``resolved`` dict
contains every effective value (defaults filled in); serializing and
reloading that dict reproduces the configuration exactly.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .diagnostics import LyapunovChoice
from .errors import ConfigError
from .kinetics import RateModel
from .solver import SolverConfig
from .state import Grid


@dataclass(frozen=True)
class InitialCondition:
    """Descriptor for the initial density.

    kind 'zero':      f == 0
    kind 'poly_bump': f(x) = max(-c (x - r1)(x - r2), 0)
    kind 'table':     two-column CSV (x, f), linearly interpolated onto
                      the grid, zero outside the tabulated range
    """

    kind: str
    c: float = 0.0
    r1: float = 0.0
    r2: float = 0.0
    path: str | None = None

    def sample(self, grid: Grid) -> np.ndarray:
        x = grid.centers
        if self.kind == "zero":
            return np.zeros(grid.n_cells)
        if self.kind == "poly_bump":
            return np.maximum(-self.c * (x - self.r1) * (x - self.r2), 0.0)
        if self.kind == "table":
            data = np.loadtxt(self.path, delimiter=",", ndmin=2)
            if data.shape[1] != 2:
                raise ConfigError(
                    f"initial_condition.path: expected two columns in {self.path}")
            xs, fs = data[:, 0], data[:, 1]
            if np.any(np.diff(xs) <= 0):
                raise ConfigError(
                    f"initial_condition.path: x column must increase in {self.path}")
            return np.interp(x, xs, fs, left=0.0, right=0.0)
        raise ConfigError(f"initial_condition.kind: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class DiagnosticsConfig:
    lyapunov: tuple[LyapunovChoice, ...] | None   # None: regime default
    fractional_moments: tuple[float, ...]
    concentration_eps: float
    profile_scaling: str
    profile_x_min: float
    profile_x_max: float
    profile_points: int

    def profile_abscissa(self) -> np.ndarray:
        return np.geomspace(self.profile_x_min, self.profile_x_max,
                            self.profile_points)


@dataclass(frozen=True)
class OracleConfig:
    enabled: bool
    dt: float
    t_end: float | None   # None: follow solver t_end


@dataclass(frozen=True)
class RunConfig:
    model: RateModel
    rho: float
    initial: InitialCondition
    grid: Grid
    solver: SolverConfig
    diagnostics: DiagnosticsConfig
    oracle: OracleConfig
    output_dir: str
    figures: bool
    resolved: dict   # fully-resolved plain mapping (echoed to run.json)


PRESETS: dict[str, dict] = {
    # growing-threshold baseline: alpha=1/3, beta=2/3, quadratic nucleation,
    # production resolution
    "fig1": {
        "model": {"a_coef": 1.0, "alpha": 1.0 / 3.0, "b_coef": 1.0,
                  "beta": 2.0 / 3.0, "n_coef": 1.0, "i0": 2},
        "rho": 1.0,
        "initial_condition": {"kind": "zero"},
        "grid": {"x_max": 1.0, "n_cells": 10000},
        "solver": {"t_end": 200.0, "dt": 5.0e-5, "series_stride": 200},
    },
    # same with a compactly supported initial bump
    "fig1_bump": {
        "model": {"a_coef": 1.0, "alpha": 1.0 / 3.0, "b_coef": 1.0,
                  "beta": 2.0 / 3.0, "n_coef": 1.0, "i0": 2},
        "rho": 1.0,
        "initial_condition": {"kind": "poly_bump", "c": 2000.0,
                              "r1": 0.2, "r2": 0.3},
        "grid": {"x_max": 1.0, "n_cells": 10000},
        "solver": {"t_end": 200.0, "dt": 5.0e-5, "series_stride": 200},
    },
    # coarse desk-scale variant of fig1 (auto time step)
    "fig1_desk": {
        "model": {"a_coef": 1.0, "alpha": 1.0 / 3.0, "b_coef": 1.0,
                  "beta": 2.0 / 3.0, "n_coef": 1.0, "i0": 2},
        "rho": 1.0,
        "initial_condition": {"kind": "zero"},
        "grid": {"x_max": 1.0, "n_cells": 1000},
        "solver": {"t_end": 200.0, "dt": "auto", "series_stride": 100},
    },
    # constant-threshold regime with the semi-analytic reference enabled
    "constphi": {
        "model": {"a_coef": 1.0, "alpha": 0.0, "b_coef": 0.5, "beta": 0.0,
                  "n_coef": 1.0, "i0": 2, "shifted_nucleation": True},
        "rho": 1.0,
        "initial_condition": {"kind": "poly_bump", "c": 2000.0,
                              "r1": 0.2, "r2": 0.3},
        "grid": {"x_max": 2.0, "n_cells": 2000},
        "solver": {"t_end": 25.0, "dt": "auto", "series_stride": 20},
        "oracle": {"enabled": True, "dt": 1.0e-3},
    },
}


_TOP_KEYS = {"preset", "model", "rho", "initial_condition", "grid", "solver",
             "diagnostics", "oracle", "output"}
_MODEL_KEYS = {"a_coef", "alpha", "b_coef", "beta", "n_coef", "i0",
               "shifted_nucleation"}
_IC_KEYS = {"kind", "c", "r1", "r2", "path"}
_GRID_KEYS = {"x_max", "n_cells"}
_SOLVER_KEYS = {"t_end", "dt", "cfl_safety", "series_stride", "sample_times"}
_DIAG_KEYS = {"lyapunov", "fractional_moments", "concentration_eps",
              "profile_scaling", "profile_x_min", "profile_x_max",
              "profile_points"}
_ORACLE_KEYS = {"enabled", "dt", "t_end"}
_OUTPUT_KEYS = {"dir", "figures"}


def _require_mapping(value, path):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(d: dict, allowed: set, path: str):
    unknown = set(d) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{path}.{key}: unknown key "
                          f"(allowed: {', '.join(sorted(allowed))})")


def _as_float(value, path, minimum=None, strict_min=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if minimum is not None and (v < minimum or (strict_min and v == minimum)):
        op = ">" if strict_min else ">="
        raise ConfigError(f"{path}: must be {op} {minimum}, got {value}")
    return v


def _as_int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return int(value)


def _as_bool(value, path):
    if not isinstance(value, bool):
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    return value


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown preset {name!r} "
                          f"(available: {', '.join(sorted(PRESETS))})")
    return copy.deepcopy(PRESETS[name])


def apply_overrides(d: dict, overrides) -> dict:
    """Apply dotted-path 'key.sub=value' overrides (values parsed as YAML)."""
    out = copy.deepcopy(d)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key.path=value")
        key, _, raw = item.partition("=")
        try:
            value = yaml.safe_load(raw) if raw != "" else None
        except yaml.YAMLError as e:
            raise ConfigError(f"override {item!r}: unparsable value ({e})")
        node = out
        parts = key.strip().split(".")
        for p in parts[:-1]:
            nxt = node.get(p)
            if nxt is None:
                nxt = node[p] = {}
            elif not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r}: {p} is not a mapping")
            node = nxt
        node[parts[-1]] = value
    return out


def _parse_lyapunov(entries, path):
    if entries is None:
        return None
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: expected a list of weight names")
    choices = []
    for i, e in enumerate(entries):
        if not isinstance(e, str):
            raise ConfigError(f"{path}[{i}]: expected a string, got {e!r}")
        if e == "quadratic":
            choices.append(LyapunovChoice.quadratic())
        elif e == "phi_primitive":
            choices.append(LyapunovChoice.phi_primitive())
        elif e.startswith("power:"):
            try:
                eta = float(e.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"{path}[{i}]: bad power weight {e!r}")
            if eta < 1:
                raise ConfigError(f"{path}[{i}]: power exponent must be >= 1")
            choices.append(LyapunovChoice.power(eta))
        else:
            raise ConfigError(
                f"{path}[{i}]: unknown weight {e!r} "
                "(use quadratic, phi_primitive, or power:<eta>)")
    return tuple(choices)


def config_from_dict(raw: dict, base_dir: str = ".",
                     preset: str | None = None) -> RunConfig:
    """Validate a raw mapping (plus optional preset) into a RunConfig."""
    raw = _require_mapping(raw, "config")
    _check_keys(raw, _TOP_KEYS, "config")

    preset_name = preset
    if "preset" in raw:
        if not isinstance(raw["preset"], str):
            raise ConfigError(f"preset: expected a name, got {raw['preset']!r}")
        preset_name = preset_name or raw["preset"]
    merged = dict(raw)
    merged.pop("preset", None)
    if preset_name is not None:
        merged = _deep_merge(preset_dict(preset_name), merged)

    md = _require_mapping(merged.get("model"), "model")
    _check_keys(md, _MODEL_KEYS, "model")
    try:
        model = RateModel(
            a_coef=_as_float(md.get("a_coef", 1.0), "model.a_coef", 0.0, True),
            alpha=_as_float(md.get("alpha", 0.0), "model.alpha"),
            b_coef=_as_float(md.get("b_coef", 1.0), "model.b_coef", 0.0, True),
            beta=_as_float(md.get("beta", 0.0), "model.beta"),
            n_coef=_as_float(md.get("n_coef", 0.0), "model.n_coef", 0.0),
            i0=_as_int(md.get("i0", 1), "model.i0", 1),
            shifted_nucleation=_as_bool(md.get("shifted_nucleation", False),
                                        "model.shifted_nucleation"),
        )
    except ValueError as e:
        raise ConfigError(f"model: {e}")

    rho = _as_float(merged.get("rho", 1.0), "rho", 0.0, True)

    icd = _require_mapping(merged.get("initial_condition", {"kind": "zero"}),
                           "initial_condition")
    _check_keys(icd, _IC_KEYS, "initial_condition")
    kind = icd.get("kind", "zero")
    if kind not in ("zero", "poly_bump", "table"):
        raise ConfigError(f"initial_condition.kind: unknown kind {kind!r}")
    if kind == "poly_bump":
        for key in ("c", "r1", "r2"):
            if key not in icd:
                raise ConfigError(f"initial_condition.{key}: required for poly_bump")
        r1 = _as_float(icd["r1"], "initial_condition.r1", 0.0)
        r2 = _as_float(icd["r2"], "initial_condition.r2", 0.0)
        if not r1 < r2:
            raise ConfigError("initial_condition: r1 < r2 required")
        initial = InitialCondition("poly_bump",
                                   c=_as_float(icd["c"], "initial_condition.c", 0.0),
                                   r1=r1, r2=r2)
    elif kind == "table":
        if "path" not in icd or not isinstance(icd["path"], str):
            raise ConfigError("initial_condition.path: required for table kind")
        path = icd["path"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigError(f"initial_condition.path: no such file {path}")
        initial = InitialCondition("table", path=path)
    else:
        initial = InitialCondition("zero")

    gd = _require_mapping(merged.get("grid"), "grid")
    _check_keys(gd, _GRID_KEYS, "grid")
    grid = Grid(x_max=_as_float(gd.get("x_max", 1.0), "grid.x_max", 0.0, True),
                n_cells=_as_int(gd.get("n_cells", 1000), "grid.n_cells", 1))

    sd = _require_mapping(merged.get("solver"), "solver")
    _check_keys(sd, _SOLVER_KEYS, "solver")
    t_end = _as_float(sd.get("t_end", 1.0), "solver.t_end", 0.0)
    dt_raw = sd.get("dt", "auto")
    if dt_raw in ("auto", None):
        dt = None
    else:
        dt = _as_float(dt_raw, "solver.dt", 0.0, True)
    sample_times = sd.get("sample_times")
    if sample_times is None:
        sample_times = [t for t in (t_end / 4.0, t_end / 2.0, t_end) if t > 0]
    if not isinstance(sample_times, list):
        raise ConfigError("solver.sample_times: expected a list of times")
    sample_times = sorted({_as_float(t, "solver.sample_times[]", 0.0)
                           for t in sample_times})
    for t in sample_times:
        if t > t_end:
            raise ConfigError(f"solver.sample_times: {t:g} exceeds t_end={t_end:g}")

    dd = _require_mapping(merged.get("diagnostics"), "diagnostics")
    _check_keys(dd, _DIAG_KEYS, "diagnostics")
    scaling = dd.get("profile_scaling", "divide")
    if scaling not in ("divide", "multiply"):
        raise ConfigError(
            f"diagnostics.profile_scaling: expected divide or multiply, got {scaling!r}")
    fm = dd.get("fractional_moments", [])
    if not isinstance(fm, list):
        raise ConfigError("diagnostics.fractional_moments: expected a list")
    fractional = tuple(_as_float(k, "diagnostics.fractional_moments[]")
                       for k in fm)
    diag = DiagnosticsConfig(
        lyapunov=_parse_lyapunov(dd.get("lyapunov"), "diagnostics.lyapunov"),
        fractional_moments=fractional,
        concentration_eps=_as_float(dd.get("concentration_eps", 0.05),
                                    "diagnostics.concentration_eps", 0.0),
        profile_scaling=scaling,
        profile_x_min=_as_float(dd.get("profile_x_min", 1.0e-3),
                                "diagnostics.profile_x_min", 0.0, True),
        profile_x_max=_as_float(dd.get("profile_x_max", 10.0),
                                "diagnostics.profile_x_max", 0.0, True),
        profile_points=_as_int(dd.get("profile_points", 200),
                               "diagnostics.profile_points", 2),
    )
    if diag.profile_x_min >= diag.profile_x_max:
        raise ConfigError("diagnostics: profile_x_min < profile_x_max required")

    od = _require_mapping(merged.get("oracle"), "oracle")
    _check_keys(od, _ORACLE_KEYS, "oracle")
    oracle_t_end = od.get("t_end")
    oracle = OracleConfig(
        enabled=_as_bool(od.get("enabled", False), "oracle.enabled"),
        dt=_as_float(od.get("dt", 1.0e-3), "oracle.dt", 0.0, True),
        t_end=None if oracle_t_end is None
        else _as_float(oracle_t_end, "oracle.t_end", 0.0),
    )
    if oracle.enabled and not model.constant_phi:
        raise ConfigError(
            "oracle.enabled: the reference solve requires a constant "
            "threshold (model.alpha == model.beta)")

    outd = _require_mapping(merged.get("output"), "output")
    _check_keys(outd, _OUTPUT_KEYS, "output")
    output_dir = outd.get("dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError(f"output.dir: expected a path string, got {output_dir!r}")
    figures = _as_bool(outd.get("figures", True), "output.figures")

    try:
        solver = SolverConfig(
            t_end=t_end, dt=dt,
            cfl_safety=_as_float(sd.get("cfl_safety", 0.9), "solver.cfl_safety",
                                 0.0, True),
            sample_times=tuple(sample_times),
            series_stride=_as_int(sd.get("series_stride", 100),
                                  "solver.series_stride", 1),
            extra_moments=fractional,
            lyapunov=diag.lyapunov,
        )
    except ConfigError as e:
        raise ConfigError(f"solver: {e}")

    resolved = {
        "model": {"a_coef": model.a_coef, "alpha": model.alpha,
                  "b_coef": model.b_coef, "beta": model.beta,
                  "n_coef": model.n_coef, "i0": model.i0,
                  "shifted_nucleation": model.shifted_nucleation},
        "rho": rho,
        "initial_condition": {"kind": initial.kind, **(
            {"c": initial.c, "r1": initial.r1, "r2": initial.r2}
            if initial.kind == "poly_bump" else
            {"path": initial.path} if initial.kind == "table" else {})},
        "grid": {"x_max": grid.x_max, "n_cells": grid.n_cells},
        "solver": {"t_end": solver.t_end,
                   "dt": "auto" if solver.dt is None else solver.dt,
                   "cfl_safety": solver.cfl_safety,
                   "series_stride": solver.series_stride,
                   "sample_times": list(solver.sample_times)},
        "diagnostics": {
            "lyapunov": None if diag.lyapunov is None else [
                c.kind if c.kind != "power" else f"power:{c.eta:g}"
                for c in diag.lyapunov],
            "fractional_moments": list(diag.fractional_moments),
            "concentration_eps": diag.concentration_eps,
            "profile_scaling": diag.profile_scaling,
            "profile_x_min": diag.profile_x_min,
            "profile_x_max": diag.profile_x_max,
            "profile_points": diag.profile_points,
        },
        "oracle": {"enabled": oracle.enabled, "dt": oracle.dt,
                   "t_end": oracle.t_end},
        "output": {"dir": output_dir, "figures": figures},
    }

    return RunConfig(model=model, rho=rho, initial=initial, grid=grid,
                     solver=solver, diagnostics=diag, oracle=oracle,
                     output_dir=output_dir, figures=figures, resolved=resolved)


def load_config(path: str, preset: str | None = None,
                overrides=()) -> RunConfig:
    """Read a YAML config file, apply preset and overrides, validate."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}")
    raw = _require_mapping(raw, "config")
    if overrides:
        raw = apply_overrides(raw, overrides)
    return config_from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)),
                            preset=preset)


def config_from_preset(name: str, overrides=()) -> RunConfig:
    raw = {"preset": name}
    if overrides:
        raw = apply_overrides(raw, overrides)
    return config_from_dict(raw, base_dir=os.getcwd())


def serialize_config(cfg: RunConfig) -> str:
    """Canonical YAML of the fully-resolved configuration."""
    return yaml.safe_dump(cfg.resolved, sort_keys=False, default_flow_style=False)
