"""Batch front end: one subcommand per pipeline stage, JSON summaries out.

Every invocation writes a machine-readable ``summary.json`` (schema 1) into
the output directory, whatever happens; the exit status is 0 when all
requested checks pass, 1 when a check fails, 2 for configuration errors,
and 3 for numerical failures (no hodograph root, integrator divergence).
Identical configuration produces byte-identical summaries: nothing
time-dependent or machine-dependent is recorded.

Configuration comes from an optional JSON file (``--config``) whose blocks
mirror the flag groups, with command-line flags taking precedence.  Unknown
keys anywhere in the file are hard errors.  The only environment variable
honored is ``SLITLAX_OUT`` for the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .coulomb import (
    ConfinementError,
    CurveSpec,
    exterior_map_check,
    initial_state,
    relax,
    support,
)
from .faber import (
    ConvergenceError,
    FaberSet,
    GrunskyConsistencyError,
    faber_generating_check,
    grunsky,
)
from .loewner import (
    EXAMPLE_IDS,
    ChordalDriving,
    DrivingError,
    IntegrationError,
    Orientation,
    RadialDriving,
    closed_form_family,
    integrate_chordal,
    integrate_radial,
)
from .reduction import (
    DKP,
    DTODA,
    NoRootError,
    NonRealResidualError,
    ReducedSolution,
    TimeVector,
    build_lax,
    hodograph_residual,
    hodograph_solve,
)
from .series import Series
from .verify import (
    grunsky_flow_symmetry,
    hydro_residual,
    lax_residual_dkp,
    lax_residual_dtoda,
)

__all__ = ["ConfigError", "RunConfig", "main", "run"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
SCHEMA_VERSION = 1

SUBCOMMANDS = (
    "faber",
    "grunsky",
    "loewner",
    "hodograph",
    "build-lax",
    "verify",
    "coulomb",
    "golden",
)

# catalogue labels accepted as aliases for the built-in families
FAMILY_ALIASES = {
    "A.1.1": "chordal_slit",
    "A.1.2": "chordal_two_rays",
    "A.2.1": "radial_slit",
    "A.2.2": "radial_cardioid",
}

# curated per-family driving data and time vectors: each choice puts the
# hodograph root comfortably inside the lambda window
FAMILY_DEFAULTS: dict[str, dict[str, Any]] = {
    "chordal_slit": {
        "params": {"u": 0.3},
        "kind": DKP,
        "x": -0.5,
        "entries": {1: 0.1 + 0.0j, 3: -0.4 + 0.0j},
        "window": (0.0, 1.5),
        "loewner_window": (0.0, 1.0),
        "loewner_depth": 16,
    },
    "chordal_two_rays": {
        "params": {},
        "kind": DKP,
        "x": -0.26,
        "entries": {1: 0.08 + 0.0j, 2: 0.1 + 0.0j},
        "window": (0.0, 1.5),
        # the ray-pair coefficients grow like (3 lambda)^k, so a deep
        # window amplifies truncation noise: a shorter one is accurate
        "loewner_window": (0.0, 1.0),
        "loewner_depth": 10,
    },
    "radial_slit": {
        "params": {"sigma": 0.6 + 0.8j},
        "kind": DTODA,
        "t0": 1.0,
        "entries": {1: -0.18 + 0.24j},
        "window": (0.0, 1.5),
        "loewner_window": (0.0, 1.0),
        "loewner_depth": 16,
    },
    "radial_cardioid": {
        "params": {"sigma": 0.6 + 0.8j},
        "kind": DTODA,
        "t0": 1.0,
        "entries": {1: -0.18 + 0.24j},
        "window": (0.0, 1.2),
        "loewner_window": (0.0, 1.0),
        "loewner_depth": 16,
    },
}

DEFAULTS: dict[str, Any] = {
    "geometry": "chordal",
    "depth": 16,
    "n_max": 3,
    "rk4_step": 1e-3,
    "fd_step": 1e-5,
    "tolerance": 1e-4,
    "root_tol": 1e-12,
    "loewner_tol": 1e-6,
    "grunsky_tol": 1e-10,
    "sym_fd_step": 1e-6,
    "sym_tol": 1e-6,
    "curve": "real_line",
    "n_charges": 200,
    "hbar": 1.0,
    "seed": 0,
    "max_iters": 20000,
    "relax_tol": 1e-5,
    "gap_ratio": 8.0,
    "out_dir": ".",
    "summary_name": "summary.json",
    "positions_name": "positions.csv",
}

_CONFIG_BLOCKS: dict[str, dict[str, str]] = {
    "driving": {
        "example": "example",
        "params": "params",
        "table": "table",
        "geometry": "geometry",
    },
    "times": {"kind": "kind", "x": "x", "t0": "t0", "entries": "entries"},
    "numeric": {
        "window": "window",
        "lam": "lam",
        "depth": "depth",
        "n_max": "n_max",
        "rk4_step": "rk4_step",
        "fd_step": "fd_step",
        "tolerance": "tolerance",
        "root_tol": "root_tol",
        "loewner_tol": "loewner_tol",
        "grunsky_tol": "grunsky_tol",
        "sym_fd_step": "sym_fd_step",
        "sym_tol": "sym_tol",
    },
    "coulomb": {
        "curve": "curve",
        "n": "n_charges",
        "hbar": "hbar",
        "seed": "seed",
        "max_iters": "max_iters",
        "relax_tol": "relax_tol",
        "gap_ratio": "gap_ratio",
    },
    "output": {
        "dir": "out_dir",
        "summary": "summary_name",
        "positions": "positions_name",
    },
}


class ConfigError(ValueError):
    """Configuration the run cannot proceed from; maps to exit status 2."""


# ----------------------------------------------------------------------
# value parsing
# ----------------------------------------------------------------------


def _as_complex(value: Any, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        try:
            return complex(float(value[0]), float(value[1]))
        except (TypeError, ValueError):
            pass
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(f"{where}: expected a number, a [re, im] pair, or a complex literal")


def _parse_entries(obj: Any, where: str) -> dict[int, complex]:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: time entries must be an object mapping index to value")
    out: dict[int, complex] = {}
    for key, value in obj.items():
        try:
            n = int(key)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: entry index {key!r} is not an integer") from None
        if n == 0:
            raise ConfigError(f"{where}: index 0 is the base slot; set it via x or t0")
        out[n] = _as_complex(value, f"{where}[{key}]")
    return out


def _parse_params(obj: Any, where: str) -> dict[str, complex]:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: params must be an object")
    return {str(k): _as_complex(v, f"{where}.{k}") for k, v in obj.items()}


def _parse_window(obj: Any, where: str) -> tuple[float, float]:
    try:
        lo, hi = float(obj[0]), float(obj[1])
    except (TypeError, ValueError, IndexError, KeyError):
        raise ConfigError(f"{where}: window must be a [lo, hi] pair") from None
    if not lo < hi:
        raise ConfigError(f"{where}: window needs lo < hi")
    return lo, hi


# ----------------------------------------------------------------------
# run configuration
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one invocation.

    Optional fields left as ``None`` fall back to per-family curated values
    at dispatch time; every concrete default is listed in ``DEFAULTS`` and
    echoed in ``--help``.
    """

    subcommand: str
    example: str | None = None
    params: dict[str, complex] | None = None
    table: str | None = None
    geometry: str = DEFAULTS["geometry"]
    kind: str | None = None
    x: float | None = None
    t0: float | None = None
    entries: dict[int, complex] | None = None
    window: tuple[float, float] | None = None
    lam: float | None = None
    depth: int | None = None
    n_max: int = DEFAULTS["n_max"]
    rk4_step: float = DEFAULTS["rk4_step"]
    fd_step: float = DEFAULTS["fd_step"]
    tolerance: float = DEFAULTS["tolerance"]
    root_tol: float = DEFAULTS["root_tol"]
    loewner_tol: float = DEFAULTS["loewner_tol"]
    grunsky_tol: float = DEFAULTS["grunsky_tol"]
    sym_fd_step: float = DEFAULTS["sym_fd_step"]
    sym_tol: float = DEFAULTS["sym_tol"]
    curve: str = DEFAULTS["curve"]
    n_charges: int = DEFAULTS["n_charges"]
    hbar: float = DEFAULTS["hbar"]
    seed: int = DEFAULTS["seed"]
    max_iters: int = DEFAULTS["max_iters"]
    relax_tol: float = DEFAULTS["relax_tol"]
    gap_ratio: float = DEFAULTS["gap_ratio"]
    out_dir: str = DEFAULTS["out_dir"]
    summary_name: str = DEFAULTS["summary_name"]
    positions_name: str = DEFAULTS["positions_name"]


_TYPED_FIELDS = {
    "entries": _parse_entries,
    "params": _parse_params,
    "window": _parse_window,
}
_INT_FIELDS = {"depth", "n_max", "n_charges", "seed", "max_iters"}
_FLOAT_FIELDS = {
    "x",
    "t0",
    "lam",
    "rk4_step",
    "fd_step",
    "tolerance",
    "root_tol",
    "loewner_tol",
    "grunsky_tol",
    "sym_fd_step",
    "sym_tol",
    "hbar",
    "relax_tol",
    "gap_ratio",
}


def _load_config_file(path: str) -> dict[str, Any]:
    """Flatten a JSON config file onto RunConfig field names."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config file {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path}: top level must be an object")
    flat: dict[str, Any] = {}
    for key, value in raw.items():
        if key == "subcommand":
            if value not in SUBCOMMANDS:
                raise ConfigError(f"config file {path}: unknown subcommand {value!r}")
            flat["subcommand"] = value
            continue
        block = _CONFIG_BLOCKS.get(key)
        if block is None:
            raise ConfigError(f"config file {path}: unknown key {key!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"config file {path}: block {key!r} must be an object")
        for inner, inner_value in value.items():
            field_name = block.get(inner)
            if field_name is None:
                raise ConfigError(f"config file {path}: unknown key {key}.{inner}")
            where = f"config file {path}: {key}.{inner}"
            if field_name in _TYPED_FIELDS:
                flat[field_name] = _TYPED_FIELDS[field_name](inner_value, where)
            elif field_name in _INT_FIELDS:
                try:
                    flat[field_name] = int(inner_value)
                except (TypeError, ValueError):
                    raise ConfigError(f"{where}: expected an integer") from None
            elif field_name in _FLOAT_FIELDS:
                try:
                    flat[field_name] = float(inner_value)
                except (TypeError, ValueError):
                    raise ConfigError(f"{where}: expected a number") from None
            else:
                if not isinstance(inner_value, str):
                    raise ConfigError(f"{where}: expected a string")
                flat[field_name] = inner_value
    return flat


def _config_from_namespace(ns: argparse.Namespace) -> RunConfig:
    settings: dict[str, Any] = {"subcommand": ns.subcommand}
    if getattr(ns, "config", None):
        file_settings = _load_config_file(ns.config)
        sub = file_settings.pop("subcommand", None)
        if sub is not None and sub != ns.subcommand:
            raise ConfigError(
                f"config file selects subcommand {sub!r} but {ns.subcommand!r} was invoked"
            )
        settings.update(file_settings)
    for field_name in RunConfig.__dataclass_fields__:
        if field_name == "subcommand":
            continue
        flag_value = getattr(ns, field_name, None)
        if flag_value is None:
            continue
        if field_name == "entries":
            try:
                obj = json.loads(flag_value)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--times: {exc.msg}") from None
            settings[field_name] = _parse_entries(obj, "--times")
        elif field_name == "params":
            parsed: dict[str, complex] = {}
            for item in flag_value:
                name, sep, text = item.partition("=")
                if not sep or not name:
                    raise ConfigError(f"--param {item!r}: expected NAME=VALUE")
                parsed[name] = _as_complex(text, f"--param {name}")
            settings[field_name] = parsed
        elif field_name == "window":
            settings[field_name] = _parse_window(flag_value, "--window")
        else:
            settings[field_name] = flag_value
    env_out = os.environ.get("SLITLAX_OUT")
    if "out_dir" not in settings and env_out:
        settings["out_dir"] = env_out
    return RunConfig(**settings)


# ----------------------------------------------------------------------
# family and time-vector resolution
# ----------------------------------------------------------------------


def _resolve_family(cfg: RunConfig) -> str:
    if cfg.example is None:
        raise ConfigError(f"{cfg.subcommand} needs --example (one of {', '.join(EXAMPLE_IDS)})")
    fid = FAMILY_ALIASES.get(cfg.example, cfg.example)
    if fid not in EXAMPLE_IDS:
        known = ", ".join(tuple(EXAMPLE_IDS) + tuple(FAMILY_ALIASES))
        raise ConfigError(f"unknown example {cfg.example!r}; known: {known}")
    return fid


def _family_kind(fid: str) -> str:
    return FAMILY_DEFAULTS[fid]["kind"]


def _family_params(cfg: RunConfig, fid: str) -> dict[str, complex]:
    if cfg.params is not None:
        return dict(cfg.params)
    return dict(FAMILY_DEFAULTS[fid]["params"])


def _family_window(cfg: RunConfig, fid: str) -> tuple[float, float]:
    return cfg.window if cfg.window is not None else FAMILY_DEFAULTS[fid]["window"]


def _depth(cfg: RunConfig) -> int:
    return cfg.depth if cfg.depth is not None else DEFAULTS["depth"]


def _make_reduction(cfg: RunConfig, fid: str) -> ReducedSolution:
    params = _family_params(cfg, fid)
    try:
        return ReducedSolution.from_closed_form(
            fid, params, lam_range=_family_window(cfg, fid), depth=_depth(cfg)
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _times_for(cfg: RunConfig, fid: str | None) -> TimeVector:
    if fid is not None:
        kind = _family_kind(fid)
        if cfg.kind is not None and cfg.kind != kind:
            raise ConfigError(f"--kind {cfg.kind} conflicts with the {fid} family ({kind})")
        defaults = FAMILY_DEFAULTS[fid]
    else:
        kind = cfg.kind if cfg.kind is not None else DTODA
        if kind not in (DKP, DTODA):
            raise ConfigError(f"unknown kind {kind!r}")
        defaults = {}
    entries = cfg.entries if cfg.entries is not None else defaults.get("entries", {})
    try:
        if kind == DKP:
            x = cfg.x if cfg.x is not None else defaults.get("x", 0.0)
            real_entries: dict[int, float] = {}
            for n, v in entries.items():
                if v.imag != 0.0:
                    raise ConfigError(f"times entry {n}: this hierarchy takes real couplings")
                if n < 0:
                    raise ConfigError(f"times entry {n}: negative flows need the lattice hierarchy")
                real_entries[n] = v.real
            return TimeVector.dkp(x, real_entries)
        t0 = cfg.t0 if cfg.t0 is not None else defaults.get("t0", 1.0)
        return TimeVector.dtoda(t0, entries)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------


def _jsonify(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    if isinstance(value, complex):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.complexfloating):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    raise TypeError(f"cannot serialize {type(value).__name__} into the summary")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_summary(path: Path, payload: dict[str, Any]) -> None:
    _atomic_write(path, json.dumps(_jsonify(payload), sort_keys=True, indent=2) + "\n")


def _series_payload(series: Series) -> dict[str, Any]:
    return {
        "tag": series.tag,
        "lo": series.lo,
        "hi": series.hi,
        "coefficients": [series.coeff(k) for k in range(series.lo, series.hi + 1)],
    }


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


# ----------------------------------------------------------------------
# driving tables
# ----------------------------------------------------------------------


def _read_driving_table(path: str, geometry: str) -> dict[str, np.ndarray]:
    """Parse a driving CSV; malformed content reports line and column."""
    width = {"chordal": 3, "radial": 4}.get(geometry)
    if width is None:
        raise ConfigError(f"unknown geometry {geometry!r}; use chordal or radial")
    columns = "lam,u,a1" if geometry == "chordal" else "lam,re_sigma,im_sigma,phi"
    rows: list[tuple[int, list[float]]] = []
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read driving table {path}: {exc}") from None
    with handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            first = row[0].strip()
            if lineno == 1 and first and not _is_number(first):
                continue  # header row
            if len(row) != width:
                raise ConfigError(
                    f"driving table {path}: line {lineno}: expected {width} "
                    f"columns ({columns}), got {len(row)}"
                )
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ConfigError(
                        f"driving table {path}: line {lineno}, column {col}: "
                        f"{cell.strip()!r} is not a number"
                    ) from None
            rows.append((lineno, values))
    if len(rows) < 2:
        raise ConfigError(f"driving table {path}: need at least two data rows")
    data = np.array([v for _, v in rows])
    lam = data[:, 0]
    for i in range(1, len(rows)):
        if lam[i] <= lam[i - 1]:
            raise ConfigError(
                f"driving table {path}: line {rows[i][0]}, column 1: lambda must "
                f"strictly increase ({_fmt(lam[i])} after {_fmt(lam[i - 1])})"
            )
    if geometry == "chordal":
        if data[0, 2] != 0.0:
            raise ConfigError(
                f"driving table {path}: line {rows[0][0]}, column 3: a1 must "
                "start at 0 so the run grows from the identity map"
            )
        return {"lam": lam, "u": data[:, 1], "a1": data[:, 2]}
    if data[0, 3] != 0.0:
        raise ConfigError(
            f"driving table {path}: line {rows[0][0]}, column 4: phi must "
            "start at 0 so the run grows from the identity map"
        )
    return {"lam": lam, "sigma": data[:, 1] + 1j * data[:, 2], "phi": data[:, 3]}


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def _eval_lambda(cfg: RunConfig, fid: str) -> float:
    if cfg.lam is not None:
        return cfg.lam
    lo, hi = _family_window(cfg, fid)
    return 0.5 * (lo + hi)


def _run_faber(cfg: RunConfig) -> dict[str, Any]:
    fid = _resolve_family(cfg)
    sol = _make_reduction(cfg, fid)
    lam = _eval_lambda(cfg, fid)
    L = sol.map_at(lam)
    payload: dict[str, Any] = {"family": fid, "lambda": lam}
    # the identity check needs enough terms for its tail to decay and
    # sample points scaled to the map's leading coefficient: with
    # |z| = 8 r |w| / 2 the term ratio stays at 1/4 for every family
    identity_n = min(12, max(4, _depth(cfg) - 4))
    r = abs(L.coeff(1))
    if sol.kind == DKP:
        fab = FaberSet.build(L, cfg.n_max)
        defect = faber_generating_check(L, identity_n, z_points=(8.0 * r,), w_points=(-2.0,))
        payload["chi"] = {str(n): sol.coefficient(n, lam) for n in range(1, cfg.n_max + 1)}
    else:
        Lt = sol.interior_at(lam)
        sigma = complex(sol.point_at(lam))
        fab = FaberSet.build(L, cfg.n_max, Ltilde=Lt)
        defect = faber_generating_check(
            L,
            identity_n,
            z_points=(8.0 * r,),
            w_points=(-2.0 * sigma,),
            Ltilde=Lt,
            interior_z_points=(0.05,),
            interior_w_points=(-0.5 * sigma,),
        )
        payload["xi"] = {
            str(n): sol.coefficient(n, lam)
            for n in range(-cfg.n_max, cfg.n_max + 1)
        }
    payload["phi"] = [_series_payload(p) for p in fab.phi]
    if fab.psi is not None:
        payload["psi"] = [_series_payload(p) for p in fab.psi]
    payload["generating_defect"] = defect
    payload["checks"] = {"generating_identity": defect < cfg.tolerance}
    return payload


def _run_grunsky(cfg: RunConfig) -> dict[str, Any]:
    fid = _resolve_family(cfg)
    sol = _make_reduction(cfg, fid)
    lam = _eval_lambda(cfg, fid)
    g = sol.map_at(lam)
    f = sol.interior_at(lam) if sol.kind == DTODA else None
    M = cfg.n_max
    table = grunsky(f, g, M)
    defect = float(np.max(np.abs(table.data - table.data.T)))
    payload = {
        "family": fid,
        "lambda": lam,
        "M": M,
        "r": table.r,
        "half_table": table.half,
        "symmetry_defect": defect,
        "sample_entries": {
            "b_1_1": table.b(1, 1),
            "b_1_2": table.b(1, 2),
            "b_2_2": table.b(2, 2),
        },
        "checks": {"symmetry": defect < cfg.grunsky_tol},
    }
    return payload


def _run_loewner(cfg: RunConfig) -> dict[str, Any]:
    if cfg.table is not None:
        data = _read_driving_table(cfg.table, cfg.geometry)
        grid = (float(data["lam"][0]), float(data["lam"][-1]))
        if cfg.geometry == "chordal":
            driving = ChordalDriving.from_table(data["lam"], data["u"], data["a1"])
            family = integrate_chordal(driving, Series.w(depth=_depth(cfg)), grid, step=cfg.rk4_step)
        else:
            driving = RadialDriving.from_table(data["lam"], data["sigma"], data["phi"])
            family = integrate_radial(driving, Series.w(depth=_depth(cfg)), grid, step=cfg.rk4_step)
        norm = family.normalization_error()
        return {
            "source": "table",
            "grid": list(grid),
            "final_map": _series_payload(family.final),
            "normalization_error": norm,
            "checks": {"normalization": norm < cfg.tolerance},
        }
    fid = _resolve_family(cfg)
    defaults = FAMILY_DEFAULTS[fid]
    lo, hi = cfg.window if cfg.window is not None else defaults["loewner_window"]
    depth = cfg.depth if cfg.depth is not None else defaults["loewner_depth"]
    params = _family_params(cfg, fid)
    reference = closed_form_family(fid, (lo, hi), params, depth=depth)
    if reference.orientation == Orientation.HALF_PLANE_H:
        family = integrate_chordal(reference.driving, reference.maps[0], (lo, hi), step=cfg.rk4_step)
    else:
        family = integrate_radial(reference.driving, reference.maps[0], (lo, hi), step=cfg.rk4_step)
    a, b = family.final, reference.final
    drift = max(
        abs(a.coeff(k) - b.coeff(k)) for k in range(max(a.lo, b.lo), min(a.hi, b.hi) + 1)
    )
    return {
        "family": fid,
        "grid": [lo, hi],
        "rk4_step": cfg.rk4_step,
        "final_map": _series_payload(family.final),
        "closed_form_error": drift,
        "checks": {"closed_form_match": drift < cfg.loewner_tol},
    }


def _run_hodograph(cfg: RunConfig) -> dict[str, Any]:
    if cfg.example is None:
        # no coefficient data: the residual degenerates to base - R(lambda)
        # with R(lambda) = lambda, whose root is the base time itself
        t = _times_for(cfg, None)
        if t.support():
            raise ConfigError("time entries beyond the base slot need --example for coefficients")
        window = cfg.window if cfg.window is not None else (0.0, 1.5)
        lam = hodograph_solve({}, lambda l: l, t, window, tol=cfg.root_tol)
        residual = hodograph_residual({}, lambda l: l, t)(lam)
        return {
            "kind": t.kind,
            "lambda": lam,
            "residual": residual,
            "checks": {"root_found": abs(residual) < cfg.root_tol},
        }
    fid = _resolve_family(cfg)
    sol = _make_reduction(cfg, fid)
    t = _times_for(cfg, fid)
    lam = sol.solve(t, tol=cfg.root_tol)
    residual = hodograph_residual(sol.coefficient_fns(t.support()), sol.r_func, t)(lam)
    return {
        "family": fid,
        "kind": t.kind,
        "lambda": lam,
        "residual": residual,
        "coefficients": {str(n): sol.coefficient(n, lam) for n in t.support()},
        "checks": {"root_found": abs(residual) < cfg.root_tol},
    }


def _run_build_lax(cfg: RunConfig) -> dict[str, Any]:
    fid = _resolve_family(cfg)
    sol = _make_reduction(cfg, fid)
    t = _times_for(cfg, fid)
    L, Ltilde = build_lax(sol, t, tol=cfg.root_tol)
    payload = {
        "family": fid,
        "kind": sol.kind,
        "lambda": sol.lam_star,
        "lax": _series_payload(L),
        "checks": {"root_found": True},
    }
    if Ltilde is not None:
        payload["lax_interior"] = _series_payload(Ltilde)
    return payload


def _flow_triples(kind: str, flows: tuple[int, ...]) -> list[tuple[int, int, int]]:
    if kind == DKP:
        top = max(flows) if flows else 2
        return [(1, 1, min(top, 3))]
    return [(0, 1, 1), (1, -1, 1)]


def _run_verify(cfg: RunConfig) -> dict[str, Any]:
    fid = _resolve_family(cfg)
    sol = _make_reduction(cfg, fid)
    t = _times_for(cfg, fid)
    flows = t.support()
    if not flows:
        raise ConfigError("verification needs at least one active flow in the times block")
    checks: dict[str, bool] = {}
    residuals: list[dict[str, Any]] = []
    for n in flows:
        if sol.kind == DKP:
            report = lax_residual_dkp(sol, t, n, fd_step=cfg.fd_step, tolerance=cfg.tolerance)
        else:
            report = lax_residual_dtoda(sol, t, n, fd_step=cfg.fd_step, tolerance=cfg.tolerance)
        residuals.append(report.summary())
        checks[f"lax n={n}"] = report.passed
    hydro: list[dict[str, Any]] = []
    for n in flows:
        value = hydro_residual(sol, t, n, fd_step=cfg.fd_step)
        hydro.append({"flow": n, "relative_residual": value, "tolerance": cfg.sym_tol})
        checks[f"hydro n={n}"] = value < cfg.sym_tol
    symmetry: list[dict[str, Any]] = []
    cache: dict[Any, Any] = {}
    for triple in _flow_triples(sol.kind, flows):
        value = grunsky_flow_symmetry(sol, t, triple, fd_step=cfg.sym_fd_step, cache=cache)
        symmetry.append({"triple": list(triple), "discrepancy": value, "tolerance": cfg.sym_tol})
        checks[f"flow symmetry {triple}"] = value < cfg.sym_tol
    return {
        "family": fid,
        "kind": sol.kind,
        "lax_residuals": residuals,
        "hydro_residuals": hydro,
        "flow_symmetry": symmetry,
        "checks": checks,
    }


_CURVES = {
    "real_line": CurveSpec.real_line,
    "half_ray": CurveSpec.half_ray,
    "circle_arc": CurveSpec.unit_circle_arc,
}


def _run_coulomb(cfg: RunConfig) -> dict[str, Any]:
    maker = _CURVES.get(cfg.curve)
    if maker is None:
        raise ConfigError(f"unknown curve {cfg.curve!r}; known: {', '.join(sorted(_CURVES))}")
    curve = maker()
    entries = cfg.entries if cfg.entries is not None else {2: -0.5 + 0.0j}
    for n in entries:
        if n < 1:
            raise ConfigError(f"coulomb couplings use positive indices; got {n}")
    try:
        state = initial_state(curve, cfg.n_charges, entries, hbar=cfg.hbar, seed=cfg.seed)
        result = relax(state, curve, max_iters=cfg.max_iters, tol=cfg.relax_tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    info = support(result.state, gap_ratio=cfg.gap_ratio)
    z = curve.gamma(result.state.s)
    lines = ["s,re_z,im_z"]
    for sk, zk in zip(result.state.s, z):
        lines.append(f"{_fmt(sk)},{_fmt(zk.real)},{_fmt(zk.imag)}")
    positions_path = Path(cfg.out_dir) / cfg.positions_name
    _atomic_write(positions_path, "\n".join(lines) + "\n")
    checks = {"relaxed": result.converged, "single_arc": not info.gapped}
    payload: dict[str, Any] = {
        "curve": cfg.curve,
        "n": cfg.n_charges,
        "hbar": cfg.hbar,
        "seed": cfg.seed,
        "energy": result.energy,
        "iterations": result.iterations,
        "max_gradient": result.max_gradient,
        "support": {"lo": info.lo, "hi": info.hi, "gapped": info.gapped},
        "artifacts": {"positions": cfg.positions_name},
    }
    if not info.gapped and cfg.curve == "real_line" and cfg.n_charges >= 3:
        report = exterior_map_check(result.state)
        payload["exterior_map"] = report.as_dict()
        checks["map_identity"] = report.identity_ok
    # the relaxed endpoint and the hodograph root are reported side by
    # side; no tolerance ties them together
    if cfg.example is not None:
        fid = _resolve_family(cfg)
        if _family_kind(fid) != DTODA:
            raise ConfigError("endpoint comparison needs a lattice-kind family")
        sol = _make_reduction(cfg, fid)
        t = TimeVector.dtoda(cfg.hbar * cfg.n_charges, entries)
        try:
            payload["hodograph_lambda"] = sol.solve(t, tol=cfg.root_tol)
        except (NoRootError, NonRealResidualError) as exc:
            payload["hodograph_lambda"] = None
            payload["hodograph_note"] = str(exc)
    payload["checks"] = checks
    return payload


def _run_golden(cfg: RunConfig) -> dict[str, Any]:
    fid = _resolve_family(cfg)
    sol = _make_reduction(cfg, fid)
    t = _times_for(cfg, fid)
    lam = sol.solve(t, tol=cfg.root_tol)
    residual = hodograph_residual(sol.coefficient_fns(t.support()), sol.r_func, t)(lam)
    checks: dict[str, bool] = {"hodograph_root": abs(residual) < cfg.root_tol * 10.0}
    lax_reports: list[dict[str, Any]] = []
    for n in t.support():
        if sol.kind == DKP:
            report = lax_residual_dkp(sol, t, n, fd_step=cfg.fd_step, tolerance=cfg.tolerance)
        else:
            report = lax_residual_dtoda(sol, t, n, fd_step=cfg.fd_step, tolerance=cfg.tolerance)
        lax_reports.append(report.summary())
        checks[f"lax n={n}"] = report.passed
    return {
        "family": fid,
        "kind": sol.kind,
        "lambda": lam,
        "hodograph_residual": residual,
        "coefficients": {str(n): sol.coefficient(n, lam) for n in t.support()},
        "lax_residuals": lax_reports,
        "checks": checks,
    }


_DISPATCH = {
    "faber": _run_faber,
    "grunsky": _run_grunsky,
    "loewner": _run_loewner,
    "hodograph": _run_hodograph,
    "build-lax": _run_build_lax,
    "verify": _run_verify,
    "coulomb": _run_coulomb,
    "golden": _run_golden,
}


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    def d(key: str) -> str:
        return f"(default: {DEFAULTS[key]})"

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--out-dir", dest="out_dir", metavar="DIR",
                        help=f"output directory; SLITLAX_OUT is honored {d('out_dir')}")
    common.add_argument("--summary", dest="summary_name", metavar="NAME",
                        help=f"summary file name {d('summary_name')}")

    family = argparse.ArgumentParser(add_help=False)
    family.add_argument("--example", metavar="ID",
                        help="closed-form family id or catalogue alias "
                             f"({', '.join(EXAMPLE_IDS)}; {', '.join(FAMILY_ALIASES)})")
    family.add_argument("--param", dest="params", action="append", metavar="NAME=VALUE",
                        help="family parameter, e.g. u=0.3 or sigma=0.6+0.8j "
                             "(default: curated per family)")
    family.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"),
                        help="lambda window (default: curated per family)")
    family.add_argument("--depth", type=int, help=f"series window depth {d('depth')}")
    family.add_argument("--lam", type=float,
                        help="evaluation point for map-level commands (default: window midpoint)")
    family.add_argument("--n-max", dest="n_max", type=int,
                        help=f"highest polynomial / table index {d('n_max')}")

    times = argparse.ArgumentParser(add_help=False)
    times.add_argument("--kind", choices=(DKP, DTODA),
                       help="hierarchy kind (default: inferred from the family, else dtoda)")
    times.add_argument("--x", type=float, help="base variable for kind=dkp (default: curated)")
    times.add_argument("--t0", type=float, help="base variable for kind=dtoda (default: curated)")
    times.add_argument("--times", dest="entries", metavar="JSON",
                       help='time couplings as JSON, e.g. \'{"1": 0.1, "3": -0.4}\' '
                            "or values as [re, im] pairs (default: curated per family)")

    numeric = argparse.ArgumentParser(add_help=False)
    numeric.add_argument("--rk4-step", dest="rk4_step", type=float,
                         help=f"integrator step in lambda {d('rk4_step')}")
    numeric.add_argument("--fd-step", dest="fd_step", type=float,
                         help=f"finite-difference step in time {d('fd_step')}")
    numeric.add_argument("--tolerance", type=float,
                         help=f"residual tolerance for pass/fail checks {d('tolerance')}")
    numeric.add_argument("--root-tol", dest="root_tol", type=float,
                         help=f"hodograph root tolerance {d('root_tol')}")
    numeric.add_argument("--loewner-tol", dest="loewner_tol", type=float,
                         help=f"closed-form match tolerance {d('loewner_tol')}")
    numeric.add_argument("--grunsky-tol", dest="grunsky_tol", type=float,
                         help=f"table symmetry tolerance {d('grunsky_tol')}")
    numeric.add_argument("--sym-fd-step", dest="sym_fd_step", type=float,
                         help=f"finite-difference step for flow-symmetry checks {d('sym_fd_step')}")
    numeric.add_argument("--sym-tol", dest="sym_tol", type=float,
                         help=f"flow-symmetry and transport tolerance {d('sym_tol')}")

    parser = argparse.ArgumentParser(
        prog="slitlax",
        description="Slit-growth reductions: series pipelines with JSON summaries.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("faber", parents=[common, family, numeric],
                   help="polynomial families and their derivative coefficients at one lambda")
    sub.add_parser("grunsky", parents=[common, family, numeric],
                   help="pairing table and its symmetry defect at one lambda")
    p_loewner = sub.add_parser("loewner", parents=[common, family, numeric],
                               help="integrate a driving table or rerun a closed-form family")
    p_loewner.add_argument("--driving", dest="table", metavar="CSV",
                           help="driving table: chordal lam,u,a1 / radial lam,re_sigma,im_sigma,phi")
    p_loewner.add_argument("--geometry", choices=("chordal", "radial"),
                           help=f"table geometry {d('geometry')}")
    sub.add_parser("hodograph", parents=[common, family, times, numeric],
                   help="solve the time-to-lambda relation")
    sub.add_parser("build-lax", parents=[common, family, times, numeric],
                   help="assemble the generating series at the solved root")
    sub.add_parser("verify", parents=[common, family, times, numeric],
                   help="residual checks: Lax flows, transport, flow symmetry")
    p_coulomb = sub.add_parser("coulomb", parents=[common, numeric],
                               help="relax a log-gas on a curve; positions CSV plus JSON report")
    p_coulomb.add_argument("--curve", choices=sorted(_CURVES), help=f"curve {d('curve')}")
    p_coulomb.add_argument("--N", dest="n_charges", type=int,
                           help=f"particle count {d('n_charges')}")
    p_coulomb.add_argument("--times", dest="entries", metavar="JSON",
                           help='couplings as JSON, e.g. \'{"2": -0.5}\' (default: {"2": -0.5})')
    p_coulomb.add_argument("--hbar", type=float, help=f"charge weight {d('hbar')}")
    p_coulomb.add_argument("--seed", type=int, help=f"initial-state seed {d('seed')}")
    p_coulomb.add_argument("--max-iters", dest="max_iters", type=int,
                           help=f"descent iteration cap {d('max_iters')}")
    p_coulomb.add_argument("--relax-tol", dest="relax_tol", type=float,
                           help=f"projected-gradient tolerance {d('relax_tol')}")
    p_coulomb.add_argument("--gap-ratio", dest="gap_ratio", type=float,
                           help=f"spacing ratio that flags a split support {d('gap_ratio')}")
    p_coulomb.add_argument("--example", metavar="ID",
                           help="optional lattice-kind family whose hodograph root is "
                                "reported next to the relaxed endpoint")
    p_coulomb.add_argument("--positions", dest="positions_name", metavar="NAME",
                           help=f"positions CSV name {d('positions_name')}")
    sub.add_parser("golden", parents=[common, family, times, numeric],
                   help="full pipeline: closed form, coefficients, root, Lax residuals")
    return parser


# ----------------------------------------------------------------------
# entry points
# ----------------------------------------------------------------------


def run(cfg: RunConfig) -> tuple[int, dict[str, Any]]:
    """Execute one configuration; returns (exit_code, summary_payload)."""
    payload: dict[str, Any] = {"schema": SCHEMA_VERSION, "subcommand": cfg.subcommand}
    try:
        payload.update(_DISPATCH[cfg.subcommand](cfg))
    except ConfigError as exc:
        payload.update(status="config-error", error=str(exc))
        code = EXIT_CONFIG
    except (ConfinementError, DrivingError) as exc:
        payload.update(status="config-error", error=str(exc))
        code = EXIT_CONFIG
    except (
        NoRootError,
        NonRealResidualError,
        IntegrationError,
        GrunskyConsistencyError,
        ConvergenceError,
    ) as exc:
        payload.update(status="numeric-error", error=str(exc))
        code = EXIT_NUMERIC
    else:
        checks = payload.get("checks", {})
        ok = all(checks.values())
        payload["status"] = "ok" if ok else "check-failed"
        code = EXIT_OK if ok else EXIT_CHECK_FAILED
    payload["exit_code"] = code
    return code, payload


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        return EXIT_CONFIG if code not in (0,) else 0
    out_dir = Path(getattr(ns, "out_dir", None) or os.environ.get("SLITLAX_OUT") or ".")
    summary_name = getattr(ns, "summary_name", None) or DEFAULTS["summary_name"]
    try:
        cfg = _config_from_namespace(ns)
    except ConfigError as exc:
        payload = {
            "schema": SCHEMA_VERSION,
            "subcommand": ns.subcommand,
            "status": "config-error",
            "error": str(exc),
            "exit_code": EXIT_CONFIG,
        }
        _write_summary(out_dir / summary_name, payload)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, payload = run(cfg)
    _write_summary(Path(cfg.out_dir) / cfg.summary_name, payload)
    if payload.get("error"):
        print(f"error: {payload['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
