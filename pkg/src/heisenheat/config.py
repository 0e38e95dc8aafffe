"""Flat ``key = value`` configuration files and their per-command schemas.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Every key must belong to the command's schema.  Values given on the
command line replace file values.  All defaults are materialized so the
resolved mapping fully describes a run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from ._validation import check_exponent, check_odd_nodes, check_positive

__all__ = ["ConfigError", "Key", "SCHEMAS", "read_config_file", "resolve_config", "COMMANDS"]


class ConfigError(ValueError):
    """Bad configuration; the message names the offending key."""


def _float_list(s) -> tuple:
    if isinstance(s, (list, tuple)):
        return tuple(float(v) for v in s)
    parts = [v for v in str(s).replace(";", ",").split(",") if v.strip()]
    return tuple(float(v) for v in parts)


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    if s is None or str(s).strip().lower() in ("", "none"):
        return None
    return float(s)


@dataclass(frozen=True)
class Key:
    kind: object
    default: object
    check: object = None
    help: str = ""


def _pos(name):
    return lambda v: check_positive(name, v)


def _odd(name):
    return lambda v: check_odd_nodes(name, v)


def _p(v):
    check_exponent(v)


def _choice(*opts):
    def f(v):
        if v not in opts:
            raise ValueError(f"must be one of {', '.join(opts)}")
    return f


def _all_pos(v):
    if not v or any(not (x > 0 and math.isfinite(x)) for x in v):
        raise ValueError("must be a nonempty list of positive numbers")


def _at_least_three(v):
    if v < 3:
        raise ValueError("must be >= 3")


def _ratio(v):
    if not 0 < v < 1:
        raise ValueError("must lie in (0, 1)")


def _unit_safety(v):
    if not 0 < v <= 1:
        raise ValueError("must lie in (0, 1]")


def _grid(L_xy, L_tau, N):
    return {
        "n": Key(int, 1, lambda v: check_positive("n", v), "Heisenberg dimension"),
        "L_xy": Key(float, L_xy, _pos("L_xy"), "horizontal half-width"),
        "L_tau": Key(float, L_tau, _pos("L_tau"), "vertical half-width"),
        "N_xy": Key(int, N, _odd("N_xy"), "nodes per horizontal axis"),
        "N_tau": Key(int, N, _odd("N_tau"), "nodes on the tau axis"),
    }


SCHEMAS: dict[str, dict[str, Key]] = {
    "kernel": {
        **_grid(3.5, 7.0, 65),
        "t": Key(_float_list, (0.25,), _all_pos, "kernel times"),
        "t_ref": Key(float, 1.0, _pos("t_ref"), "reference time of the scaling check"),
        "safety": Key(float, 0.4, _unit_safety, "fraction of the stability bound"),
        "mollifier": Key(float, 0.0, lambda v: check_positive("mollifier", v, True),
                         "Gaussian width of the initial approximate identity (0 = single node)"),
        "checks": Key(str, "mass,positivity,sandwich,semigroup,scaling", None, "checks deciding the exit code"),
        "write_fields": Key(_bool, True, None, "write .hfield snapshots"),
    },
    "solve": {
        **_grid(12.0, 144.0, 65),
        "p": Key(float, 1.25, _p),
        "epsilon": Key(float, 1.0, _pos("epsilon")),
        "u0": Key(str, "compact_bump", _choice("compact_bump", "weighted_decay", "constant")),
        "R0": Key(float, 1.0, _pos("R0"), "compact_bump support parameter"),
        "u0_kappa": Key(float, 2.0, _pos("u0_kappa"), "weighted_decay exponent"),
        "boundary": Key(str, "dirichlet", _choice("dirichlet", "periodic")),
        "t_max": Key(float, 1e4, _pos("t_max")),
        "dt_safety": Key(float, 0.4, _unit_safety),
        "c_nl": Key(float, 0.05, _pos("c_nl"), "cap on the per-step ODE growth"),
        "threshold": Key(_opt_float, None, None, "blow-up threshold (default 1e4 * epsilon)"),
        "kappa": Key(_opt_float, None, None, "weight exponent of the monitored norm"),
        "record_every": Key(int, 1, _pos("record_every")),
        "snapshots": Key(_float_list, (), None, "times at which fields are written"),
    },
    "sweep": {
        **_grid(12.0, 144.0, 65),
        "p": Key(float, 1.25, _p),
        "eps0": Key(float, 2.0, _pos("eps0"), "largest epsilon"),
        "count": Key(int, 6, _at_least_three, "number of epsilons"),
        "ratio": Key(float, 2 ** -0.5, _ratio, "ladder ratio"),
        "R0": Key(float, 1.0, _pos("R0")),
        "grid_mode": Key(str, "common", _choice("common", "policy"),
                         "one grid for every run, or grid_policy per run"),
        "expected_T0": Key(float, 10.0, _pos("expected_T0"), "lifespan guess for eps0 (policy mode)"),
        "t_max": Key(float, 1e4, _pos("t_max")),
        "dt_safety": Key(float, 0.4, _unit_safety),
        "c_nl": Key(float, 0.05, _pos("c_nl")),
        "u0": Key(str, "compact_bump", _choice("compact_bump", "weighted_decay")),
        "u0_kappa": Key(float, 2.0, _pos("u0_kappa")),
    },
    "certify": {
        **_grid(12.0, 144.0, 65),
        "p": Key(float, 1.25, _p),
        "epsilon": Key(float, 2.0, _pos("epsilon")),
        "R0": Key(float, 1.0, _pos("R0")),
        "R": Key(_float_list, (1.0, 2.0, 4.0, 8.0, 16.0), _all_pos, "radii of the test functions"),
        "deriv_N": Key(int, 65, _odd("deriv_N"), "nodes per axis for the derivative checks"),
        "snapshots": Key(int, 48, _pos("snapshots"), "log-spaced snapshot count"),
        "c_nl": Key(float, 0.05, _pos("c_nl")),
        "dt_safety": Key(float, 0.4, _unit_safety),
        "si2_slack": Key(float, 0.02, lambda v: check_positive("si2_slack", v, True)),
    },
    "mild": {
        **_grid(8.0, 64.0, 33),
        "p": Key(float, 2.0, _p),
        "epsilon": Key(float, 0.1, _pos("epsilon")),
        "kappa": Key(float, 2.0, _pos("kappa")),
        "T": Key(float, 2.0, _pos("T")),
        "m": Key(int, 16, _pos("m"), "time intervals of the Picard grid"),
        "iterations": Key(int, 8, _pos("iterations")),
        "probes": Key(int, 20, lambda v: check_positive("probes", v, True)),
        "radius": Key(float, 2.0, _pos("radius"), "ball radius in units of epsilon"),
        "max_probe_ratio": Key(float, 0.6, _pos("max_probe_ratio")),
        "max_residual_ratio": Key(float, 0.7, _pos("max_residual_ratio")),
    },
    "estimates": {
        **_grid(6.0, 36.0, 49),
        "wide_L_xy": Key(float, 20.0, _pos("wide_L_xy"), "box for slowly decaying weights (kappa < Q)"),
        "wide_L_tau": Key(float, 400.0, _pos("wide_L_tau")),
        "wide_N": Key(int, 97, _odd("wide_N")),
        "kappas": Key(_float_list, (6.0, 2.0), _all_pos),
        "alphas": Key(_float_list, (2.0, 3.0), _all_pos),
        "linear_times": Key(_float_list, (0.2, 0.4, 0.8), _all_pos),
        "duhamel_times": Key(_float_list, (0.25, 0.5, 1.0), _all_pos),
        "endpoint_times": Key(_float_list, (0.25, 0.5, 1.0, 2.0, 4.0), _all_pos,
                              "times for alpha = 1 + Q/2"),
        "steps_per_unit": Key(int, 8, _pos("steps_per_unit")),
    },
}

COMMANDS = tuple(SCHEMAS)


def read_config_file(path) -> dict:
    """Raw ``key -> string`` pairs from a flat config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if k in out:
            raise ConfigError(f"{path}:{lineno}: key '{k}' given twice")
        out[k] = v
    return out


def resolve_config(command: str, file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then file values, then overrides; each value converted and checked."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    schema = SCHEMAS[command]
    merged: dict = {}
    for source in (file_values or {}, overrides or {}):
        for k, v in source.items():
            if k not in schema:
                raise ConfigError(f"unknown key '{k}' for command '{command}'")
            merged[k] = v
    out = {}
    for k, spec in schema.items():
        raw = merged.get(k, spec.default)
        try:
            val = spec.kind(raw) if raw is not None and k in merged else raw
            if spec.check is not None and val is not None:
                spec.check(val)
        except (TypeError, ValueError) as e:
            msg = str(e)
            if k == "p" and "p must exceed 1" in msg:
                raise ConfigError("p must exceed 1") from None
            raise ConfigError(f"invalid value for '{k}': {raw!r} ({msg})") from None
        out[k] = val
    return out
