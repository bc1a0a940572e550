"""Experiment configuration files.

The format is a flat list of sections with ``key = value`` lines::

    # comments start with '#'
    [run]
    command = geodesic
    seed = 1

    [geodesic]
    n = 8
    tau_end = 1.0

Every key is validated against :data:`SCHEMA`; diagnostics carry the line
number, and expression values are parsed immediately so grammar errors
report their column within the line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError, ExpressionError
from .expr import Expression, parse_list

COMMANDS = ("dual-metric", "eigen", "transform-check", "embed", "geodesic", "repro")


def _int(s):
    return int(s)


def _float(s):
    return float(s)


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _str(s):
    return s


def _ints(s):
    return tuple(int(p) for p in s.replace(",", " ").split())


def _floats(s):
    return tuple(float(p) for p in s.replace(",", " ").split())


def _matrix(s):
    rows = [r for r in s.split(";") if r.strip()]
    out = [_floats(r) for r in rows]
    if len({len(r) for r in out}) != 1 or len(out) != len(out[0]):
        raise ValueError("matrix must be square, rows separated by ';'")
    return out


def _choice(*options):
    def conv(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s

    return conv


# expression-valued keys: (variables, allow a comma-separated list)
_EXPR_X = ("expr", ("x",), False)
_EXPR_Y = ("expr", ("y",), False)
_EXPR_T_LIST = ("expr", ("t",), True)

SCHEMA = {
    "run": {"command": _choice(*COMMANDS), "seed": _int, "out": _str},
    "grid": {"lo": _float, "hi": _float, "points": _int, "periodic": _bool, "dim": _int,
             "signature": _ints},
    "kernel": {"family": _choice("gauss_rho", "gauss_metric", "minkowski_gauss", "chordal_circle"),
               "scale": _float},
    "dual-metric": {"pairs": _floats, "interior": _float},
    "eigen": {"operator": _choice("derivative", "position", "custom-diagonal"),
              "diagonal": _EXPR_X, "max_abs": _float},
    "transform": {"mode": _choice("separable", "first-order"), "a": _EXPR_X, "b": _EXPR_Y,
                  "g": _EXPR_Y, "C": _float, "C1": _float, "y_lo": _float, "y_hi": _float,
                  "y_points": _int, "y_periodic": _bool},
    "path": {"a": _EXPR_T_LIST, "t0": _float, "t1": _float, "steps": _int},
    "geodesic": {"n": _int, "tau_end": _float, "steps": _int, "samples": _int,
                 "phi0": _choice("random", "e1"), "matrix": _matrix},
    "tolerances": None,  # free-form NAME = float, validated by the runner
}


@dataclass
class ExperimentConfig:
    command: str | None = None
    seed: int = 0
    out: str | None = None
    sections: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def line_of(self, section, key):
        return self.lines.get((section, key))


def parse_config(text):
    """Parse configuration text into an :class:`ExperimentConfig`.

    Raises :class:`ConfigError` for unknown sections or keys, malformed
    lines and values, duplicate keys, and expression errors (with the
    column inside the line).
    """
    cfg = ExperimentConfig()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("malformed section header", lineno, line.index("[") + 1)
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            cfg.sections.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, len(line) - len(line.lstrip()) + 1)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        value = value_part.strip()
        value_col = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        if not key:
            raise ConfigError("missing key", lineno, 1)
        if (section, key) in cfg.lines:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        cfg.lines[(section, key)] = lineno
        if section == "tolerances":
            try:
                cfg.tolerances[key] = float(value)
            except ValueError:
                raise ConfigError(f"tolerance {key!r} needs a number", lineno, value_col) from None
            continue
        schema = SCHEMA[section]
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        conv = schema[key]
        if isinstance(conv, tuple):
            _, variables, many = conv
            try:
                parsed = parse_list(value, variables) if many else Expression(value, variables)
            except ExpressionError as exc:
                msg = str(exc).rsplit(" (column", 1)[0]
                raise ConfigError(f"bad expression for {key!r}: {msg}", lineno,
                                  value_col + exc.column - 1) from None
        else:
            try:
                parsed = conv(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", lineno, value_col) from None
        cfg.sections[section][key] = parsed
    run = cfg.sections.get("run", {})
    cfg.command = run.get("command")
    cfg.seed = run.get("seed", 0)
    cfg.out = run.get("out")
    return cfg


def require(cfg, section, key):
    """Fetch a required value or raise :class:`ConfigError` naming it."""
    val = cfg.get(section, key)
    if val is None:
        raise ConfigError(f"missing required field {key!r} in [{section}]")
    return val
