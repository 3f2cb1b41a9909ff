"""Run configuration files (TOML).

A minimal file::

    [equation]
    a = "-1"
    b = "0"
    c = "1"
    d = "-0.3849 * sin(t)^2"

    [interval]
    t0 = 0
    t1 = 50

Optional tables: ``[[references]]`` (reference equations, same keys as
``[equation]``), ``[partition]`` (``points = [...]`` or ``start``/``period``/
``count``), ``[witnesses]`` (``eta``, ``y1``, ``y2``, ``y1_init``,
``y2_init``, ``gamma``, ``gamma1``, ``gamma2``, ``direction``), ``[solver]``
(:class:`SolveOptions` fields), ``[closed]`` (``strategy``, ``T``) and
``[outputs]`` (``dir``).  Numeric fields may be written as constant
expressions such as ``"pi"`` or ``"sqrt(3)/3"``.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .expr import ExprError, ExprSyntaxError, parse
from .global_existence import Partition
from .integrate import SolveOptions
from .model import AbelEquation, Interval

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]

_COEFFS = ("a", "b", "c", "d")
_SOLVER_KEYS = ("rel_tol", "abs_tol", "y_max", "max_steps", "dense_output")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with ``file:line:``."""

    def __init__(self, message: str, source: str = "<config>", line: Optional[int] = None):
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


@dataclass
class RunConfig:
    equation: AbelEquation
    references: list = field(default_factory=list)
    interval: Optional[Interval] = None
    horizon: Optional[float] = None
    partition: Optional[Partition] = None
    witnesses: dict = field(default_factory=dict)
    solver: SolveOptions = field(default_factory=SolveOptions)
    closed: dict = field(default_factory=dict)
    outputs: Optional[Path] = None
    source: str = "<config>"

    def reference(self, index: int) -> AbelEquation:
        try:
            return self.references[index]
        except IndexError:
            raise ConfigError(f"reference equation #{index + 1} is required", self.source) from None

    def witness(self, name: str):
        if name not in self.witnesses:
            raise ConfigError(f"missing witness: {name}", self.source)
        return self.witnesses[name]


class _Locator:
    """Maps table keys back to line numbers for error messages."""

    def __init__(self, text: str, source: str):
        self.lines = text.splitlines()
        self.source = source

    def line_of(self, key: str, table: Optional[str] = None) -> Optional[int]:
        in_table = table is None
        pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
        for i, line in enumerate(self.lines, 1):
            head = re.match(r"^\s*\[+\s*([\w.]+)\s*\]+", line)
            if head:
                in_table = table is None or head.group(1) == table
                continue
            if in_table and pat.match(line):
                return i
        return None

    def error(self, message: str, key: Optional[str] = None, table: Optional[str] = None) -> ConfigError:
        line = self.line_of(key, table) if key else None
        return ConfigError(message, self.source, line)


def _number(value, loc: _Locator, key: str, table: str) -> float:
    if isinstance(value, bool):
        raise loc.error(f"{table}.{key} must be a number", key, table)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            expr = parse(value)
            if not expr.is_constant:
                raise loc.error(f"{table}.{key} must not depend on t", key, table)
            return float(expr.eval(0.0))
        except ExprError as exc:
            raise loc.error(f"{table}.{key}: {exc}", key, table) from None
    raise loc.error(f"{table}.{key} must be a number", key, table)


def _equation(table: dict, loc: _Locator, name: str) -> AbelEquation:
    missing = [k for k in _COEFFS if k not in table]
    if missing:
        raise loc.error(f"{name} is missing coefficient(s) {', '.join(missing)}")
    exprs = {}
    for k in _COEFFS:
        v = table[k]
        text = repr(float(v)) if isinstance(v, (int, float)) and not isinstance(v, bool) else str(v)
        try:
            exprs[k] = parse(text)
        except ExprSyntaxError as exc:
            raise loc.error(f"{name}.{k}: {exc}", k, name) from None
    return AbelEquation(exprs["a"], exprs["b"], exprs["c"], exprs["d"], str(table.get("label", "")))


def parse_config(text: str, source: str = "<config>", base_dir: Optional[Path] = None) -> RunConfig:
    """Build a :class:`RunConfig` from TOML text."""
    loc = _Locator(text, source)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), source, int(m.group(1)) if m else None) from None

    if "equation" not in data:
        raise ConfigError("missing [equation] table", source)
    cfg = RunConfig(equation=_equation(data["equation"], loc, "equation"), source=source)
    cfg.references = [_equation(r, loc, "references") for r in data.get("references", [])]

    iv = data.get("interval")
    if iv is not None:
        t0 = _number(iv.get("t0", 0.0), loc, "t0", "interval")
        if "horizon" in iv:
            cfg.horizon = _number(iv["horizon"], loc, "horizon", "interval")
        t1 = _number(iv["t1"], loc, "t1", "interval") if "t1" in iv else math.inf
        try:
            cfg.interval = Interval(t0, t1, bool(iv.get("closed_right", False)))
        except ValueError as exc:
            raise loc.error(str(exc), "t1" if "t1" in iv else "t0", "interval") from None

    part = data.get("partition")
    if part is not None:
        try:
            if "points" in part:
                pts = [_number(p, loc, "points", "partition") for p in part["points"]]
                cfg.partition = Partition(tuple(pts))
            else:
                start = _number(part.get("start", cfg.interval.t0 if cfg.interval else 0.0), loc, "start", "partition")
                period = _number(part["period"], loc, "period", "partition")
                count = part.get("count")
                cfg.partition = Partition.regular(start, period, int(count) if count is not None else None)
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise loc.error(f"invalid partition: {exc}", None) from None

    for key, value in data.get("witnesses", {}).items():
        if key in ("eta", "y1", "y2"):
            if isinstance(value, str):
                try:
                    value = parse(value)
                except ExprSyntaxError as exc:
                    raise loc.error(f"witnesses.{key}: {exc}", key, "witnesses") from None
            else:
                value = _number(value, loc, key, "witnesses")
        elif key == "direction":
            if value not in ("below", "above"):
                raise loc.error("witnesses.direction must be 'below' or 'above'", key, "witnesses")
        else:
            value = _number(value, loc, key, "witnesses")
        cfg.witnesses[key] = value

    solver = data.get("solver", {})
    unknown = set(solver) - set(_SOLVER_KEYS)
    if unknown:
        raise loc.error(f"unknown solver option(s): {', '.join(sorted(unknown))}", sorted(unknown)[0], "solver")
    try:
        cfg.solver = SolveOptions(
            **{k: (v if k in ("max_steps", "dense_output") else _number(v, loc, k, "solver")) for k, v in solver.items()}
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise loc.error(f"invalid solver options: {exc}") from None

    closed = dict(data.get("closed", {}))
    if "T" in closed:
        closed["T"] = _number(closed["T"], loc, "T", "closed")
    cfg.closed = closed

    out = data.get("outputs", {}).get("dir")
    if out is not None:
        p = Path(out)
        cfg.outputs = p if p.is_absolute() or base_dir is None else base_dir / p
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path), path.parent)
