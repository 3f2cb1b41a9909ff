"""The cubic ODE ``y' + a(t) y^3 + b(t) y^2 + c(t) y + d(t) = 0`` and helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .expr import ExprAst, Unary, parse

__all__ = [
    "AbelEquation",
    "Interval",
    "CubicSection",
    "rhs",
    "residual",
    "cubic_roots",
    "solve_cubic",
    "fd_step",
]


def _as_expr(value) -> ExprAst:
    if isinstance(value, ExprAst):
        return value
    if isinstance(value, (int, float)):
        return parse(repr(float(value)))
    return parse(str(value))


def _negate(expr: ExprAst) -> ExprAst:
    return ExprAst(Unary("-", expr.root), f"-({expr.source})")


@dataclass(frozen=True)
class AbelEquation:
    """Coefficients ``a, b, c, d`` of the equation, each an :class:`ExprAst`."""

    a: ExprAst
    b: ExprAst
    c: ExprAst
    d: ExprAst
    label: str = ""

    @classmethod
    def from_strings(cls, a, b, c, d, label: str = "") -> "AbelEquation":
        return cls(_as_expr(a), _as_expr(b), _as_expr(c), _as_expr(d), label)

    def coefficients(self, t: float) -> tuple[float, float, float, float]:
        return self.a(t), self.b(t), self.c(t), self.d(t)

    def coefficients_array(self, t) -> tuple[np.ndarray, ...]:
        t = np.asarray(t, dtype=float)
        return (
            self.a.eval_array(t),
            self.b.eval_array(t),
            self.c.eval_array(t),
            self.d.eval_array(t),
        )

    def cubic_array(self, t, y) -> np.ndarray:
        """``a y^3 + b y^2 + c y + d`` evaluated elementwise."""
        a, b, c, d = self.coefficients_array(t)
        y = np.asarray(y, dtype=float)
        return ((a * y + b) * y + c) * y + d

    def reflected(self, label: Optional[str] = None) -> "AbelEquation":
        """Equation satisfied by ``-y`` whenever ``y`` solves this one."""
        return AbelEquation(
            self.a,
            _negate(self.b),
            self.c,
            _negate(self.d),
            label if label is not None else f"reflected({self.label})",
        )

    def probe(self, t0: float, t1: float, n: int = 257) -> None:
        """Evaluate every coefficient on ``n`` points of ``[t0, t1]``.

        Raises :class:`ExprDomainError` if any coefficient is undefined there.
        """
        grid = np.linspace(t0, t1, n)
        self.coefficients_array(grid)

    def rhs_function(self) -> Callable[[float, float], float]:
        """Return a fast scalar ``f(t, y)`` giving ``y'``."""
        a, b, c, d = self.a, self.b, self.c, self.d
        ca, cb, cc, cd = a._fast, b._fast, c._fast, d._fast

        def f(t, y):
            try:
                r = -(((ca(t) * y + cb(t)) * y + cc(t)) * y + cd(t))
            except (ValueError, ZeroDivisionError, OverflowError):
                return -(((a(t) * y + b(t)) * y + c(t)) * y + d(t))
            if r - r != 0.0:
                # inf/nan: either y is huge (fine) or a coefficient is bad
                return -(((a(t) * y + b(t)) * y + c(t)) * y + d(t))
            return r

        return f

    def describe(self) -> dict:
        return {
            "label": self.label,
            "a": self.a.source,
            "b": self.b.source,
            "c": self.c.source,
            "d": self.d.source,
        }


@dataclass(frozen=True)
class Interval:
    """``[t0, t1)`` or ``[t0, t1]``; ``t1`` may be ``inf``."""

    t0: float
    t1: float
    closed_right: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.t0) and self.t0 < self.t1):
            raise ValueError(f"invalid interval: t0={self.t0}, t1={self.t1}")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.t1)

    def truncated(self, horizon: float) -> "Interval":
        if self.bounded:
            return self
        return Interval(self.t0, self.t0 + horizon, closed_right=True)


@dataclass(frozen=True)
class CubicSection:
    """Real roots in ``y`` of the cubic at a fixed time ``t``."""

    t: float
    roots: tuple
    leading_sign: int
    degenerate: bool = False


def rhs(eq: AbelEquation, t: float, y: float) -> float:
    """``y'`` implied by the equation at ``(t, y)``."""
    a, b, c, d = eq.coefficients(t)
    return -(((a * y + b) * y + c) * y + d)


def fd_step(t: float) -> float:
    return 1e-5 * max(1.0, abs(t))


def residual(eq: AbelEquation, candidate: Callable[[float], float], grid: Sequence[float]) -> float:
    """Largest defect ``|eta' + a eta^3 + b eta^2 + c eta + d|`` over ``grid``.

    ``eta'`` is a central difference with step ``1e-5 * max(1, |t|)``.
    """
    worst = 0.0
    for t in grid:
        t = float(t)
        h = fd_step(t)
        deriv = (candidate(t + h) - candidate(t - h)) / (2.0 * h)
        eta = candidate(t)
        a, b, c, d = eq.coefficients(t)
        worst = max(worst, abs(deriv + ((a * eta + b) * eta + c) * eta + d))
    return worst


# --------------------------------------------------------------------------
# Cubic roots
# --------------------------------------------------------------------------

_DEGENERATE_REL = 1e-13
_EPS = 2.220446049250313e-16
_TRIPLE_REL = 1e3


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    if a == 0.0:
        if b == 0.0:
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    tol = 16.0 * _EPS * max(b * b, abs(4.0 * a * c), 1e-300)
    if disc < -tol:
        return []
    if disc <= tol:
        r = -b / (2.0 * a)
        return [r, r]
    s = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(s, b))
    roots = [q / a]
    roots.append(c / q if q != 0.0 else -b / a - roots[0])
    return roots


def _polish(coeffs, r: float) -> float:
    a, b, c, d = coeffs
    f = ((a * r + b) * r + c) * r + d
    df = (3.0 * a * r + 2.0 * b) * r + c
    if df == 0.0 or f == 0.0:
        return r
    cand = r - f / df
    fc = ((a * cand + b) * cand + c) * cand + d
    return cand if abs(fc) < abs(f) else r


def solve_cubic(a: float, b: float, c: float, d: float) -> tuple[tuple, bool]:
    """Real roots of ``a y^3 + b y^2 + c y + d`` sorted ascending.

    Repeated roots appear repeatedly.  Returns ``(roots, degenerate)``
    where ``degenerate`` flags a leading coefficient too small for the cubic
    formula, in which case the quadratic (or linear) remainder is solved.
    """
    if abs(a) < _DEGENERATE_REL * max(abs(b), abs(c), abs(d), 1.0):
        roots = _quadratic_roots(b, c, d)
        roots = [_polish((0.0, b, c, d), r) for r in roots]
        return tuple(sorted(roots)), True

    p2, p1, p0 = b / a, c / a, d / a
    shift = p2 / 3.0
    scale = max(abs(p2), math.sqrt(abs(p1)), abs(p0) ** (1.0 / 3.0))
    if scale == 0.0:
        return (0.0, 0.0, 0.0), False
    # depressed cubic x^3 + p x + q with y = x - shift, normalized by scale
    p = (p1 - p2 * p2 / 3.0) / scale**2
    q = (2.0 * p2**3 / 27.0 - p2 * p1 / 3.0 + p0) / scale**3
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    # rounding carried into p and q from the coefficients, propagated into
    # disc; a nonnegative disc below this is treated as a repeated root
    dp = 4.0 * _EPS * (abs(p1) + p2 * p2 / 3.0) / scale**2
    dq = 4.0 * _EPS * (2.0 * abs(p2) ** 3 / 27.0 + abs(p2 * p1) / 3.0 + abs(p0)) / scale**3
    disc_tol = 8.0 * (abs(q) / 2.0 * dq + (p / 3.0) ** 2 * dp + dq * dq / 4.0 + (dp / 3.0) ** 3)

    multiple = False
    if disc < 0.0 and p < 0.0:
        # three real roots; the trigonometric form stays accurate near repeats
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        phi = math.acos(min(1.0, max(-1.0, arg)))
        xs = [r * math.cos((phi - 2.0 * math.pi * k) / 3.0) for k in range(3)]
    elif disc <= disc_tol:
        multiple = True
        if abs(p) <= _TRIPLE_REL * max(dp, _EPS):
            x = -math.copysign(abs(q) ** (1.0 / 3.0), q)
            xs = [x, x, x]
        else:
            xs = [3.0 * q / p, -1.5 * q / p, -1.5 * q / p]
    else:
        s = math.sqrt(disc)
        u = -math.copysign((abs(q) / 2.0 + s) ** (1.0 / 3.0), q)
        xs = [u - p / (3.0 * u)] if u != 0.0 else [0.0]

    coeffs = (a, b, c, d)
    roots = []
    for x in xs:
        y = x * scale - shift
        roots.append(y if multiple else _polish(coeffs, y))
    return tuple(sorted(roots)), False


def cubic_roots(eq: AbelEquation, t: float) -> CubicSection:
    a, b, c, d = eq.coefficients(t)
    roots, degenerate = solve_cubic(a, b, c, d)
    return CubicSection(
        t=float(t),
        roots=roots,
        leading_sign=int(np.sign(a)),
        degenerate=degenerate,
    )
