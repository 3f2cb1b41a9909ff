"""Barrier checks, weighted sign conditions and comparison certificates.

Every hypothesis is checked on a dense sample grid, so a ``Holds`` verdict is
grid evidence rather than proof.  Certificates record which grid was used.

Conventions
-----------
``cubic(t, y) = a y^3 + b y^2 + c y + d`` so the equation reads
``y' + cubic(t, y) = 0``.  For a reference equation with cubic ``cubic_1``
and a solution ``y1`` of it, the discrepancy forcing is::

    B1(t) = cubic_1(t, y1) - cubic(t, y1)
          = (a1 - a) y1^3 + (b1 - b) y1^2 + (c1 - c) y1 + d1 - d

and the condition functional is::

    K(t) = gamma - y1(t0) + int_{t0}^{t} W(tau) B1(tau) dtau
    W(t) = exp(int_{t0}^{t} [c - b^2 / a])        (weight "full")
    W(t) = exp(int_{t0}^{t} [c - b^2 / (4 a)])    (weight "quarter")
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .expr import ExprAst, parse
from .integrate import SolveOptions, Trajectory, solve_ivp
from .model import AbelEquation, Interval, solve_cubic
from .quad import DEFAULT_CHEBYSHEV, DEFAULT_DENSITY, cumulative_weighted, make_grid

__all__ = [
    "HOLDS",
    "FAILS",
    "NOT_APPLICABLE",
    "Curve",
    "as_curve",
    "CheckResult",
    "Hypothesis",
    "Envelope",
    "Certificate",
    "WeightAccumulator",
    "EnvelopeSuggestion",
    "EnvelopeReport",
    "check_supersolution",
    "check_subsolution",
    "suggest_envelope",
    "weight_exponent",
    "weighted_functional",
    "condition_functional",
    "certify_thm31",
    "certify_thm32",
    "certify_thm33",
    "certify_thm34",
    "certify_thm35",
    "validate_envelope",
]

HOLDS = "Holds"
FAILS = "Fails"
NOT_APPLICABLE = "NotApplicable"

DEFAULT_HORIZON = 100.0
QUAD_RTOL = 1e-8
NOT_INTEGRABLE = "b^2/a not locally integrable (numerical)"

_EPS = np.finfo(float).eps
_ZERO_REL = 1e-13
# keeps exp(G - shift) finite; only kicks in when G itself is huge
_EXP_HEADROOM = 600.0


# --------------------------------------------------------------------------
# Curves: witnesses, reference solutions, envelope bounds
# --------------------------------------------------------------------------


class Curve:
    """A real function of time evaluated on arrays.

    ``span`` is the closed range on which the curve is defined (``None`` for
    everywhere).  Without an explicit derivative a central difference with
    step ``1e-5 * max(1, |t|)`` is used.
    """

    def __init__(self, fn, derivative=None, label: str = "", span=None):
        self._fn = fn
        self._derivative = derivative
        self.label = label
        self.span = span

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.asarray(self._fn(t), dtype=float)
        return np.broadcast_to(out, t.shape).copy() if out.shape != t.shape else out

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self._derivative is not None:
            out = np.asarray(self._derivative(t), dtype=float)
            return np.broadcast_to(out, t.shape).copy() if out.shape != t.shape else out
        h = 1e-5 * np.maximum(1.0, np.abs(t))
        return (self(t + h) - self(t - h)) / (2.0 * h)

    def value(self, t: float) -> float:
        return float(self(np.array([float(t)]))[0])

    def covers(self, t0: float, t1: float) -> bool:
        if self.span is None:
            return True
        lo, hi = self.span
        slack = 1e-12 * max(1.0, abs(t0), abs(t1))
        return lo <= t0 + slack and hi >= t1 - slack

    def __repr__(self):
        return f"Curve({self.label or '?'})"


def _constant_curve(v: float) -> Curve:
    v = float(v)
    return Curve(lambda t: np.full(np.shape(t), v), lambda t: np.zeros(np.shape(t)), label=repr(v))


def _vectorize(fn):
    def wrapped(t):
        try:
            out = np.asarray(fn(t), dtype=float)
            if out.shape in (t.shape, ()):
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(fn(float(x))) for x in np.ravel(t)]).reshape(t.shape)

    return wrapped


def as_curve(obj, label: str = "") -> Curve:
    """Coerce numbers, expression strings, ASTs, trajectories, sample pairs
    ``(t, y)`` and plain callables into a :class:`Curve`."""
    if isinstance(obj, Curve):
        return obj
    if isinstance(obj, Trajectory):
        return Curve(obj.at, obj.derivative_at, label or "trajectory", span=(obj.t[0], obj.t[-1]))
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return _constant_curve(float(obj))
    if isinstance(obj, str):
        obj = parse(obj)
    if isinstance(obj, ExprAst):
        if obj.is_constant:
            return _constant_curve(obj.eval(0.0))
        return Curve(obj.eval_array, label=label or obj.source)
    if isinstance(obj, tuple) and len(obj) == 2:
        ts = np.asarray(obj[0], dtype=float)
        ys = np.asarray(obj[1], dtype=float)
        slope = np.gradient(ys, ts)
        return Curve(
            lambda t: np.interp(t, ts, ys),
            lambda t: np.interp(t, ts, slope),
            label=label or "samples",
            span=(ts[0], ts[-1]),
        )
    if callable(obj):
        return Curve(_vectorize(obj), label=label or getattr(obj, "__name__", "callable"))
    raise TypeError(f"cannot use {type(obj).__name__} as a curve")


# --------------------------------------------------------------------------
# Results
# --------------------------------------------------------------------------


@dataclass
class CheckResult:
    """Outcome of a one-sided inequality checked at every grid point.

    ``worst`` is the ``(t, value)`` pair closest to (or furthest past) the
    bound.
    """

    passed: bool
    first_violation: Optional[tuple]
    worst: tuple
    n_points: int

    def __bool__(self):
        return self.passed

    def evidence(self) -> dict:
        ev = {"n_points": self.n_points, "worst": list(self.worst)}
        if self.first_violation is not None:
            ev["first_violation"] = list(self.first_violation)
        return ev


def _one_sided(grid, value, tol, sense: int) -> CheckResult:
    """``sense=+1`` requires ``value >= -tol``; ``sense=-1`` requires ``value <= tol``."""
    signed = sense * np.asarray(value, dtype=float)
    bad = ~(signed >= -tol)  # NaN counts as a violation
    k = int(np.argmin(np.where(np.isnan(signed), -np.inf, signed)))
    worst = (float(grid[k]), float(value[k]))
    if bad.any():
        i = int(np.argmax(bad))
        return CheckResult(False, (float(grid[i]), float(value[i])), worst, len(grid))
    return CheckResult(True, None, worst, len(grid))


@dataclass
class Hypothesis:
    """One named hypothesis of a theorem and the numbers behind its verdict.

    ``kind`` is ``"applicability"`` for hypotheses whose failure means the
    theorem does not apply (sign of ``a``, integrability, existence of a
    reference solution) and ``"condition"`` for the inequalities whose
    failure is a genuine counterexample on the grid.
    """

    name: str
    passed: bool
    evidence: dict = field(default_factory=dict)
    kind: str = "condition"


@dataclass
class Envelope:
    """Lower/upper bounds sampled on ``t``; a missing side is unbounded."""

    t: np.ndarray
    lower: Optional[np.ndarray]
    upper: Optional[np.ndarray]

    def contains(self, t, y, slack: float = 0.0) -> np.ndarray:
        lo = np.interp(t, self.t, self.lower) if self.lower is not None else -np.inf
        hi = np.interp(t, self.t, self.upper) if self.upper is not None else np.inf
        return (y >= lo - slack) & (y <= hi + slack)


@dataclass
class Certificate:
    """Verdict of a theorem check with the hypotheses and evidence behind it.

    ``verdict`` is one of :data:`HOLDS`, :data:`FAILS` (with
    ``first_violation``) or :data:`NOT_APPLICABLE` (with ``reason``).  The
    envelope is present only for ``Holds``.  ``initial_interval`` is the
    range of initial values the conclusion covers.
    """

    theorem: str
    verdict: str
    hypotheses: list
    grid_spec: dict
    envelope: Optional[Envelope] = None
    first_violation: Optional[tuple] = None
    reason: Optional[str] = None
    initial_interval: Optional[tuple] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict == HOLDS and not all(h.passed for h in self.hypotheses):
            raise ValueError("Holds requires every hypothesis to pass")
        if self.envelope is not None and self.verdict != HOLDS:
            raise ValueError("envelope is only attached to Holds certificates")

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def hypothesis(self, name: str) -> Hypothesis:
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)

    def summary(self) -> str:
        text = f"{self.theorem}: {self.verdict}"
        if self.verdict == FAILS and self.first_violation is not None:
            t, v = self.first_violation
            text += f" (first violation at t={t:.6g}, value={v:.6g})"
        elif self.verdict == NOT_APPLICABLE and self.reason:
            text += f" ({self.reason})"
        return text


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class _Report:
    """Collects hypotheses while a certifier runs, then builds the verdict."""

    def __init__(self, theorem: str, grid_spec: dict):
        self.theorem = theorem
        self.grid_spec = grid_spec
        self.hypotheses: list[Hypothesis] = []

    def add(self, name, passed, kind="condition", **evidence) -> bool:
        self.hypotheses.append(Hypothesis(name, bool(passed), _jsonable(evidence), kind))
        return bool(passed)

    def add_check(self, name, check: CheckResult, kind="condition", **extra) -> bool:
        return self.add(name, check.passed, kind, **check.evidence(), **extra)

    def add_sign(self, name, values, grid, sign: int) -> bool:
        passed, evidence = _sign_almost_everywhere(values, grid, sign)
        return self.add(name, passed, "applicability", **evidence)

    def add_integrable(self, acc: "WeightAccumulator", name="b2_over_a_integrable") -> bool:
        return self.add(
            name,
            acc.ok,
            "applicability",
            reason=None if acc.ok else NOT_INTEGRABLE,
            refinement_level=acc.level,
            relative_change=acc.change if math.isfinite(acc.change) else None,
        )

    def conclude(self, envelope: Optional[Callable[[], Envelope]] = None, **kw) -> Certificate:
        blocked = [h for h in self.hypotheses if not h.passed and h.kind == "applicability"]
        failed = [h for h in self.hypotheses if not h.passed and h.kind != "applicability"]
        if blocked:
            h = blocked[0]
            reason = h.evidence.get("reason") or f"hypothesis {h.name} not satisfied"
            return Certificate(self.theorem, NOT_APPLICABLE, self.hypotheses, self.grid_spec, reason=reason, **kw)
        if failed:
            viols = [tuple(h.evidence["first_violation"]) for h in failed if h.evidence.get("first_violation")]
            first = min(viols) if viols else None
            return Certificate(self.theorem, FAILS, self.hypotheses, self.grid_spec, first_violation=first, **kw)
        env = envelope() if envelope is not None else None
        return Certificate(self.theorem, HOLDS, self.hypotheses, self.grid_spec, envelope=env, **kw)


def _sign_almost_everywhere(values, grid, sign: int):
    """Strict sign on the grid, tolerating isolated zeros."""
    values = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    zero = np.abs(values) <= _ZERO_REL * scale
    good = (sign * values > 0) & ~zero
    neighbour_zero = np.zeros_like(zero)
    neighbour_zero[1:] |= zero[:-1]
    neighbour_zero[:-1] |= zero[1:]
    bad = ~good & ~(zero & ~neighbour_zero)
    if scale == 0.0 or not np.all(np.isfinite(values)):
        bad = bad | ~np.isfinite(values) | (scale == 0.0)
    want = "positive" if sign > 0 else "negative"
    evidence = {"n_points": int(values.size), "n_bad": int(bad.sum())}
    if bad.any():
        i = int(np.argmax(bad))
        evidence["first_violation"] = [float(grid[i]), float(values[i])]
        evidence["reason"] = f"a is not {want} at t={float(grid[i]):.6g}"
        return False, evidence
    return True, evidence


# --------------------------------------------------------------------------
# Barrier (sub/supersolution) checks
# --------------------------------------------------------------------------


def _as_grid(grid) -> np.ndarray:
    if isinstance(grid, Interval):
        checked = grid.truncated(DEFAULT_HORIZON)
        return make_grid(checked.t0, checked.t1, include_right=checked.closed_right)
    return np.asarray(grid, dtype=float)


def _residual_tolerance(y, a) -> np.ndarray:
    amax = float(np.max(np.abs(a))) if np.size(a) else 0.0
    return 1e-9 * (1.0 + np.abs(y) ** 3 * amax)


def _barrier(eq: AbelEquation, eta, grid, sense: int) -> CheckResult:
    grid = _as_grid(grid)
    curve = as_curve(eta)
    y = curve(grid)
    a, b, c, d = eq.coefficients_array(grid)
    value = curve.derivative(grid) + ((a * y + b) * y + c) * y + d
    return _one_sided(grid, value, _residual_tolerance(y, a), sense)


def check_supersolution(eq: AbelEquation, eta, grid) -> CheckResult:
    """Check ``eta' + a eta^3 + b eta^2 + c eta + d >= -tol`` on ``grid``.

    Parameters
    ----------
    eta : number, expression, Trajectory, callable or Curve
        Candidate upper barrier.
    grid : array or Interval
        Sample points.  An :class:`Interval` is sampled with the default
        density.

    Notes
    -----
    The tolerance is ``1e-9 * (1 + |eta|^3 max|a|)`` pointwise so that
    barriers touching the equality case are not rejected by rounding.
    """
    return _barrier(eq, eta, grid, +1)


def check_subsolution(eq: AbelEquation, eta, grid) -> CheckResult:
    """Mirror of :func:`check_supersolution`: ``... <= +tol``."""
    return _barrier(eq, eta, grid, -1)


# --------------------------------------------------------------------------
# Envelope suggestions from the root curves of the cubic
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvelopeSuggestion:
    level: float
    role: str  # "super" or "sub"
    check: CheckResult = field(compare=False, repr=False)


def _golden_extremum(fn, lo, hi, maximize, iters=80):
    sgn = -1.0 if maximize else 1.0
    r = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - r * (hi - lo), lo + r * (hi - lo)
    f1, f2 = sgn * fn(x1), sgn * fn(x2)
    for _ in range(iters):
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - r * (hi - lo)
            f1 = sgn * fn(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + r * (hi - lo)
            f2 = sgn * fn(x2)
        if hi - lo < 1e-15 * max(1.0, abs(lo)):
            break
    return sgn * min(f1, f2)


def _root_extreme(eq, grid, curve_vals, k, maximize):
    """Extreme of root curve ``k``, refined between grid neighbours."""
    i = int(np.argmax(curve_vals) if maximize else np.argmin(curve_vals))
    best = float(curve_vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]

    def root_at(t):
        roots, _ = solve_cubic(*eq.coefficients(t))
        if len(roots) != 3:
            return best
        return roots[k]

    refined = _golden_extremum(root_at, lo, hi, maximize)
    return max(best, refined) if maximize else min(best, refined)


def suggest_envelope(eq: AbelEquation, grid) -> list[EnvelopeSuggestion]:
    """Constant barrier candidates read off the real root curves of the cubic.

    Candidates are equilibria (constant root curves), levels inside the gap
    between two adjacent root curves, and levels beyond every root.  Each
    gap level is classified by the sign of ``a`` and its position among the
    roots, then re-verified with :func:`check_supersolution` or
    :func:`check_subsolution`; only verified candidates are returned.
    """
    grid = _as_grid(grid)
    sections = [solve_cubic(*eq.coefficients(float(t)))[0] for t in grid]
    counts = {len(r) for r in sections}
    a_vals = eq.a.eval_array(grid)
    a_sign = 1 if np.all(a_vals > 0) else -1 if np.all(a_vals < 0) else 0

    candidates: list[tuple[float, str]] = []
    roles = ("super", "sub")
    if 0 not in counts and sections:
        top = max(max(r) for r in sections)
        bottom = min(min(r) for r in sections)
        if a_sign:
            # above every root the cubic has the sign of a
            candidates.append((top, "super" if a_sign > 0 else "sub"))
            candidates.append((bottom, "sub" if a_sign > 0 else "super"))
    if len(counts) == 1 and counts != {0}:
        n = counts.pop()
        curves = np.array(sections).T  # (n_roots, n_grid)
        for row in curves:
            if np.ptp(row) <= 1e-9 * (1.0 + np.max(np.abs(row))):
                level = float(np.mean(row))
                candidates += [(level, r) for r in roles]
        if n == 3 and a_sign:
            for k in (0, 1):
                low = _root_extreme(eq, grid, curves[k], k, maximize=True)
                high = _root_extreme(eq, grid, curves[k + 1], k + 1, maximize=False)
                if low > high + 1e-9 * (1.0 + abs(low)):
                    continue
                # the cubic has the sign of a between the two lower roots
                # and the opposite sign between the two upper ones
                role = "super" if a_sign * (1 if k == 0 else -1) > 0 else "sub"
                if high - low <= 1e-6 * (1.0 + abs(low)):
                    levels = [0.5 * (low + high)]
                else:
                    levels = [low, 0.5 * (low + high), high]
                candidates += [(v, role) for v in levels]

    out: list[EnvelopeSuggestion] = []
    seen: list[tuple[float, str]] = []
    for level, role in candidates:
        if any(r == role and abs(v - level) <= 1e-12 * (1.0 + abs(level)) for v, r in seen):
            continue
        seen.append((level, role))
        check = check_supersolution(eq, level, grid) if role == "super" else check_subsolution(eq, level, grid)
        if check.passed:
            out.append(EnvelopeSuggestion(level, role, check))
    out.sort(key=lambda s: (s.level, s.role))
    return out


# --------------------------------------------------------------------------
# Weighted condition functionals
# --------------------------------------------------------------------------


def weight_exponent(eq: AbelEquation, kind: str = "full") -> Callable[[np.ndarray], np.ndarray]:
    """``c - b^2/a`` (``kind="full"``) or ``c - b^2/(4a)`` (``"quarter"``)."""
    if kind not in ("full", "quarter"):
        raise ValueError(f"unknown weight kind {kind!r}")
    div = 1.0 if kind == "full" else 4.0

    def g(t):
        a, b, c, _ = eq.coefficients_array(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(b == 0.0, 0.0, b * b / a)
        return c - ratio / div

    return g


def _overflow_shift(G):
    return max(0.0, float(np.max(G)) - _EXP_HEADROOM)


@dataclass
class WeightAccumulator:
    """Samples of ``log W`` and of ``K = offset + int W * forcing``.

    When ``log W`` exceeds the floating range the stored ``K`` is scaled by
    ``exp(-shift)``; signs are unaffected.
    """

    grid: np.ndarray
    log_W: np.ndarray
    K: np.ndarray
    shift: float
    tol: np.ndarray
    converged: bool
    finite: bool
    change: float
    level: int

    @property
    def W(self) -> np.ndarray:
        return np.exp(self.log_W)

    @property
    def ok(self) -> bool:
        return self.converged and self.finite

    def check(self, sense: int) -> CheckResult:
        """``sense=+1``: ``K >= -tol``; ``sense=-1``: ``K <= tol``."""
        return _one_sided(self.grid, self.K, self.tol, sense)


def weighted_functional(
    eq: AbelEquation,
    forcing: Optional[Callable[[np.ndarray], np.ndarray]],
    offset: float,
    grid,
    *,
    weight: str = "full",
    tol_scale: Optional[float] = None,
    rtol: float = QUAD_RTOL,
) -> WeightAccumulator:
    """``offset + int_{t0}^{t} W(tau) forcing(tau) dtau`` on ``grid``.

    The sign tolerance is ``1e-10 * (1 + tol_scale)`` (``tol_scale``
    defaults to ``|offset|``) plus a floor of a few ulps of the accumulated
    ``int |W forcing|`` so cancellation noise cannot flip a sign.
    """
    grid = _as_grid(grid)
    acc = cumulative_weighted(weight_exponent(eq, weight), forcing, grid, rtol=rtol, shift=_overflow_shift)
    scale = math.exp(-acc.shift)
    K = offset * scale + acc.integral
    ts = abs(offset) if tol_scale is None else abs(tol_scale)
    tol = 1e-10 * (1.0 + ts) * scale + 8.0 * _EPS * acc.abs_integral
    return WeightAccumulator(
        grid=grid,
        log_W=acc.exponent,
        K=K,
        shift=acc.shift,
        tol=tol,
        converged=acc.converged,
        finite=acc.finite and bool(np.all(np.isfinite(K))),
        change=acc.change,
        level=acc.level,
    )


def discrepancy(eq: AbelEquation, eq_ref: AbelEquation, curve: Curve) -> Callable[[np.ndarray], np.ndarray]:
    """``B(t) = cubic_ref(t, y(t)) - cubic(t, y(t))`` along ``curve``."""

    def forcing(t):
        y = curve(t)
        return eq_ref.cubic_array(t, y) - eq.cubic_array(t, y)

    return forcing


def condition_functional(
    eq: AbelEquation,
    eq_ref: AbelEquation,
    y1,
    gamma: float,
    grid,
    weight: str = "full",
) -> WeightAccumulator:
    """``K(t) = gamma - y1(t0) + int W B1`` for a solution ``y1`` of ``eq_ref``."""
    grid = _as_grid(grid)
    curve = as_curve(y1)
    offset = float(gamma) - curve.value(grid[0])
    return weighted_functional(eq, discrepancy(eq, eq_ref, curve), offset, grid, weight=weight, tol_scale=gamma)


def _pointwise_discrepancy(eq, eq_ref, curve, grid, sense) -> CheckResult:
    y = curve(grid)
    B = discrepancy(eq, eq_ref, curve)(grid)
    a = np.maximum(np.abs(eq.a.eval_array(grid)), np.abs(eq_ref.a.eval_array(grid)))
    return _one_sided(grid, B, _residual_tolerance(y, a), sense)


# --------------------------------------------------------------------------
# Shared plumbing for the certifiers
# --------------------------------------------------------------------------


@dataclass
class _Domain:
    interval: Interval  # the compact interval that was checked
    grid: np.ndarray
    spec: dict

    @property
    def t0(self) -> float:
        return self.interval.t0


def _domain(interval, density=DEFAULT_DENSITY, horizon=DEFAULT_HORIZON, n_chebyshev=DEFAULT_CHEBYSHEV) -> _Domain:
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    checked = interval.truncated(horizon)
    grid = make_grid(checked.t0, checked.t1, density, n_chebyshev, include_right=checked.closed_right)
    spec = {
        "t0": checked.t0,
        "t1": checked.t1,
        "closed_right": checked.closed_right,
        "density": density,
        "chebyshev_nodes": n_chebyshev,
        "n_points": int(grid.size),
        "evidence": "sampled grid",
    }
    if not interval.bounded:
        spec["verified_up_to"] = checked.t1
    return _Domain(checked, grid, spec)


def _is_number(x) -> bool:
    return isinstance(x, (int, float, np.floating, np.integer)) and not isinstance(x, bool)


def initial_value(y, t0: float) -> float:
    """``y(t0)`` for a number (taken as the initial value) or any curve-like."""
    return float(y) if _is_number(y) else as_curve(y).value(t0)


def _reference(rep: _Report, name, eq_ref, y, dom: _Domain, opts) -> Optional[Curve]:
    """Resolve a reference solution; a number is solved as an initial value."""
    t_end = dom.interval.t1
    if _is_number(y):
        traj = solve_ivp(eq_ref, dom.t0, float(y), t_end, opts or SolveOptions())
        curve = as_curve(traj, label=name)
        exists = traj.completed or traj.t_final >= dom.grid[-1]
        rep.add(
            f"{name}_exists",
            exists,
            "applicability",
            status=str(traj.status),
            reason=None if exists else f"reference solution {name} does not exist on the interval ({traj.status})",
        )
        return curve if exists else None
    curve = as_curve(y, label=name)
    exists = curve.covers(dom.t0, float(dom.grid[-1]))
    rep.add(
        f"{name}_exists",
        exists,
        "applicability",
        reason=None if exists else f"reference solution {name} does not cover the interval",
    )
    if not exists:
        return None
    # a supplied curve must actually solve its reference equation
    g = dom.grid
    yv = curve(g)
    a1 = eq_ref.a.eval_array(g)
    res = curve.derivative(g) + eq_ref.cubic_array(g, yv)
    tol = 1e-6 * (1.0 + np.abs(yv) ** 3 * np.max(np.abs(a1)) + np.abs(yv))
    bad = ~(np.abs(res) <= tol)
    evidence = {"max_residual": float(np.max(np.abs(res)))}
    if bad.any():
        i = int(np.argmax(bad))
        evidence["reason"] = f"{name} does not solve its reference equation near t={float(g[i]):.6g}"
    rep.add(f"{name}_solves_reference", not bad.any(), "applicability", **evidence)
    return None if bad.any() else curve


# --------------------------------------------------------------------------
# Comparison certifiers
# --------------------------------------------------------------------------


def certify_thm31(
    eq: AbelEquation,
    eq_ref: AbelEquation,
    y1,
    eta,
    gamma: float,
    interval,
    *,
    density: float = DEFAULT_DENSITY,
    horizon: float = DEFAULT_HORIZON,
    opts: Optional[SolveOptions] = None,
) -> Certificate:
    """Upper barrier ``eta`` plus lower reference ``y1`` with a negative ``a``.

    Checks, on the grid: ``a < 0`` almost everywhere, integrability of
    ``b^2/a``, ``K(t) >= 0`` for the reference ``y1`` and ``gamma``, and that
    ``eta`` is a supersolution.  On success every solution starting in
    ``[gamma, eta(t0)]`` stays in ``[y1(t), eta(t)]``.

    ``y1`` may be a number (solved as an initial value of ``eq_ref``) or any
    curve-like object.

    Raises
    ------
    PreconditionError
        If ``eta(t0) < y1(t0)`` or ``gamma`` is outside ``[y1(t0), eta(t0)]``.
    """
    dom = _domain(interval, density, horizon)
    eta_c = as_curve(eta, "eta")
    y10, eta0 = initial_value(y1, dom.t0), eta_c.value(dom.t0)
    if eta0 < y10:
        raise PreconditionError(f"eta(t0)={eta0} is below y1(t0)={y10}")
    if not y10 <= gamma <= eta0:
        raise PreconditionError(f"gamma={gamma} outside [y1(t0), eta(t0)] = [{y10}, {eta0}]")
    return _one_barrier("Thm3.1", eq, eq_ref, y1, eta_c, gamma, dom, opts, sense=+1)


def certify_thm32(
    eq: AbelEquation,
    eq_ref: AbelEquation,
    y1,
    eta,
    gamma: float,
    interval,
    *,
    density: float = DEFAULT_DENSITY,
    horizon: float = DEFAULT_HORIZON,
    opts: Optional[SolveOptions] = None,
) -> Certificate:
    """Mirror of :func:`certify_thm31`: lower barrier ``eta``, upper reference
    ``y1``, ``K(t) <= 0``; envelope ``[eta(t), y1(t)]`` for initial values in
    ``[eta(t0), gamma]``."""
    dom = _domain(interval, density, horizon)
    eta_c = as_curve(eta, "eta")
    y10, eta0 = initial_value(y1, dom.t0), eta_c.value(dom.t0)
    if eta0 > y10:
        raise PreconditionError(f"eta(t0)={eta0} is above y1(t0)={y10}")
    if not eta0 <= gamma <= y10:
        raise PreconditionError(f"gamma={gamma} outside [eta(t0), y1(t0)] = [{eta0}, {y10}]")
    return _one_barrier("Thm3.2", eq, eq_ref, y1, eta_c, gamma, dom, opts, sense=-1)


def _one_barrier(theorem, eq, eq_ref, y1, eta_c, gamma, dom, opts, sense) -> Certificate:
    rep = _Report(theorem, dom.spec)
    grid = dom.grid
    rep.add_sign("a_negative", eq.a.eval_array(grid), grid, -1)
    y1_c = _reference(rep, "y1", eq_ref, y1, dom, opts)
    if y1_c is not None:
        acc = condition_functional(eq, eq_ref, y1_c, gamma, grid)
        if rep.add_integrable(acc):
            rep.add_check("weighted_condition", acc.check(sense))
    barrier = check_supersolution if sense > 0 else check_subsolution
    rep.add_check("eta_supersolution" if sense > 0 else "eta_subsolution", barrier(eq, eta_c, grid))
    eta0 = eta_c.value(dom.t0)

    def envelope():
        lo, hi = y1_c(grid), eta_c(grid)
        return Envelope(grid, lo, hi) if sense > 0 else Envelope(grid, hi, lo)

    init = (gamma, eta0) if sense > 0 else (eta0, gamma)
    return rep.conclude(envelope, initial_interval=init)


def certify_thm33(
    eq: AbelEquation,
    eq_ref1: AbelEquation,
    eq_ref2: AbelEquation,
    y1,
    y2,
    gamma1: float,
    gamma2: float,
    interval,
    *,
    density: float = DEFAULT_DENSITY,
    horizon: float = DEFAULT_HORIZON,
    opts: Optional[SolveOptions] = None,
) -> Certificate:
    """Two reference solutions with a negative ``a``.

    Checks ``a < 0``, integrability, ``K1 >= 0`` (reference ``y1`` with
    ``gamma1``) and ``K2 <= 0`` (reference ``y2`` with ``gamma2``).  The
    envelope ``[y1(t), y2(t)]`` covers initial values in
    ``[gamma1, gamma2]``.
    """
    dom = _domain(interval, density, horizon)
    y10, y20 = initial_value(y1, dom.t0), initial_value(y2, dom.t0)
    if y10 > y20:
        raise PreconditionError(f"y1(t0)={y10} exceeds y2(t0)={y20}")
    if not y10 <= gamma1 <= y20:
        raise PreconditionError(f"gamma1={gamma1} outside [y1(t0), y2(t0)]")
    if not gamma1 <= gamma2 <= y20:
        raise PreconditionError(f"gamma2={gamma2} outside [gamma1, y2(t0)]")
    rep = _Report("Thm3.3", dom.spec)
    grid = dom.grid
    rep.add_sign("a_negative", eq.a.eval_array(grid), grid, -1)
    c1 = _reference(rep, "y1", eq_ref1, y1, dom, opts)
    c2 = _reference(rep, "y2", eq_ref2, y2, dom, opts)
    if c1 is not None and c2 is not None:
        acc1 = condition_functional(eq, eq_ref1, c1, gamma1, grid)
        if rep.add_integrable(acc1):
            rep.add_check("weighted_condition_lower", acc1.check(+1))
            acc2 = condition_functional(eq, eq_ref2, c2, gamma2, grid)
            rep.add_check("weighted_condition_upper", acc2.check(-1))
    return rep.conclude(lambda: Envelope(grid, c1(grid), c2(grid)), initial_interval=(gamma1, gamma2))


def certify_thm34(
    eq: AbelEquation,
    eq_ref: AbelEquation,
    y1,
    direction: str,
    interval,
    *,
    density: float = DEFAULT_DENSITY,
    horizon: float = DEFAULT_HORIZON,
    opts: Optional[SolveOptions] = None,
) -> Certificate:
    """One-sided comparison with a positive ``a``.

    ``direction="below"``: ``y1`` is a lower bound, which needs
    ``B1 >= 0`` pointwise; solutions with ``y(t0) >= y1(t0)`` stay above it.
    ``direction="above"`` is the mirror (``B1 <= 0``).  Existence of the
    compared solutions comes from the positive-``a`` global certificate.
    """
    from .global_existence import certify_thm21

    if direction not in ("below", "above"):
        raise ValueError("direction must be 'below' or 'above'")
    dom = _domain(interval, density, horizon)
    rep = _Report("Thm3.4", dom.spec)
    grid = dom.grid
    rep.add_sign("a_positive", eq.a.eval_array(grid), grid, +1)
    existence = certify_thm21(eq, dom.interval, density=density, horizon=horizon)
    rep.add(
        "existence",
        existence.holds,
        "applicability",
        certificate=existence.theorem,
        verdict=existence.verdict,
        reason=existence.reason,
    )
    y1_c = _reference(rep, "y1", eq_ref, y1, dom, opts)
    if y1_c is not None:
        sense = +1 if direction == "below" else -1
        rep.add_check("pointwise_discrepancy", _pointwise_discrepancy(eq, eq_ref, y1_c, grid, sense))
    y10 = initial_value(y1, dom.t0)

    def envelope():
        v = y1_c(grid)
        return Envelope(grid, v, None) if direction == "below" else Envelope(grid, None, v)

    init = (y10, math.inf) if direction == "below" else (-math.inf, y10)
    return rep.conclude(envelope, initial_interval=init)


def certify_thm35(
    eq: AbelEquation,
    eq_ref1: AbelEquation,
    eq_ref2: AbelEquation,
    y1,
    y2,
    interval,
    *,
    density: float = DEFAULT_DENSITY,
    horizon: float = DEFAULT_HORIZON,
    opts: Optional[SolveOptions] = None,
) -> Certificate:
    """Two-sided pointwise comparison with no sign condition on ``a``.

    Checks ``B1 >= 0`` along ``y1`` and ``B2 <= 0`` along ``y2``; the
    envelope ``[y1(t), y2(t)]`` covers initial values in
    ``[y1(t0), y2(t0)]``.
    """
    dom = _domain(interval, density, horizon)
    y10, y20 = initial_value(y1, dom.t0), initial_value(y2, dom.t0)
    if y10 > y20:
        raise PreconditionError(f"y1(t0)={y10} exceeds y2(t0)={y20}")
    rep = _Report("Thm3.5", dom.spec)
    grid = dom.grid
    c1 = _reference(rep, "y1", eq_ref1, y1, dom, opts)
    c2 = _reference(rep, "y2", eq_ref2, y2, dom, opts)
    if c1 is not None:
        rep.add_check("pointwise_discrepancy_lower", _pointwise_discrepancy(eq, eq_ref1, c1, grid, +1))
    if c2 is not None:
        rep.add_check("pointwise_discrepancy_upper", _pointwise_discrepancy(eq, eq_ref2, c2, grid, -1))
    return rep.conclude(lambda: Envelope(grid, c1(grid), c2(grid)), initial_interval=(y10, y20))


# --------------------------------------------------------------------------
# Simulation cross-check of a certified envelope
# --------------------------------------------------------------------------


@dataclass
class EnvelopeReport:
    """Sampled trajectories measured against a certified envelope.

    ``max_excess`` is the largest distance any sample lies outside the
    envelope (negative when everything is strictly inside);
    ``min_margin`` is the smallest distance to the nearest bound.
    """

    initial_values: list
    max_excess: float
    min_margin: float
    all_completed: bool
    max_abs_y: float

    def ok(self, slack: float = 1e-6) -> bool:
        return self.all_completed and self.max_excess <= slack


def validate_envelope(
    eq: AbelEquation,
    certificate: Certificate,
    n: int = 20,
    opts: SolveOptions = SolveOptions(),
    initial_values: Optional[Sequence[float]] = None,
) -> EnvelopeReport:
    """Integrate ``n`` evenly spaced initial values from the certified range
    and measure them against the envelope at its grid points."""
    env = certificate.envelope
    if env is None:
        raise ValueError(f"{certificate.theorem} has no envelope ({certificate.verdict})")
    lo, hi = certificate.initial_interval
    if not math.isfinite(lo):
        lo = hi - 1.0
    if not math.isfinite(hi):
        hi = lo + 1.0
    gammas = list(initial_values) if initial_values is not None else np.linspace(lo, hi, n).tolist()
    t = env.t
    lower = env.lower if env.lower is not None else np.full(t.shape, -np.inf)
    upper = env.upper if env.upper is not None else np.full(t.shape, np.inf)
    excess, margin, peak, completed = -math.inf, math.inf, 0.0, True
    for g in gammas:
        traj = solve_ivp(eq, t[0], g, t[-1], opts)
        if not traj.completed:
            completed = False
            continue
        y = traj.at(t)
        excess = max(excess, float(np.max(np.maximum(lower - y, y - upper))))
        margin = min(margin, float(np.min(np.minimum(y - lower, upper - y))))
        peak = max(peak, float(np.max(np.abs(traj.y))))
    return EnvelopeReport(gammas, excess, margin, completed, peak)
