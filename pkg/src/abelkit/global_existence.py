"""Existence on long horizons: positive ``a`` bounds and piecewise barriers.

Unbounded intervals are truncated at a horizon and certificates record the
``verified_up_to`` time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .compare import (
    DEFAULT_HORIZON,
    CheckResult,
    Certificate,
    Curve,
    Envelope,
    _domain,
    _Report,
    as_curve,
    check_subsolution,
    check_supersolution,
    weighted_functional,
)
from .errors import PreconditionError
from .model import AbelEquation, Interval, solve_cubic
from .quad import DEFAULT_CHEBYSHEV, DEFAULT_DENSITY, make_grid

__all__ = [
    "Partition",
    "certify_thm21",
    "certify_thm41",
    "certify_thm42",
    "GlobalCandidate",
    "suggest_global_envelope",
]


@dataclass(frozen=True)
class Partition:
    """Increasing times ``t_0 < t_1 < ...`` cutting the half-line into panels.

    A finite partition ends with ``+inf``.  A periodic partition
    ``t_k = start + k * period`` is generated lazily and never stored.
    """

    points: tuple
    period: Optional[float] = None

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if not pts:
            raise ValueError("a partition needs at least a start point")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("partition points must be strictly increasing")
        if not math.isfinite(pts[0]):
            raise ValueError("partition must start at a finite time")
        if self.period is not None:
            if not self.period > 0:
                raise ValueError("period must be positive")
            if len(pts) != 1:
                raise ValueError("a periodic partition is given by its start only")
        elif math.isfinite(pts[-1]):
            pts = pts + (math.inf,)
        object.__setattr__(self, "points", pts)

    @classmethod
    def regular(cls, start: float, period: float, count: Optional[int] = None) -> "Partition":
        """``start + k * period``; with ``count`` only the first ``count`` points
        are used and the last panel runs to infinity."""
        if count is None:
            return cls((start,), period)
        return cls(tuple(start + k * period for k in range(count)))

    @property
    def kind(self) -> str:
        return "infinite" if self.period is not None else "finite"

    @property
    def start(self) -> float:
        return self.points[0]

    def panels(self, end: float) -> list[tuple[float, float]]:
        """Panels ``[t_k, t_{k+1})`` clipped to ``[start, end]``."""
        out = []
        if self.period is not None:
            k = 0
            while True:
                lo = self.start + k * self.period
                if lo >= end:
                    break
                out.append((lo, min(self.start + (k + 1) * self.period, end)))
                k += 1
            return out
        for lo, hi in zip(self.points, self.points[1:]):
            if lo >= end:
                break
            out.append((lo, min(hi, end)))
        return out

    def refined(self) -> "Partition":
        """The partition with every finite panel's midpoint inserted."""
        if self.period is not None:
            return Partition((self.start,), self.period / 2.0)
        pts = []
        for lo, hi in zip(self.points, self.points[1:]):
            pts.append(lo)
            if math.isfinite(hi):
                pts.append(0.5 * (lo + hi))
        return Partition(tuple(pts))

    def describe(self) -> dict:
        if self.period is not None:
            return {"start": self.start, "period": self.period}
        return {"points": [p if math.isfinite(p) else "inf" for p in self.points]}


# --------------------------------------------------------------------------
# Positive leading coefficient
# --------------------------------------------------------------------------


def certify_thm21(
    eq: AbelEquation,
    interval,
    *,
    gamma: Optional[float] = None,
    density: float = DEFAULT_DENSITY,
    horizon: float = DEFAULT_HORIZON,
) -> Certificate:
    """Global existence when ``a > 0``.

    Checks ``a > 0`` almost everywhere and integrability of ``b^2/a``.  With
    ``gamma`` the a-priori bound::

        |y(t)| <= |gamma| exp(-G(t)) + int_{t0}^{t} exp(-(G(t) - G(tau))) |d(tau)| dtau
        G(t)   = int_{t0}^{t} [c - b^2 / (4a)]

    is attached as the symmetric envelope ``[-bound, bound]`` for the single
    initial value ``gamma``.
    """
    dom = _domain(interval, density, horizon)
    grid = dom.grid
    rep = _Report("Thm2.1", dom.spec)
    rep.add_sign("a_positive", eq.a.eval_array(grid), grid, +1)
    abs_d = lambda t: np.abs(eq.d.eval_array(t))  # noqa: E731
    acc = weighted_functional(eq, abs_d, 0.0, grid, weight="quarter")
    rep.add_integrable(acc)
    bound = None
    if acc.ok:
        with np.errstate(over="ignore"):
            decay = np.exp(-acc.log_W)
            bound = abs(gamma or 0.0) * decay + np.exp(acc.shift - acc.log_W) * acc.K
    extras = {}
    if bound is not None and gamma is not None:
        extras["bound_max"] = float(np.max(bound))

    def envelope():
        if gamma is None:
            return None
        return Envelope(grid, -bound, bound)

    init = (gamma, gamma) if gamma is not None else None
    return rep.conclude(envelope, initial_interval=init, extras=extras)


# --------------------------------------------------------------------------
# Negative leading coefficient, piecewise integral conditions
# --------------------------------------------------------------------------


def _panel_grid(lo, hi, end, density, n_chebyshev):
    # the final panel is closed when it reaches the horizon
    return make_grid(lo, hi, density, n_chebyshev, include_right=hi >= end)


def _certify_piecewise(theorem, eq, eta, partition, horizon, density, sense) -> Certificate:
    if not isinstance(partition, Partition):
        partition = Partition(tuple(partition))
    t0 = partition.start
    end = t0 + horizon
    dom = _domain(Interval(t0, math.inf), density, horizon)
    grid = dom.grid
    dom.spec["partition"] = partition.describe()
    eta_c = as_curve(eta, "eta")
    eta_v = eta_c(grid)
    if sense > 0 and np.any(eta_v < 0):
        i = int(np.argmax(eta_v < 0))
        raise PreconditionError(f"eta must be nonnegative; eta({grid[i]:.6g}) = {eta_v[i]:.6g}")
    if sense < 0 and np.any(eta_v > 0):
        i = int(np.argmax(eta_v > 0))
        raise PreconditionError(f"eta must be nonpositive; eta({grid[i]:.6g}) = {eta_v[i]:.6g}")

    rep = _Report(theorem, dom.spec)
    rep.add_sign("a_negative", eq.a.eval_array(grid), grid, -1)
    barrier = check_supersolution if sense > 0 else check_subsolution
    rep.add_check("eta_supersolution" if sense > 0 else "eta_subsolution", barrier(eq, eta_c, grid))

    minus_d = lambda t: -eq.d.eval_array(t)  # noqa: E731
    panels = []
    integrable, first_bad, first_failed = True, None, None
    for k, (lo, hi) in enumerate(partition.panels(end)):
        pgrid = _panel_grid(lo, hi, end, density, DEFAULT_CHEBYSHEV)
        eta_k = eta_c.value(lo)
        acc = weighted_functional(eq, minus_d, eta_k, pgrid, tol_scale=eta_k)
        entry = {"index": k, "t_start": lo, "t_end": hi, "integrable": acc.ok}
        if not acc.ok:
            integrable = False
            first_bad = first_bad if first_bad is not None else k
        else:
            check = acc.check(sense)
            entry.update(passed=check.passed, extreme=list(check.worst))
            if not check.passed and first_failed is None:
                first_failed = (k, check)
        panels.append(entry)

    rep.add(
        "b2_over_a_integrable",
        integrable,
        "applicability",
        reason=None if integrable else f"b^2/a not locally integrable (numerical) on panel {first_bad}",
        panel=first_bad,
    )
    if integrable:
        evidence = {"panels": panels}
        if first_failed is not None:
            k, check = first_failed
            evidence.update(failed_panel=k, first_violation=list(check.first_violation))
        rep.add("panel_condition", first_failed is None, **evidence)

    def envelope():
        zero = np.zeros_like(grid)
        v = eta_c(grid)
        return Envelope(grid, zero, v) if sense > 0 else Envelope(grid, v, zero)

    eta0 = eta_c.value(t0)
    init = (0.0, eta0) if sense > 0 else (eta0, 0.0)
    return rep.conclude(envelope, initial_interval=init, extras={"n_panels": len(panels)})


def certify_thm41(
    eq: AbelEquation,
    eta,
    partition,
    horizon: float = DEFAULT_HORIZON,
    *,
    density: float = DEFAULT_DENSITY,
) -> Certificate:
    """Nonnegative global barrier for ``a < 0`` over a partition.

    On each panel ``[t_k, t_{k+1})`` (up to ``start + horizon``) checks::

        eta(t_k) - int_{t_k}^{t} exp(int_{t_k}^{tau} [c - b^2/a]) d(tau) dtau >= 0

    plus ``a < 0``, integrability and that ``eta >= 0`` is a supersolution.
    Solutions starting in ``[0, eta(t0)]`` then stay in ``[0, eta(t)]``.

    Raises
    ------
    PreconditionError
        If ``eta`` is negative somewhere on the grid.
    """
    return _certify_piecewise("Thm4.1", eq, eta, partition, horizon, density, +1)


def certify_thm42(
    eq: AbelEquation,
    eta,
    partition,
    horizon: float = DEFAULT_HORIZON,
    *,
    density: float = DEFAULT_DENSITY,
) -> Certificate:
    """Mirror of :func:`certify_thm41` with a nonpositive subsolution ``eta``;
    the envelope is ``[eta(t), 0]``."""
    return _certify_piecewise("Thm4.2", eq, eta, partition, horizon, density, -1)


# --------------------------------------------------------------------------
# Candidate global barriers
# --------------------------------------------------------------------------


@dataclass
class GlobalCandidate:
    kind: str  # "constant", "running_max" or "root_curve"
    curve: Curve
    check: CheckResult = field(repr=False)
    description: str = ""


def _nondecreasing(v, tol):
    return bool(np.all(np.diff(v) >= -tol))


def suggest_global_envelope(eq: AbelEquation, grid) -> list[GlobalCandidate]:
    """Nonnegative nondecreasing supersolution candidates from the root curves.

    Two constructions are tried.  When the cubic has three real roots
    ``alpha <= beta <= gamma`` everywhere, a nonnegative nondecreasing
    ``lambda`` squeezed between ``beta`` and ``gamma`` works; the running
    maximum of ``max(beta, 0)`` and constants between ``max beta+`` and
    ``min gamma`` are proposed.  Any real root curve that is itself
    nonnegative and nondecreasing is proposed directly.  Every candidate is
    re-verified with :func:`check_supersolution`.
    """
    grid = np.asarray(grid, dtype=float)
    sections = [solve_cubic(*eq.coefficients(float(t)))[0] for t in grid]
    counts = {len(r) for r in sections}
    if len(counts) != 1 or counts == {0}:
        return []
    curves = np.array(sections).T
    tol = 1e-9 * (1.0 + float(np.max(np.abs(curves))))
    proposals: list[tuple[str, Curve, str]] = []

    if curves.shape[0] == 3:
        beta, gamma = curves[1], curves[2]
        floor = np.maximum(beta, 0.0)
        lam = np.maximum.accumulate(floor)
        if np.all(lam <= gamma + tol):
            lo, hi = float(lam[-1]), float(np.min(gamma))
            if lo <= hi + tol:
                for v in sorted({lo, 0.5 * (lo + hi), hi}):
                    proposals.append(("constant", as_curve(v), f"constant {v:.17g}"))
            if np.ptp(lam) > tol:
                proposals.append(("running_max", as_curve((grid, lam), "running max"), "running max of beta+"))

    seen = []
    for k, row in enumerate(curves):
        if np.min(row) < -tol or not _nondecreasing(row, tol):
            continue
        if any(np.max(np.abs(row - s)) <= tol for s in seen):
            continue
        seen.append(row)
        if np.ptp(row) <= tol:
            curve = as_curve(float(np.mean(row)))
        else:
            curve = as_curve((grid, row), f"root {k}")
        proposals.append(("root_curve", curve, f"root curve {k}"))

    out = []
    for kind, curve, text in proposals:
        check = check_supersolution(eq, curve, grid)
        if check.passed:
            out.append(GlobalCandidate(kind, curve, check, text))
    return out
