"""Closed solutions ``y(t0) = y(T)``: certified brackets and exact bisection.

A closed solution is a zero of the displacement ``P(gamma) = y_gamma(T) -
gamma``.  Each strategy checks the hypotheses of one existence theorem on a
grid and, when they hold, returns an initial bracket on which ``P`` changes
sign.  :func:`find_closed` then bisects with the bracket kept in exact
rational arithmetic, so widths halve exactly.

Orientation ``"decreasing"`` means ``P(lo) >= 0 >= P(hi)``; ``"increasing"``
means ``P(lo) <= 0 <= P(hi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .compare import (
    Certificate,
    _domain,
    _one_sided,
    _pointwise_discrepancy,
    _reference,
    _Report,
    as_curve,
    check_subsolution,
    check_supersolution,
    condition_functional,
    initial_value,
    weighted_functional,
)
from .errors import BlowUpInsideBracket, BracketInvalid, MaxIterExceeded, NotApplicableError, PreconditionError
from .expr import ExprDomainError
from .integrate import BlowUp, DomainError, SolveOptions, Trajectory, solve_ivp
from .model import AbelEquation, Interval
from .quad import DEFAULT_DENSITY

__all__ = [
    "STRATEGIES",
    "TOL_CLOSED",
    "TOL_GAMMA",
    "MAX_ITER",
    "Witnesses",
    "ClosedCertification",
    "ClosedSolutionResult",
    "gamma_upper_bound",
    "certify_closed",
    "check_bracket",
    "find_closed",
    "solve_closed",
    "is_periodic",
    "periodic_returns",
]

STRATEGIES = ("Thm51", "Thm52", "Thm53", "Thm54", "Thm55", "Thm56", "Thm57", "Cor51", "Cor52")
TOL_CLOSED = 1e-8
TOL_GAMMA = 1e-12
MAX_ITER = 200
DECREASING = "decreasing"
INCREASING = "increasing"


def _tol_cert(gamma: float) -> float:
    return 1e-10 * (1.0 + abs(gamma))


@dataclass
class Witnesses:
    """Inputs some strategies need.

    ``y1``/``y2`` are reference solutions of ``reference1``/``reference2``
    given as initial values (integrated on ``[t0, T]``) or as curves.
    ``gamma1``/``gamma2`` default to ``y1(t0)`` and ``y2(t0)``.
    """

    eta: object = None
    reference1: Optional[AbelEquation] = None
    reference2: Optional[AbelEquation] = None
    y1: object = None
    y2: object = None
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise PreconditionError(f"missing witness: {', '.join(missing)}")


@dataclass
class ClosedCertification:
    certificate: Certificate
    bracket: Optional[tuple] = None
    orientation: Optional[str] = None
    displacements: Optional[tuple] = None


@dataclass
class ClosedSolutionResult:
    """Outcome of :func:`find_closed`.

    ``bracket_history[n]`` is the exact bracket after ``n`` bisection steps
    and ``displacement_history[n]`` the displacements at its endpoints.
    """

    gamma_star: float
    residual: float
    iterations: int
    bracket_history: list
    displacement_history: list
    orientation: str
    trajectory: Trajectory
    converged: bool
    certificate: Optional[Certificate] = None
    stop_reason: str = ""

    def widths(self) -> list:
        return [hi - lo for lo, hi in self.bracket_history]


# --------------------------------------------------------------------------
# Bracket from the positive-a bound
# --------------------------------------------------------------------------


def _bound_parts(eq: AbelEquation, grid):
    abs_d = lambda t: np.abs(eq.d.eval_array(t))  # noqa: E731
    return weighted_functional(eq, abs_d, 0.0, grid, weight="quarter")


def _bound_from(acc) -> float:
    G_T = float(acc.log_W[-1])
    if not acc.ok:
        raise NotApplicableError("b^2/a not locally integrable (numerical)")
    if not G_T > 0:
        raise NotApplicableError(f"int [c - b^2/(4a)] = {G_T:.6g} is not positive")
    numerator = math.exp(acc.shift - G_T) * float(acc.K[-1])
    return numerator / -math.expm1(-G_T)


def gamma_upper_bound(eq: AbelEquation, t0: float, T: float, density: float = DEFAULT_DENSITY) -> float:
    """Smallest ``gamma0`` the a-priori estimate certifies with ``P(gamma0) <= 0``::

        gamma0 = int_{t0}^{T} exp(-(G(T) - G(tau))) |d(tau)| dtau / (1 - exp(-G(T)))
        G(t)   = int_{t0}^{t} [c - b^2 / (4a)]

    Raises
    ------
    NotApplicableError
        If ``G(T) <= 0`` or ``b^2/a`` fails the integrability guard.
    """
    dom = _domain(Interval(t0, T, closed_right=True), density)
    return _bound_from(_bound_parts(eq, dom.grid))


# --------------------------------------------------------------------------
# Strategy certificates
# --------------------------------------------------------------------------


def _sign_check(grid, values, sense):
    scale = float(np.max(np.abs(values))) if np.size(values) else 0.0
    return _one_sided(grid, values, 1e-12 * (1.0 + scale), sense)


def _thm51(eq, dom, w, opts, sense):
    """``a > 0``, integrable, ``int [c - b^2/(4a)] > 0``, ``d`` one-signed."""
    name = "Thm5.1" if sense < 0 else "Thm5.2"
    rep = _Report(name, dom.spec)
    grid = dom.grid
    rep.add_sign("a_positive", eq.a.eval_array(grid), grid, +1)
    acc = _bound_parts(eq, grid)
    bound = None
    if rep.add_integrable(acc):
        G_T = float(acc.log_W[-1])
        if rep.add("weight_integral_positive", G_T > 0, value=G_T, first_violation=None if G_T > 0 else [dom.interval.t1, G_T]):
            bound = _bound_from(acc)
    d_name = "d_nonpositive" if sense < 0 else "d_nonnegative"
    rep.add_check(d_name, _sign_check(grid, eq.d.eval_array(grid), sense))
    cert = rep.conclude(extras={"gamma0": bound} if bound is not None else {})
    if not cert.holds:
        return cert, None, None
    return cert, ((0.0, bound) if sense < 0 else (-bound, 0.0)), DECREASING


def _thm53(eq, dom, w, opts, sense):
    """``a < 0``, integrable, signed ``int W d``, barrier with ordered ends."""
    w.require("eta")
    name = "Thm5.3" if sense > 0 else "Thm5.4"
    rep = _Report(name, dom.spec)
    grid = dom.grid
    rep.add_sign("H1_a_negative", eq.a.eval_array(grid), grid, -1)
    acc = weighted_functional(eq, lambda t: eq.d.eval_array(t), 0.0, grid)
    if rep.add_integrable(acc, name="H2_b2_over_a_integrable"):
        rep.add_check("H3_integral_condition", acc.check(-sense))
    eta = as_curve(w.eta, "eta")
    barrier = check_supersolution if sense > 0 else check_subsolution
    check = barrier(eq, eta, grid)
    e0, eT = eta.value(dom.t0), eta.value(dom.interval.t1)
    ordered = (e0 >= eT > 0) if sense > 0 else (e0 <= eT < 0)
    evidence = check.evidence()
    evidence.update(eta_t0=e0, eta_T=eT, endpoints_ordered=ordered)
    if not ordered:
        evidence.setdefault("first_violation", [dom.interval.t1, eT - e0])
    rep.add("H4_eta_barrier", check.passed and ordered, **evidence)
    cert = rep.conclude()
    if not cert.holds:
        return cert, None, None
    return cert, ((0.0, e0) if sense > 0 else (e0, 0.0)), DECREASING


def _endpoint_relation(rep, c1, c2, dom, rising_first: bool):
    """``y1(t0) <= y1(T)`` and ``y2(t0) >= y2(T)`` (or the reverse)."""
    t0, T = dom.t0, dom.interval.t1
    a0, aT, b0, bT = c1.value(t0), c1.value(T), c2.value(t0), c2.value(T)
    tol1, tol2 = _tol_cert(a0), _tol_cert(b0)
    if rising_first:
        ok = a0 <= aT + tol1 and b0 >= bT - tol2
    else:
        ok = a0 >= aT - tol1 and b0 <= bT + tol2
    ev = dict(y1_t0=a0, y1_T=aT, y2_t0=b0, y2_T=bT)
    if not ok:
        ev["first_violation"] = [T, (aT - a0) if rising_first else (a0 - aT)]
    return rep.add("reference_endpoints", ok, **ev)


def _thm55(eq, dom, w, opts, rising_first):
    w.require("reference1", "reference2", "y1", "y2")
    name = "Thm5.5" if rising_first else "Thm5.6"
    t0 = dom.t0
    y10, y20 = initial_value(w.y1, t0), initial_value(w.y2, t0)
    if y10 > y20:
        raise PreconditionError(f"y1(t0)={y10} exceeds y2(t0)={y20}")
    g1 = y10 if w.gamma1 is None else float(w.gamma1)
    g2 = y20 if w.gamma2 is None else float(w.gamma2)
    if not y10 <= g1 <= y20:
        raise PreconditionError(f"gamma1={g1} outside [y1(t0), y2(t0)]")
    if not g1 <= g2 <= y20:
        raise PreconditionError(f"gamma2={g2} outside [gamma1, y2(t0)]")
    rep = _Report(name, dom.spec)
    grid = dom.grid
    rep.add_sign("a_negative", eq.a.eval_array(grid), grid, -1)
    c1 = _reference(rep, "y1", w.reference1, w.y1, dom, opts)
    c2 = _reference(rep, "y2", w.reference2, w.y2, dom, opts)
    if c1 is not None and c2 is not None:
        _endpoint_relation(rep, c1, c2, dom, rising_first)
        acc1 = condition_functional(eq, w.reference1, c1, g1, grid)
        if rep.add_integrable(acc1):
            rep.add_check("weighted_condition_lower", acc1.check(+1))
            acc2 = condition_functional(eq, w.reference2, c2, g2, grid)
            rep.add_check("weighted_condition_upper", acc2.check(-1))
    cert = rep.conclude()
    if not cert.holds:
        return cert, None, None
    return cert, (y10, y20), DECREASING if rising_first else INCREASING


def _thm57(eq, dom, w, opts, _):
    w.require("reference1", "reference2", "y1", "y2")
    t0 = dom.t0
    y10, y20 = initial_value(w.y1, t0), initial_value(w.y2, t0)
    if y10 > y20:
        raise PreconditionError(f"y1(t0)={y10} exceeds y2(t0)={y20}")
    rep = _Report("Thm5.7", dom.spec)
    grid = dom.grid
    c1 = _reference(rep, "y1", w.reference1, w.y1, dom, opts)
    c2 = _reference(rep, "y2", w.reference2, w.y2, dom, opts)
    orientation = None
    if c1 is not None and c2 is not None:
        # try the rising/falling variant first, then its reverse
        probe = _Report("", {})
        if _endpoint_relation(probe, c1, c2, dom, True):
            orientation = DECREASING
        elif _endpoint_relation(probe, c1, c2, dom, False):
            orientation = INCREASING
        _endpoint_relation(rep, c1, c2, dom, orientation != INCREASING)
        rep.add_check("pointwise_discrepancy_lower", _pointwise_discrepancy(eq, w.reference1, c1, grid, +1))
        rep.add_check("pointwise_discrepancy_upper", _pointwise_discrepancy(eq, w.reference2, c2, grid, -1))
    cert = rep.conclude()
    if not cert.holds:
        return cert, None, None
    return cert, (y10, y20), orientation


def _mirror_forcings(eq, ref, curve):
    """The two integrands of the mirrored-reference strategies.

    With ``y = y1(t)``::

        lower: (a - a1) y^3 - (b1 + b) y^2 + (c - c1) y - d1 - d
        upper: (a1 + a) y^3 - (b1 + b) y^2 + (c1 + c) y - d1 - d
    """

    def lower(t):
        y = curve(t)
        a, b, c, d = eq.coefficients_array(t)
        a1, b1, c1, d1 = ref.coefficients_array(t)
        return ((a - a1) * y - (b1 + b)) * y * y + (c - c1) * y - d1 - d

    def upper(t):
        y = curve(t)
        a, b, c, d = eq.coefficients_array(t)
        a1, b1, c1, d1 = ref.coefficients_array(t)
        return ((a1 + a) * y - (b1 + b)) * y * y + (c1 + c) * y - d1 - d

    return lower, upper


def _mirrored(eq, dom, w, opts, integral: bool):
    w.require("reference1", "y1")
    t0, T = dom.t0, dom.interval.t1
    y10 = initial_value(w.y1, t0)
    if y10 > 0:
        raise PreconditionError(f"y1(t0)={y10} must be nonpositive")
    g1 = y10 if w.gamma1 is None else float(w.gamma1)
    g2 = -y10 if w.gamma2 is None else float(w.gamma2)
    for name, g in (("gamma1", g1), ("gamma2", g2)):
        if not y10 <= g <= -y10:
            raise PreconditionError(f"{name}={g} outside [y1(t0), -y1(t0)]")
    rep = _Report("Cor5.1" if integral else "Cor5.2", dom.spec)
    grid = dom.grid
    if integral:
        rep.add_sign("a_negative", eq.a.eval_array(grid), grid, -1)
    c1 = _reference(rep, "y1", w.reference1, w.y1, dom, opts)
    orientation = None
    if c1 is not None:
        lower, upper = _mirror_forcings(eq, w.reference1, c1)
        if integral:
            acc1 = weighted_functional(eq, lower, g1 - y10, grid, tol_scale=g1)
            if rep.add_integrable(acc1):
                rep.add_check("condition_lower", acc1.check(+1))
                acc2 = weighted_functional(eq, upper, g2 + y10, grid, tol_scale=g2)
                rep.add_check("condition_upper", acc2.check(-1))
        else:
            scale = 1.0 + float(np.max(np.abs(c1(grid)))) ** 3
            rep.add_check("condition_lower", _one_sided(grid, lower(grid), 1e-9 * scale, +1))
            rep.add_check("condition_upper", _one_sided(grid, upper(grid), 1e-9 * scale, -1))
        # case (a): y1 rises over the period; case (b): it falls
        yT = c1.value(T)
        orientation = DECREASING if y10 <= yT else INCREASING
        rep.add("case_split", True, y1_t0=y10, y1_T=yT, case="a" if orientation == DECREASING else "b")
    cert = rep.conclude()
    if not cert.holds:
        return cert, None, None
    return cert, (y10, -y10), orientation


_DISPATCH = {
    "Thm51": (_thm51, -1),
    "Thm52": (_thm51, +1),
    "Thm53": (_thm53, +1),
    "Thm54": (_thm53, -1),
    "Thm55": (_thm55, True),
    "Thm56": (_thm55, False),
    "Thm57": (_thm57, None),
    "Cor51": (_mirrored, True),
    "Cor52": (_mirrored, False),
}


def _normalize_strategy(strategy: str) -> str:
    key = strategy.replace(".", "").replace(" ", "")
    key = key[0].upper() + key[1:] if key else key
    if key not in _DISPATCH:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")
    return key


def certify_closed(
    eq: AbelEquation,
    t0: float,
    T: float,
    strategy: str,
    witnesses: Optional[Witnesses] = None,
    *,
    density: float = DEFAULT_DENSITY,
    opts: SolveOptions = SolveOptions(),
    verify_bracket: bool = True,
) -> ClosedCertification:
    """Check one existence theorem on ``[t0, T]`` and return its bracket.

    Parameters
    ----------
    strategy : str
        One of :data:`STRATEGIES` (``"Thm5.1"`` style spellings accepted).
    verify_bracket : bool
        Integrate from both bracket endpoints and confirm the displacement
        signs the certificate promises.

    Raises
    ------
    BracketInvalid
        The certificate holds but an endpoint displacement has the wrong
        sign (beyond ``1e-10 * (1 + |gamma|)``) or its solution blew up.
    PreconditionError
        Missing or inconsistent witnesses.
    """
    key = _normalize_strategy(strategy)
    fn, flag = _DISPATCH[key]
    dom = _domain(Interval(t0, T, closed_right=True), density)
    w = witnesses or Witnesses()
    cert, bracket, orientation = fn(eq, dom, w, opts, flag)
    if bracket is None:
        return ClosedCertification(cert)
    disp = None
    if verify_bracket:
        disp = check_bracket(eq, t0, T, bracket, orientation, opts, certificate=cert)
    return ClosedCertification(cert, bracket, orientation, disp)


# --------------------------------------------------------------------------
# Bisection
# --------------------------------------------------------------------------


def _integrate(eq, t0, T, gamma, opts) -> Trajectory:
    traj = solve_ivp(eq, t0, gamma, T, opts)
    if isinstance(traj.status, BlowUp):
        raise BlowUpInsideBracket(gamma, traj.status.t_escape)
    if isinstance(traj.status, DomainError):
        raise ExprDomainError(traj.status.message, "", traj.status.t)
    return traj


def _signs_ok(orientation, p_lo, p_hi, lo, hi) -> bool:
    t_lo, t_hi = _tol_cert(lo), _tol_cert(hi)
    if orientation == DECREASING:
        return p_lo >= -t_lo and p_hi <= t_hi
    return p_lo <= t_lo and p_hi >= -t_hi


def check_bracket(eq, t0, T, bracket, orientation, opts=SolveOptions(), certificate=None) -> tuple:
    """Displacements at both ends; raises :class:`BracketInvalid` on a sign
    mismatch or when an endpoint solution does not reach ``T``."""
    lo, hi = (float(x) for x in bracket)
    disp = []
    for g in (lo, hi):
        try:
            traj = _integrate(eq, t0, T, g, opts)
        except BlowUpInsideBracket as exc:
            raise BracketInvalid(
                f"solution from bracket endpoint {g!r} escapes at t={exc.t_escape!r}", certificate
            ) from exc
        disp.append(traj.y_final - g)
    if not _signs_ok(orientation, disp[0], disp[1], lo, hi):
        raise BracketInvalid(
            f"displacements P({lo!r})={disp[0]!r}, P({hi!r})={disp[1]!r} do not match the {orientation} orientation",
            certificate,
            tuple(disp),
        )
    return tuple(disp)


def find_closed(
    eq: AbelEquation,
    t0: float,
    T: float,
    bracket,
    *,
    orientation: Optional[str] = None,
    tol_closed: float = TOL_CLOSED,
    tol_gamma: float = TOL_GAMMA,
    max_iter: int = MAX_ITER,
    opts: SolveOptions = SolveOptions(),
    certificate: Optional[Certificate] = None,
) -> ClosedSolutionResult:
    """Bisect the displacement on ``bracket`` until it closes.

    The bracket is held as exact fractions.  In the decreasing orientation a
    midpoint with ``P <= 0`` (i.e. ``y(t0) >= y(T)``) replaces the upper end
    and otherwise the lower end; the increasing orientation mirrors this.
    A midpoint with ``|P| <= tol_closed`` ends the search at once, as does a
    bracket narrower than ``tol_gamma``.  Without ``orientation`` it is read
    off the endpoint signs.

    Raises
    ------
    BracketInvalid
        Endpoint displacements do not straddle zero.
    BlowUpInsideBracket
        Some iterate escapes before ``T``.
    MaxIterExceeded
        Neither stopping rule triggered within ``max_iter`` midpoints.
    """
    lo, hi = Fraction(float(bracket[0])), Fraction(float(bracket[1]))
    if lo > hi:
        raise PreconditionError(f"bracket [{float(lo)}, {float(hi)}] is reversed")
    tr_lo = _integrate(eq, t0, T, float(lo), opts)
    tr_hi = tr_lo if hi == lo else _integrate(eq, t0, T, float(hi), opts)
    p_lo, p_hi = tr_lo.y_final - float(lo), tr_hi.y_final - float(hi)
    if orientation is None:
        if _signs_ok(DECREASING, p_lo, p_hi, float(lo), float(hi)):
            orientation = DECREASING
        elif _signs_ok(INCREASING, p_lo, p_hi, float(lo), float(hi)):
            orientation = INCREASING
    if orientation is None or not _signs_ok(orientation, p_lo, p_hi, float(lo), float(hi)):
        raise BracketInvalid(
            f"P({float(lo)!r})={p_lo!r} and P({float(hi)!r})={p_hi!r} do not bracket a sign change",
            certificate,
            (p_lo, p_hi),
        )
    history = [(lo, hi)]
    disp_history = [(p_lo, p_hi)]

    def result(gamma, traj, iterations, reason):
        residual = abs(traj.y_final - float(gamma))
        return ClosedSolutionResult(
            gamma_star=float(gamma),
            residual=residual,
            iterations=iterations,
            bracket_history=history,
            displacement_history=disp_history,
            orientation=orientation,
            trajectory=traj,
            converged=residual <= tol_closed,
            certificate=certificate,
            stop_reason=reason,
        )

    for gamma, p, traj in ((lo, p_lo, tr_lo), (hi, p_hi, tr_hi)):
        if abs(p) <= tol_closed:
            return result(gamma, traj, 0, "endpoint closes")

    for n in range(1, max_iter + 1):
        mid = (lo + hi) / 2
        traj = _integrate(eq, t0, T, float(mid), opts)
        p = traj.y_final - float(mid)
        if abs(p) <= tol_closed:
            return result(mid, traj, n, "displacement within tolerance")
        move_upper = p <= 0 if orientation == DECREASING else p >= 0
        if move_upper:
            hi, p_hi = mid, p
        else:
            lo, p_lo = mid, p
        history.append((lo, hi))
        disp_history.append((p_lo, p_hi))
        if hi - lo <= Fraction(tol_gamma):
            final = (lo + hi) / 2
            traj = _integrate(eq, t0, T, float(final), opts)
            return result(final, traj, n, "bracket width below tolerance")
    raise MaxIterExceeded(f"no closed solution within {max_iter} bisection steps")


def solve_closed(
    eq: AbelEquation,
    t0: float,
    T: float,
    strategy: str,
    witnesses: Optional[Witnesses] = None,
    *,
    density: float = DEFAULT_DENSITY,
    opts: SolveOptions = SolveOptions(),
    tol_closed: float = TOL_CLOSED,
    max_iter: int = MAX_ITER,
) -> tuple[ClosedCertification, Optional[ClosedSolutionResult]]:
    """Certify with ``strategy`` and, if it holds, bisect its bracket."""
    cc = certify_closed(eq, t0, T, strategy, witnesses, density=density, opts=opts)
    if cc.bracket is None:
        return cc, None
    res = find_closed(
        eq,
        t0,
        T,
        cc.bracket,
        orientation=cc.orientation,
        tol_closed=tol_closed,
        max_iter=max_iter,
        opts=opts,
        certificate=cc.certificate,
    )
    return cc, res


# --------------------------------------------------------------------------
# Periodic coefficients
# --------------------------------------------------------------------------


def is_periodic(eq: AbelEquation, t0: float, T: float, n: int = 257, rtol: float = 1e-12) -> bool:
    """Sampled check that every coefficient satisfies ``f(t + T) = f(t)``."""
    t = np.linspace(t0, t0 + T, n)
    for f in (eq.a, eq.b, eq.c, eq.d):
        u, v = f.eval_array(t), f.eval_array(t + T)
        if not np.all(np.abs(u - v) <= rtol * (1.0 + np.abs(u))):
            return False
    return True


def periodic_returns(eq, t0, T, gamma, periods=2, opts=SolveOptions()) -> list[float]:
    """``y(t0 + k T)`` for ``k = 1..periods`` starting from ``gamma``."""
    traj = _integrate(eq, t0, t0 + periods * T, gamma, opts)
    return [float(traj.at(t0 + k * T)) for k in range(1, periods + 1)]
