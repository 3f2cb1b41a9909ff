"""Adaptive Dormand-Prince 5(4) integration with finite-time escape detection.

A solution whose modulus passes the escape threshold ``y_max`` is taken to
blow up.  The escape time is pinned down by halving the step that crosses the
threshold until it is no longer than ``1e-6 * (1 + |t|)``; the crossing is
then re-checked from the escape sample with a ten times larger threshold.  If
the solution does not escape again within ``1e-6`` time units it was only a
large excursion and integration resumes with the raised threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .expr import ExprDomainError
from .model import AbelEquation

__all__ = [
    "SolveOptions",
    "Trajectory",
    "Completed",
    "BlowUp",
    "DomainError",
    "IntegrationError",
    "MaxStepsExceeded",
    "StepRejectionError",
    "solve_ivp",
    "solve_many",
    "integrate_function",
    "displacement",
    "sweep",
]


class IntegrationError(RuntimeError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


class StepRejectionError(IntegrationError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    y_max: float = 1e7
    max_steps: int = 10_000_000
    dense_output: bool = True

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.y_max > 1:
            raise ValueError("y_max must exceed 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def with_(self, **changes) -> "SolveOptions":
        return replace(self, **changes)


@dataclass(frozen=True)
class Completed:
    def __str__(self):
        return "completed"


@dataclass(frozen=True)
class BlowUp:
    t_escape: float
    direction: int

    def __str__(self):
        return f"blowup t_escape={self.t_escape:.17g} direction={self.direction:+d}"


@dataclass(frozen=True)
class DomainError:
    message: str
    t: float

    def __str__(self):
        return f"domain_error t={self.t:.17g} message={self.message}"


Status = Union[Completed, BlowUp, DomainError]


@dataclass
class Trajectory:
    """Accepted samples of a numerical solution.

    ``f`` holds ``y'`` at each sample.  ``dense`` (one row per step) holds the
    coefficients of the 4th-order continuous extension; without it
    :meth:`at` falls back to cubic Hermite interpolation.
    """

    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    status: Status
    dense: Optional[np.ndarray] = None
    stats: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return isinstance(self.status, Completed)

    @property
    def blew_up(self) -> bool:
        return isinstance(self.status, BlowUp)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.y.tolist()))

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def y_final(self) -> float:
        return float(self.y[-1])

    def at(self, tq) -> np.ndarray:
        """Interpolate the solution at ``tq`` (must lie within the samples)."""
        tq = np.asarray(tq, dtype=float)
        scalar = tq.ndim == 0
        tq = np.atleast_1d(tq)
        lo, hi = self.t[0], self.t[-1]
        span = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(tq < lo - span) or np.any(tq > hi + span):
            raise ValueError(f"interpolation outside [{lo}, {hi}]")
        if len(self.t) == 1:
            out = np.full(tq.shape, self.y[0])
            return out[0] if scalar else out
        i = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[i + 1] - self.t[i]
        x = np.clip((tq - self.t[i]) / h, 0.0, 1.0)
        if self.dense is not None:
            q = self.dense[i]
            out = self.y[i] + h * x * (q[:, 0] + x * (q[:, 1] + x * (q[:, 2] + x * q[:, 3])))
        else:
            y0, y1 = self.y[i], self.y[i + 1]
            f0, f1 = self.f[i], self.f[i + 1]
            h00 = (1 + 2 * x) * (1 - x) ** 2
            h10 = x * (1 - x) ** 2
            h01 = x * x * (3 - 2 * x)
            h11 = x * x * (x - 1)
            out = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        # exact sample times return exact sample values
        exact = tq == self.t[i + 1]
        out = np.where(exact, self.y[i + 1], out)
        return out[0] if scalar else out

    def derivative_at(self, tq) -> np.ndarray:
        tq = np.asarray(tq, dtype=float)
        i = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[i + 1] - self.t[i]
        x = np.clip((tq - self.t[i]) / h, 0.0, 1.0)
        if self.dense is not None:
            q = self.dense[i]
            return q[..., 0] + x * (2 * q[..., 1] + x * (3 * q[..., 2] + x * 4 * q[..., 3]))
        return (1 - x) * self.f[i] + x * self.f[i + 1]


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# continuous extension, y(t + x h) = y + h * sum_j (K @ P)_j x^(j+1)
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.8
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_MAX_CONSECUTIVE_REJECTS = 10
_CONFIRM_WINDOW = 1e-6
_MAX_THRESHOLD_RAISES = 6


def _dp_step(f, t, y, h, k1):
    a = _A
    k2 = f(t + _C[1] * h, y + h * a[1][0] * k1)
    k3 = f(t + _C[2] * h, y + h * (a[2][0] * k1 + a[2][1] * k2))
    k4 = f(t + _C[3] * h, y + h * (a[3][0] * k1 + a[3][1] * k2 + a[3][2] * k3))
    k5 = f(t + _C[4] * h, y + h * (a[4][0] * k1 + a[4][1] * k2 + a[4][2] * k3 + a[4][3] * k4))
    k6 = f(
        t + h,
        y + h * (a[5][0] * k1 + a[5][1] * k2 + a[5][2] * k3 + a[5][3] * k4 + a[5][4] * k5),
    )
    y_new = y + h * (_B[0] * k1 + _B[2] * k3 + _B[3] * k4 + _B[4] * k5 + _B[5] * k6)
    if not math.isfinite(y_new):
        return y_new, math.inf, None
    k7 = f(t + h, y_new)
    err = h * (
        _E[0] * k1 + _E[2] * k3 + _E[3] * k4 + _E[4] * k5 + _E[5] * k6 + _E[6] * k7
    )
    return y_new, err, (k1, k2, k3, k4, k5, k6, k7)


def _initial_step(f, t0, y0, f0, direction_span, rtol, atol):
    sc = atol + abs(y0) * rtol
    d0 = abs(y0) / sc
    d1 = abs(f0) / sc
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    try:
        f1 = f(t0 + h0, y1)
    except (OverflowError, ExprDomainError):
        return h0 * 1e-3
    d2 = abs(f1 - f0) / sc / h0 if math.isfinite(f1) else math.inf
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_span)


def _safe(f):
    def g(t, y):
        try:
            return f(t, y)
        except OverflowError:
            return math.inf

    return g


@dataclass
class _Run:
    t: list
    y: list
    f: list
    q: list
    n_accepted: int = 0
    n_rejected: int = 0
    n_rhs: int = 0


def _advance(f, run: _Run, t_end, threshold, opts: SolveOptions, origin=0.0):
    """Integrate from the last sample of ``run`` towards ``t_end``.

    Times are ``origin + s`` where ``s`` is what the run stores.  Returns
    ``("completed", None)`` or ``("escape", sign)``.
    """
    s = run.t[-1]
    y = run.y[-1]
    k1 = run.f[-1]
    rtol, atol = opts.rel_tol, opts.abs_tol

    def fl(s_, y_):
        run.n_rhs += 1
        return f(origin + s_, y_)

    h = _initial_step(fl, s, y, k1, t_end - s, rtol, atol)
    rejects = 0
    while s < t_end:
        if run.n_accepted >= opts.max_steps:
            raise MaxStepsExceeded(
                f"exceeded {opts.max_steps} steps at t={origin + s!r}"
            )
        h = min(h, t_end - s)
        if s + h == s:
            # out of time resolution: still an escape if cubic growth from
            # here reaches infinity within the bracketing width
            width = 1e-6 * (1.0 + abs(origin + s))
            if abs(y) > 1.0 and y * k1 > 0.0 and abs(y) / (2.0 * abs(k1)) <= width:
                return "escape", 1 if y > 0 else -1
            raise IntegrationError(f"step size underflow at t={origin + s!r}")
        y_new, err, ks = _dp_step(fl, s, y, h, k1)

        if not math.isfinite(y_new) or abs(y_new) >= threshold:
            width = 1e-6 * (1.0 + abs(origin + s))
            if h <= width and math.isfinite(y_new):
                run.t.append(s + h)
                run.y.append(y_new)
                run.f.append(ks[6])
                run.q.append(_dense(ks, h))
                run.n_accepted += 1
                return "escape", 1 if y_new > 0 else -1
            h *= 0.5
            continue

        sc = atol + rtol * max(abs(y), abs(y_new))
        errn = abs(err) / sc
        if errn <= 1.0:
            s_new = s + h if t_end - (s + h) > 1e-13 * max(1.0, abs(t_end)) else t_end
            run.t.append(s_new)
            run.y.append(y_new)
            run.f.append(ks[6])
            run.q.append(_dense(ks, h))
            run.n_accepted += 1
            fac = _FAC_MAX if errn == 0 else min(_FAC_MAX, _SAFETY * errn ** -0.2)
            if rejects:
                fac = min(fac, 1.0)
            rejects = 0
            s, y, k1 = s_new, y_new, ks[6]
            h *= max(fac, _FAC_MIN)
        else:
            run.n_rejected += 1
            rejects += 1
            if rejects >= _MAX_CONSECUTIVE_REJECTS:
                raise StepRejectionError(
                    f"{rejects} consecutive step rejections at t={origin + s!r}"
                )
            h *= max(_FAC_MIN, _SAFETY * errn ** -0.2)
    return "completed", None


def _dense(ks, h):
    return np.asarray(ks) @ _P


def integrate_function(
    f: Callable[[float, float], float],
    t0: float,
    y0: float,
    t_end: float,
    opts: SolveOptions = SolveOptions(),
) -> Trajectory:
    """Integrate ``y' = f(t, y)`` on ``[t0, t_end]`` (see module docstring)."""
    t0, y0, t_end = float(t0), float(y0), float(t_end)
    if not t0 < t_end:
        raise ValueError("t0 must be smaller than t_end")
    if not math.isfinite(y0):
        raise ValueError("initial value must be finite")
    f = _safe(f)
    try:
        f0 = f(t0, y0)
    except ExprDomainError as exc:
        return _finish(_Run([t0], [y0], [math.nan], []), DomainError(str(exc), t0), opts)
    run = _Run([t0], [y0], [f0], [], n_rhs=1)
    threshold = opts.y_max
    status: Status = Completed()
    raises = 0
    try:
        while True:
            outcome, sign = _advance(f, run, t_end, threshold, opts)
            if outcome == "completed":
                break
            t_e, y_e = run.t[-1], run.y[-1]
            if _confirm_escape(f, t_e, y_e, t_end, threshold * 10.0, opts) or raises >= _MAX_THRESHOLD_RAISES:
                status = BlowUp(t_escape=t_e, direction=sign)
                break
            # large excursion: keep going with a higher bar
            threshold *= 10.0
            raises += 1
            if t_e >= t_end:
                break
    except ExprDomainError as exc:
        status = DomainError(str(exc), exc.t)
    return _finish(run, status, opts)


def _confirm_escape(f, t_e, y_e, t_end, threshold, opts) -> bool:
    window = min(_CONFIRM_WINDOW, max(t_end - t_e, 0.0))
    if window <= 0.0:
        return True
    local = _Run([0.0], [y_e], [f(t_e, y_e)], [])
    try:
        outcome, _ = _advance(f, local, window, threshold, opts, origin=t_e)
    except IntegrationError:
        return True
    return outcome == "escape"


def _finish(run: _Run, status: Status, opts: SolveOptions) -> Trajectory:
    t = np.asarray(run.t, dtype=float)
    y = np.asarray(run.y, dtype=float)
    dense = np.asarray(run.q, dtype=float).reshape(-1, 4) if opts.dense_output and run.q else None
    finite_y = y[np.isfinite(y)]
    stats = {
        "accepted_steps": run.n_accepted,
        "rejected_steps": run.n_rejected,
        "rhs_evaluations": run.n_rhs,
        "max_abs_y": float(np.max(np.abs(finite_y))) if finite_y.size else math.nan,
    }
    return Trajectory(t=t, y=y, f=np.asarray(run.f, dtype=float), status=status, dense=dense, stats=stats)


def solve_ivp(
    eq: AbelEquation,
    t0: float,
    y0: float,
    t_end: float,
    opts: SolveOptions = SolveOptions(),
) -> Trajectory:
    """Solve the initial value problem ``y(t0) = y0`` up to ``t_end``."""
    return integrate_function(eq.rhs_function(), t0, y0, t_end, opts)


def _dp_step_many(f, t, y, h, k1):
    ks = [k1]
    for i in range(1, 6):
        inc = sum(a * k for a, k in zip(_A[i], ks) if a)
        ks.append(f(t + _C[i] * h, y + h * inc))
    y_new = y + h * sum(b * k for b, k in zip(_B, ks) if b)
    ks.append(f(t + h, y_new))
    err = h * sum(e * k for e, k in zip(_E, ks) if e)
    return y_new, err, ks


def solve_many(
    eq: AbelEquation,
    t0: float,
    y0s: Sequence[float],
    t_end: float,
    opts: SolveOptions = SolveOptions(),
) -> list[Trajectory]:
    """Solve several initial value problems on one shared step sequence.

    The error norm is the worst over the members, so every member meets the
    tolerance.  Because all members take the same steps and one small
    Runge-Kutta step is increasing in ``y``, ordered initial values give
    solutions that stay ordered at every sample, even where they approach
    each other more closely than the integration error.

    A member whose step reaches ``y_max``, or a domain error in the
    coefficients, hands that member (or all members) to :func:`solve_ivp`
    from the last shared sample, so escape detection works as usual.
    """
    t0, t_end = float(t0), float(t_end)
    y = np.array([float(v) for v in y0s])
    if not t0 < t_end:
        raise ValueError("t0 must be smaller than t_end")
    if not np.all(np.isfinite(y)):
        raise ValueError("initial values must be finite")
    m = y.size
    if m == 0:
        return []
    a, b, c, d = eq.a, eq.b, eq.c, eq.d
    n_rhs = 0

    def f(t, v):
        nonlocal n_rhs
        n_rhs += 1
        with np.errstate(over="ignore", invalid="ignore"):
            return -(((a(t) * v + b(t)) * v + c(t)) * v + d(t))

    def slopes(t, v):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.abs((3.0 * a(t) * v + 2.0 * b(t)) * v + c(t))

    def h_monotone(t, v):
        # one step is increasing in y while h * |df/dy| stays below 1
        lip = float(np.max(slopes(t, v), initial=0.0))
        return 1.0 / lip if lip > 0.0 else math.inf

    rtol, atol = opts.rel_tol, opts.abs_tol
    active = np.arange(m)
    ts = [t0]
    ys = [y.copy()]  # full-length rows, nan once a member has left
    fs = []
    qs = []
    leave: dict = {}  # member -> index into ts where it left
    s, n_acc, n_rej = t0, 0, 0

    try:
        k1 = f(s, y)
    except ExprDomainError:
        return [solve_ivp(eq, t0, float(v), t_end, opts) for v in y]
    fs.append(k1.copy())
    h = min(
        _initial_step(lambda t_, v_: float(f(t_, np.array([v_]))[0]), s, float(v), float(k), t_end - s, rtol, atol)
        for v, k in zip(y, k1)
    )
    h_cap = h_monotone(s, y)
    try:
        rejects = 0
        while s < t_end and active.size:
            if n_acc >= opts.max_steps:
                raise MaxStepsExceeded(f"exceeded {opts.max_steps} steps at t={s!r}")
            h = min(h, h_cap, t_end - s)
            ya, ka = y[active], k1[active]
            if h_cap < 1e-6 * (1.0 + abs(s)):
                # a cap this small means some member is escaping; the one
                # with the steepest slope continues alone
                worst = int(np.argmax(slopes(s, ya)))
                leave[int(active[worst])] = len(ts) - 1
                active = np.delete(active, worst)
                h_cap = h_monotone(s, y[active])
                h = max(h, min(h_cap, t_end - s))
                continue
            y_new, err, ks = _dp_step_many(f, s, ya, h, ka)
            out = ~np.isfinite(y_new) | (np.abs(y_new) >= opts.y_max)
            if np.any(out):
                for i in active[out]:
                    leave[int(i)] = len(ts) - 1
                active = active[~out]
                h_cap = h_monotone(s, y[active])
                continue
            with np.errstate(over="ignore", invalid="ignore"):
                sc = atol + rtol * np.maximum(np.abs(ya), np.abs(y_new))
                ratios = np.abs(err) / sc
                errn = float(np.max(ratios))
            if errn <= 1.0:
                s = s + h if t_end - (s + h) > 1e-13 * max(1.0, abs(t_end)) else t_end
                y = np.full(m, np.nan)
                y[active] = y_new
                k1 = np.full(m, np.nan)
                k1[active] = ks[6]
                q = np.full((m, 4), np.nan)
                q[active] = np.stack(ks, axis=1) @ _P
                ts.append(s)
                ys.append(y)
                fs.append(k1)
                qs.append(q)
                n_acc += 1
                fac = _FAC_MAX if errn == 0 else min(_FAC_MAX, _SAFETY * errn ** -0.2)
                if rejects:
                    fac = min(fac, 1.0)
                rejects = 0
                h *= max(fac, _FAC_MIN)
                h_cap = h_monotone(s, y_new)
            else:
                n_rej += 1
                rejects += 1
                h_next = h * max(_FAC_MIN, _SAFETY * errn ** -0.2)
                if h_next < 1e-6 * (1.0 + abs(s)) or rejects >= _MAX_CONSECUTIVE_REJECTS:
                    # one member (typically near an escape) is throttling the
                    # rest; it continues alone
                    worst = int(np.argmax(np.where(np.isfinite(ratios), ratios, np.inf)))
                    leave[int(active[worst])] = len(ts) - 1
                    active = np.delete(active, worst)
                    rejects = 0
                    h_cap = h_monotone(s, y[active])
                    continue
                h = h_next
    except ExprDomainError:
        for i in active:
            leave[int(i)] = len(ts) - 1
        active = active[:0]

    T = np.asarray(ts)
    Y = np.asarray(ys)
    F = np.asarray(fs)
    Q = np.asarray(qs).reshape(len(qs), m, 4) if qs else np.zeros((0, m, 4))
    stats = {"accepted_steps": n_acc, "rejected_steps": n_rej, "rhs_evaluations": n_rhs}
    result = []
    for i in range(m):
        j = leave.get(i, len(ts) - 1)
        t_i, y_i, f_i = T[: j + 1], Y[: j + 1, i], F[: j + 1, i]
        dense = Q[:j, i, :] if opts.dense_output else None
        status: Status = Completed()
        if i in leave:
            solo = solve_ivp(eq, float(t_i[-1]), float(y_i[-1]), t_end, opts)
            status = solo.status
            t_i = np.concatenate([t_i, solo.t[1:]])
            y_i = np.concatenate([y_i, solo.y[1:]])
            f_i = np.concatenate([f_i[: j], solo.f])
            if dense is not None and solo.dense is not None:
                dense = np.concatenate([dense, solo.dense])
            elif opts.dense_output:
                dense = None
        finite_y = y_i[np.isfinite(y_i)]
        st = dict(stats, max_abs_y=float(np.max(np.abs(finite_y))) if finite_y.size else math.nan)
        result.append(Trajectory(t=t_i, y=y_i, f=f_i, status=status, dense=dense, stats=st))
    return result


def displacement(
    eq: AbelEquation, t0: float, T: float, gamma: float, opts: SolveOptions = SolveOptions()
) -> Union[float, BlowUp]:
    """``y(T) - gamma`` for the solution starting at ``(t0, gamma)``.

    A blow-up before ``T`` is returned as the :class:`BlowUp` status.
    """
    traj = solve_ivp(eq, t0, gamma, T, opts)
    if isinstance(traj.status, BlowUp):
        return traj.status
    if isinstance(traj.status, DomainError):
        raise ExprDomainError(traj.status.message, "", traj.status.t)
    return traj.y_final - gamma


def sweep(
    eq: AbelEquation,
    t0: float,
    T: float,
    gamma_grid: Sequence[float],
    opts: SolveOptions = SolveOptions(),
) -> list[tuple[float, Union[float, BlowUp]]]:
    """Displacement for every initial value in ``gamma_grid`` (sorted)."""
    gammas = [float(g) for g in gamma_grid]
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma_grid must be sorted")
    return [(g, displacement(eq, t0, T, g, opts)) for g in gammas]
