"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict in ``RESULTS``; the lines are printed
in the pytest terminal summary, or directly when this file is run as a
script.
"""

import functools
import math
import random
import sys
import time
from pathlib import Path

import numpy as np
import scipy.integrate

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ROOT3_3, eq318, eq320, eq321, eq322, eq323, thm51_eq  # noqa: E402

from abelkit import AbelEquation, Interval, solve_ivp  # noqa: E402
from abelkit.closed import certify_closed, find_closed, periodic_returns  # noqa: E402
from abelkit.compare import certify_thm31, certify_thm32, certify_thm33, certify_thm35  # noqa: E402
from abelkit.expr import ExprDomainError, parse  # noqa: E402
from abelkit.global_existence import Partition, certify_thm41  # noqa: E402
from abelkit.integrate import BlowUp, SolveOptions, solve_many  # noqa: E402

RESULTS: dict = {}
T_END = 50.0
SLACK = 1e-6


def criterion(n, title):
    """Time the check, record a PASS/FAIL line and re-raise failures."""

    def wrap(fn):
        @functools.wraps(fn)
        def run():
            start = time.perf_counter()
            try:
                detail = fn()
            except BaseException as exc:
                RESULTS[n] = f"criterion {n:2d}: FAIL  {title}: {type(exc).__name__}: {exc}".splitlines()[0]
                raise
            elapsed = time.perf_counter() - start
            RESULTS[n] = f"criterion {n:2d}: PASS  {title} ({detail}; {elapsed:.2f} s)"

        return run

    return wrap


def box_check(eq, initial_values, t_end, lower, upper):
    """Integrate every initial value and return the extreme samples."""
    lo, hi = math.inf, -math.inf
    for g in initial_values:
        traj = solve_ivp(eq, 0.0, float(g), t_end)
        assert traj.completed, f"y0={g}: {traj.status}"
        lo, hi = min(lo, float(np.min(traj.y))), max(hi, float(np.max(traj.y)))
    assert lo >= lower and hi <= upper, f"samples span [{lo!r}, {hi!r}], allowed [{lower!r}, {upper!r}]"
    return lo, hi


SPAN = Interval(0.0, T_END, closed_right=True)


@criterion(1, "nonpositive forcing stays in [0, sqrt(3)/3]")
def test_criterion_01_nonpositive_forcing():
    start = time.perf_counter()
    cert = certify_thm31(eq318(), eq320(), 0.0, ROOT3_3, 0.0, SPAN)
    assert cert.verdict == "Holds", cert.summary()
    lo, hi = box_check(eq318(), np.linspace(0.0, ROOT3_3, 20), T_END, -SLACK, ROOT3_3 + SLACK)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.1f} s"
    return f"Holds, samples in [{lo:.3g}, {hi:.6g}]"


@criterion(2, "nonnegative forcing stays in [-sqrt(3)/3, 0]")
def test_criterion_02_nonnegative_forcing():
    cert = certify_thm32(eq318(sign=+1.0), eq320(), 0.0, -ROOT3_3, 0.0, SPAN)
    assert cert.verdict == "Holds", cert.summary()
    lo, hi = box_check(eq318(sign=+1.0), np.linspace(-ROOT3_3, 0.0, 20), T_END, -ROOT3_3 - SLACK, SLACK)
    return f"Holds, samples in [{lo:.6g}, {hi:.3g}]"


@criterion(3, "two reference solutions bound |y| by 1, mu = 2")
def test_criterion_03_two_references():
    cert = certify_thm33(eq321(2.0), eq322(), eq323(), -1.0, 1.0, -1.0, 1.0, SPAN)
    assert cert.verdict == "Holds", cert.summary()
    lo, hi = box_check(eq321(2.0), np.linspace(-1.0, 1.0, 20), T_END, -1.0 - SLACK, 1.0 + SLACK)
    return f"Holds, samples in [{lo:.6g}, {hi:.6g}]"


@criterion(4, "sign-changing leading coefficient, |y| <= 1")
def test_criterion_04_sign_changing_a():
    eq = AbelEquation.from_strings("sin(t)", "3", "3", "-3.5 + 1.5*sin(t)")
    cert = certify_thm35(eq, eq322(), eq323(), -1.0, 1.0, SPAN)
    assert cert.verdict == "Holds", cert.summary()
    lo, hi = box_check(eq, np.linspace(-1.0, 1.0, 20), T_END, -1.0 - SLACK, 1.0 + SLACK)
    return f"Holds, samples in [{lo:.6g}, {hi:.6g}]"


@criterion(5, "blow-up time of y' = y^3")
def test_criterion_05_blow_up():
    eq = AbelEquation.from_strings("-1", "0", "0", "0")
    worst = 0.0
    for y0 in (0.5, 1.0, 2.0, 4.0):
        traj = solve_ivp(eq, 0.0, y0, 10.0)
        assert isinstance(traj.status, BlowUp), f"y0={y0}: {traj.status}"
        exact = 1.0 / (2.0 * y0 * y0)
        rel = abs(traj.status.t_escape - exact) / exact
        assert rel <= 1e-4, f"y0={y0}: t_escape={traj.status.t_escape!r}, exact {exact!r}"
        worst = max(worst, rel)
    return f"max relative error {worst:.2e}"


@criterion(6, "error reduction per decade of rel_tol")
def test_criterion_06_order():
    eq = AbelEquation.from_strings("1", "0", "0", "0")
    exact = 1.0 / math.sqrt(1.0 + 2.0 * 4.0)  # y' = -y^3, y(0) = 1, t = 4
    errors = []
    for k in range(5, 9):
        tol = 10.0**-k
        traj = solve_ivp(eq, 0.0, 1.0, 4.0, SolveOptions(rel_tol=tol, abs_tol=1e-2 * tol))
        errors.append(abs(traj.y_final - exact))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert all(r >= 4.0 for r in ratios), f"ratios {ratios}"
    return "ratios " + ", ".join(f"{r:.1f}" for r in ratios)


def scipy_displacements(rhs, gammas, T):
    """Independent oracle: every initial value advanced together by DOP853."""
    sol = scipy.integrate.solve_ivp(rhs, (0.0, T), gammas, method="DOP853", rtol=1e-12, atol=1e-14)
    assert sol.success, sol.message
    return sol.y[:, -1] - gammas


def closed_instance(sign):
    eq = thm51_eq(sign=sign)
    strategy = "Thm51" if sign < 0 else "Thm52"
    cc = certify_closed(eq, 0.0, math.pi, strategy)
    assert cc.certificate.verdict == "Holds", cc.certificate.summary()
    res = find_closed(eq, 0.0, math.pi, cc.bracket, orientation=cc.orientation, certificate=cc.certificate)
    return eq, cc, res


def sweep_agrees(sign, cc, res):
    def rhs(t, y):
        return -(y**3 + y + sign * math.sin(t) ** 2)

    gammas = np.linspace(*cc.bracket, 2000)
    disp = scipy_displacements(rhs, gammas, math.pi)
    changes = np.nonzero(np.diff(np.sign(disp)))[0]
    assert len(changes) == 1, f"{len(changes)} sign changes in the sweep"
    i = int(changes[0])
    g0, g1 = gammas[i], gammas[i + 1]
    assert g0 - 1e-6 <= res.gamma_star <= g1 + 1e-6, f"gamma*={res.gamma_star!r} outside [{g0!r}, {g1!r}]"
    # secant estimate of the sweep root
    root = g0 - disp[i] * (g1 - g0) / (disp[i + 1] - disp[i])
    assert abs(root - res.gamma_star) <= 1e-6, f"sweep root {root!r} vs gamma* {res.gamma_star!r}"
    return abs(root - res.gamma_star)


@criterion(7, "closed solution, nonpositive forcing on [0, pi]")
def test_criterion_07_closed_nonnegative():
    start = time.perf_counter()
    _, cc, res = closed_instance(-1.0)
    assert res.gamma_star >= 0.0 and res.residual <= 1e-8, (res.gamma_star, res.residual)
    diff = sweep_agrees(-1.0, cc, res)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.1f} s"
    return f"gamma*={res.gamma_star:.12g}, residual {res.residual:.1e}, sweep offset {diff:.1e}"


@criterion(8, "closed solution, nonnegative forcing on [0, pi]")
def test_criterion_08_closed_nonpositive():
    _, cc, res = closed_instance(+1.0)
    assert res.gamma_star <= 0.0 and res.residual <= 1e-8, (res.gamma_star, res.residual)
    diff = sweep_agrees(+1.0, cc, res)
    return f"gamma*={res.gamma_star:.12g}, residual {res.residual:.1e}, sweep offset {diff:.1e}"


@criterion(9, "periodic extension to [0, 2 pi]")
def test_criterion_09_periodic():
    eq, _, res = closed_instance(-1.0)
    returns = periodic_returns(eq, 0.0, math.pi, res.gamma_star, periods=2)
    gaps = [abs(v - res.gamma_star) for v in returns]
    assert max(gaps) <= 1e-7, f"returns {returns} vs {res.gamma_star}"
    return "gaps " + ", ".join(f"{g:.1e}" for g in gaps)


def random_coefficient(rng):
    kind = rng.randrange(4)
    p, q = rng.uniform(-2, 2), rng.uniform(-1, 1)
    w, phi = rng.uniform(0.2, 3), rng.uniform(0, math.pi)
    if kind == 0:
        return repr(p)
    if kind == 1:
        return f"{p!r} + {q!r}*sin({w!r}*t + {phi!r})"
    if kind == 2:
        return f"{p!r}*cos({w!r}*t)^2"
    return f"{q!r}*exp(-{w!r}*t) + {p!r}/(1 + t^2)"


def log_gap_oracle(eq, y_lo, y_hi, t_end):
    """Independent log of the separation of two solutions.

    The gap g = y_hi - y_lo obeys g' = -g (a (y_hi^2 + y_hi y_lo + y_lo^2)
    + b (y_hi + y_lo) + c), so log g integrates without cancellation.
    """

    def rhs(t, u):
        lo, hi, _ = u
        a, b, c, d = eq.coefficients(t)
        q = a * (hi * hi + hi * lo + lo * lo) + b * (hi + lo) + c
        return [-(((a * lo + b) * lo + c) * lo + d), -(((a * hi + b) * hi + c) * hi + d), -q]

    sol = scipy.integrate.solve_ivp(
        rhs, (0.0, t_end), [y_lo, y_hi, math.log(y_hi - y_lo)], method="DOP853", rtol=1e-12, atol=1e-14,
        dense_output=True,
    )
    assert sol.success, sol.message
    return lambda t: sol.sol(t)[2]


@criterion(10, "non-crossing on 50 random instances")
def test_criterion_10_non_crossing():
    rng = random.Random(20240601)
    compared, strict, merged, min_gap = 0, 0, 0, math.inf
    for _ in range(50):
        eq = AbelEquation.from_strings(*(random_coefficient(rng) for _ in range(4)))
        y0s = sorted(rng.uniform(-1.5, 1.5) for _ in range(6))
        trajs = solve_many(eq, 0.0, y0s, 5.0)
        for (g_lo, lo), (g_hi, hi) in zip(zip(y0s, trajs), zip(y0s[1:], trajs[1:])):
            if not (lo.completed and hi.completed) or g_lo == g_hi:
                continue
            shared = np.intersect1d(lo.t, hi.t)
            gap = hi.at(shared) - lo.at(shared)
            assert np.all(gap >= 0.0), f"{eq}: y0 {g_lo!r} < {g_hi!r} cross, gap {float(np.min(gap))!r}"
            # strictness wherever the true gap is representable in floating point
            true_gap = np.exp(log_gap_oracle(eq, g_lo, g_hi, 5.0)(shared))
            resolvable = true_gap > 1e3 * np.spacing(np.maximum(np.abs(lo.at(shared)), np.abs(hi.at(shared))))
            assert np.all(gap[resolvable] > 0.0), f"{eq}: resolvable gap collapsed for y0 {g_lo!r} < {g_hi!r}"
            compared += 1
            strict += int(np.count_nonzero(resolvable))
            merged += int(np.count_nonzero(gap == 0.0))
            min_gap = min(min_gap, float(np.min(gap[resolvable]))) if np.any(resolvable) else min_gap
    assert compared >= 50, f"only {compared} completed pairs"
    return (
        f"{compared} completed pairs, {strict} strictly ordered samples (min gap {min_gap:.1e}), "
        f"{merged} samples below float resolution"
    )


@criterion(11, "bisection trace exactness")
def test_criterion_11_bisection_trace():
    steps = 0
    for sign in (-1.0, +1.0):
        _, _, res = closed_instance(sign)
        h = res.bracket_history
        w0 = h[0][1] - h[0][0]
        for n, (lo, hi) in enumerate(h):
            assert hi - lo == w0 / 2**n, f"width at step {n}"
        for (p_lo, p_hi), (lo, hi) in zip(res.displacement_history, h):
            assert p_lo >= -1e-10 * (1 + abs(lo)) and p_hi <= 1e-10 * (1 + abs(hi)), (lo, hi, p_lo, p_hi)
        steps += len(h)
    return f"{steps} brackets checked"


@criterion(12, "piecewise global barrier to 10 pi")
def test_criterion_12_global():
    horizon = 10 * math.pi
    cert = certify_thm41(eq318(), ROOT3_3, Partition.regular(0.0, math.pi), horizon)
    assert cert.verdict == "Holds", cert.summary()
    lo, hi = box_check(eq318(), np.linspace(0.0, ROOT3_3, 20), horizon, -SLACK, ROOT3_3 + SLACK)
    return f"Holds on {cert.extras['n_panels']} panels, samples in [{lo:.3g}, {hi:.6g}]"


def random_expression(rng, depth=0):
    if depth >= 4 or rng.random() < 0.3:
        return rng.choice(["t", "pi", "e", str(rng.randrange(10)), repr(rng.uniform(0, 50))])
    pick = rng.randrange(5)
    if pick == 0:
        return f"{random_expression(rng, depth + 1)} {rng.choice('+-*/^')} {random_expression(rng, depth + 1)}"
    if pick == 1:
        return f"({random_expression(rng, depth + 1)}){rng.choice('+-*/^')}({random_expression(rng, depth + 1)})"
    if pick == 2:
        return f"-{random_expression(rng, depth + 1)}"
    if pick == 3:
        fn = rng.choice(["sin", "cos", "tan", "exp", "ln", "sqrt", "abs"])
        return f"{fn}({random_expression(rng, depth + 1)})"
    fn = rng.choice(["min", "max"])
    return f"{fn}({random_expression(rng, depth + 1)}, {random_expression(rng, depth + 1)})"


def outcome(ast, t):
    try:
        return ast.eval(t)
    except ExprDomainError:
        return None


@criterion(13, "expression round trips and precedence")
def test_criterion_13_parser():
    assert parse("2^3^2").eval(0.0) == 512.0
    assert parse("-2^2").eval(0.0) == -4.0
    assert parse("1 + 2*3").eval(0.0) == 7.0
    rng = random.Random(7)
    evaluated = 0
    for _ in range(1000):
        ast = parse(random_expression(rng))
        again = parse(ast.render())
        for t in (-2.5, -0.3, 0.0, 0.7, 3.1):
            a, b = outcome(ast, t), outcome(again, t)
            assert (a is None) == (b is None), ast.render()
            if a is not None:
                assert abs(a - b) <= 1e-12 * abs(a), (ast.render(), t, a, b)
                evaluated += 1
    return f"1000 expressions, {evaluated} finite evaluations agree"


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except Exception:
                failed += 1
    for n in sorted(RESULTS):
        print(RESULTS[n])
    sys.exit(1 if failed else 0)
