import math

import numpy as np
import pytest
from conftest import LAMBDA_MAX, ROOT3_3, eq318, eq320, eq322, eq323
from hypothesis import given, settings
from hypothesis import strategies as st

from abelkit import AbelEquation, Interval, solve_cubic
from abelkit.expr import ExprDomainError
from abelkit.model import cubic_roots, fd_step, residual, rhs

GRID = np.linspace(0.0, 10.0, 201)


def test_rhs_zero_at_equilibrium_of_unforced_equation():
    for t in (0.0, 1.3, 40.0):
        assert rhs(eq320(), t, 0.0) == 0.0


def test_rhs_zero_on_reference_solution_one():
    for t in (0.0, 2.0):
        assert rhs(eq323(), t, 1.0) == 0.0


def test_rhs_pure_cubic():
    eq = AbelEquation.from_strings("1", "0", "0", "0")
    assert rhs(eq, 0.0, 2.0) == -8.0


def test_rhs_function_matches_rhs():
    eq = eq318()
    f = eq.rhs_function()
    for t, y in [(0.3, 0.1), (2.0, -1.5), (7.7, 3.0)]:
        assert f(t, y) == pytest.approx(rhs(eq, t, y), rel=1e-15)


@given(st.floats(-10, 10), st.floats(-5, 5), st.floats(-3, 3))
def test_rhs_linear_in_forcing(t, y, delta):
    base = AbelEquation.from_strings("sin(t)", "t", "1 + t^2", "cos(t)")
    shifted = AbelEquation.from_strings("sin(t)", "t", "1 + t^2", f"cos(t) + {delta!r}")
    assert rhs(shifted, t, y) - rhs(base, t, y) == pytest.approx(-delta, abs=1e-12 * (1 + abs(y) ** 3 * 100))


def test_residual_of_exact_reference_solutions():
    assert residual(eq322(), lambda t: -1.0, GRID) <= 1e-10
    assert residual(eq320(), lambda t: 0.0, GRID) == 0.0


def test_residual_of_constant_against_unforced_equation():
    # |-(s)^3 + s| at s = sqrt(3)/3 is 2 sqrt(3)/9
    assert residual(eq320(), lambda t: ROOT3_3, GRID) == pytest.approx(LAMBDA_MAX, rel=1e-12)


def test_residual_of_closed_form_solution():
    eq = AbelEquation.from_strings("1", "0", "0", "0")
    # y = (1 + 2t)^(-1/2) solves y' = -y^3; the central difference costs O(h^2)
    assert residual(eq, lambda t: (1 + 2 * t) ** -0.5, np.linspace(0, 4, 41)) < 1e-9


def test_fd_step_scales_with_t():
    assert fd_step(0.5) == 1e-5
    assert fd_step(-200.0) == pytest.approx(2e-3)


def test_cubic_roots_of_unforced_equation():
    sec = cubic_roots(eq320(), 1.7)
    assert sec.roots == pytest.approx((-1.0, 0.0, 1.0), abs=1e-14)
    assert sec.leading_sign == -1 and not sec.degenerate


def test_cubic_roots_triple_root():
    sec = cubic_roots(eq323(), 0.0)
    assert len(sec.roots) == 3
    assert sec.roots == pytest.approx((1.0, 1.0, 1.0), abs=1e-5)


def test_cubic_roots_without_forcing_reduce_to_unforced():
    assert cubic_roots(eq318(lam=0.0), 2.2).roots == pytest.approx((-1.0, 0.0, 1.0), abs=1e-14)


def test_cubic_roots_single_real_root():
    roots, degenerate = solve_cubic(1.0, 0.0, 1.0, 1.0)
    assert len(roots) == 1 and not degenerate
    r = roots[0]
    assert abs(r**3 + r + 1) <= 1e-9 * (1 + abs(r) ** 3)


def test_degenerate_leading_coefficient_falls_back():
    roots, degenerate = solve_cubic(1e-15, 1.0, -3.0, 2.0)
    assert degenerate
    assert roots == pytest.approx((1.0, 2.0), abs=1e-12)
    roots, degenerate = solve_cubic(0.0, 0.0, 2.0, -1.0)
    assert degenerate and roots == pytest.approx((0.5,))


def _from_roots(r1, r2, r3, k):
    return k, -k * (r1 + r2 + r3), k * (r1 * r2 + r1 * r3 + r2 * r3), -k * r1 * r2 * r3


@given(
    st.floats(-20, 20),
    st.floats(0.1, 15),
    st.floats(0.1, 15),
    st.floats(0.1, 10.0),
    st.sampled_from([-1.0, 1.0]),
)
@settings(max_examples=500)
def test_recovers_separated_synthesized_roots(r1, gap1, gap2, scale, sign):
    r2, r3 = r1 + gap1, r1 + gap1 + gap2
    a, b, c, d = _from_roots(r1, r2, r3, sign * scale)
    found, degenerate = solve_cubic(a, b, c, d)
    assert not degenerate and len(found) == 3
    assert found == pytest.approx((r1, r2, r3), abs=1e-8)
    for r in found:
        assert abs(((a * r + b) * r + c) * r + d) <= 1e-9 * (1 + abs(r) ** 3) * abs(a)


@given(st.floats(-20, 20), st.floats(1e-4, 1e-1), st.floats(1e-4, 1e-1))
@settings(max_examples=300)
def test_clustered_roots_within_conditioning(r1, gap1, gap2):
    r2, r3 = r1 + gap1, r1 + gap1 + gap2
    coeffs = _from_roots(r1, r2, r3, 1.0)
    found, _ = solve_cubic(*coeffs)
    assert len(found) == 3
    for r, f in zip((r1, r2, r3), found):
        # first-order root sensitivity to coefficient rounding
        size = sum(abs(k) * abs(r) ** (3 - i) for i, k in enumerate(coeffs))
        slope = abs(np.prod([r - s for s in (r1, r2, r3) if s != r]))
        eps = np.finfo(float).eps
        assert abs(f - r) <= 1e3 * eps * size / slope + 64 * eps * max(1.0, abs(r3))


def test_reflected_equation_is_satisfied_by_negation():
    eq = AbelEquation.from_strings("sin(t)", "1 + t", "cos(t)", "t^2")
    ref = eq.reflected()
    for t, y in [(0.0, 0.3), (1.5, -2.0), (4.0, 1.1)]:
        assert rhs(ref, t, -y) == pytest.approx(-rhs(eq, t, y), rel=1e-14, abs=1e-14)


def test_probe_raises_on_undefined_coefficient():
    eq = AbelEquation.from_strings("-1", "0", "1", "ln(t)")
    eq.probe(1.0, 2.0)
    with pytest.raises(ExprDomainError):
        eq.probe(-1.0, 1.0)


def test_interval_validation_and_truncation():
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)
    with pytest.raises(ValueError):
        Interval(math.inf, math.inf)
    iv = Interval(0.0, math.inf)
    assert not iv.bounded
    cut = iv.truncated(25.0)
    assert cut.t1 == 25.0 and cut.closed_right
    assert Interval(0.0, 3.0).truncated(25.0).t1 == 3.0


def test_describe_keeps_sources():
    assert eq320().describe() == {"label": "3.20", "a": "-1", "b": "0", "c": "1", "d": "0"}
