import math

import numpy as np
import pytest
from conftest import LAMBDA_MAX, ROOT3_3, eq318, eq320, eq321, eq322, eq323
from hypothesis import given, settings
from hypothesis import strategies as st

from abelkit import (
    FAILS,
    HOLDS,
    NOT_APPLICABLE,
    AbelEquation,
    Certificate,
    Interval,
    as_curve,
    certify_thm31,
    certify_thm32,
    certify_thm33,
    certify_thm34,
    certify_thm35,
    check_subsolution,
    check_supersolution,
    condition_functional,
    solve_ivp,
    suggest_envelope,
    validate_envelope,
)
from abelkit.compare import Envelope, Hypothesis, weighted_functional
from abelkit.errors import PreconditionError
from abelkit.quad import make_grid

SPAN = Interval(0.0, 20.0, closed_right=True)
GRID = make_grid(0.0, 10.0, density=256)


def eq34(lam="-3.5 + 1.5*sin(t)", mu=1.0):
    return AbelEquation.from_strings(f"{mu!r}*sin(t)", "3", "3", lam, "3.4")


# -- barrier checks ------------------------------------------------------------


def test_sqrt3_over_3_is_supersolution_of_example():
    res = check_supersolution(eq318(), ROOT3_3, GRID)
    assert res.passed
    # equality where sin^2 t = 1, up to grid resolution
    t_worst, v_worst = res.worst
    assert 0.0 <= v_worst < 1e-6
    assert math.sin(t_worst) ** 2 == pytest.approx(1.0, abs=1e-6)


def test_equilibrium_is_supersolution_with_equality():
    res = check_supersolution(eq320(), -1.0, GRID)
    assert res.passed and res.worst[1] == 0.0


def test_low_barrier_fails_near_half_pi():
    res = check_supersolution(eq318(), 0.1, GRID)
    assert not res.passed
    t, v = res.first_violation
    # 0.1 - 0.001 - lambda sin^2 t changes sign where sin^2 t = 0.099/lambda
    t_cross = math.asin(math.sqrt(0.099 / LAMBDA_MAX))
    assert t == pytest.approx(t_cross, abs=1e-2)
    assert v < 0
    assert res.worst[1] == pytest.approx(0.099 - LAMBDA_MAX, abs=1e-6)


def test_subsolution_examples():
    assert check_subsolution(eq322(), -1.0, GRID).passed
    assert check_subsolution(eq318(sign=+1.0), -ROOT3_3, GRID).passed
    res = check_subsolution(eq320(), 0.5, GRID)
    assert not res.passed
    assert res.first_violation[1] == pytest.approx(0.375)


def test_time_dependent_barrier():
    # exact solution of y' = -y^3 is a super- and subsolution at once
    eq = AbelEquation.from_strings("1", "0", "0", "0")
    eta = "(1 + 2*t)^(-0.5)"
    assert check_supersolution(eq, eta, GRID).passed
    assert check_subsolution(eq, eta, GRID).passed


def test_barrier_accepts_interval():
    assert check_supersolution(eq318(), ROOT3_3, Interval(0.0, 4.0)).passed


# -- envelope suggestions ----------------------------------------------------------


def test_suggests_sqrt3_over_3_for_example():
    levels = {round(s.level, 9): s.role for s in suggest_envelope(eq318(), GRID)}
    assert levels.get(round(ROOT3_3, 9)) == "super"


def test_unforced_equation_suggestions():
    sugg = suggest_envelope(eq320(), GRID)
    levels = sorted(s.level for s in sugg)
    for v in (-1.0, 0.0, 1.0):
        assert any(abs(v - x) < 1e-12 for x in levels)
    roles = {round(s.level, 9): s.role for s in sugg}
    # -y^3 + y is positive on (0, 1) and negative on (-1, 0)
    assert roles[0.5] == "super"
    assert roles[-0.5] == "sub"
    for s in sugg:
        check = check_supersolution if s.role == "super" else check_subsolution
        assert check(eq320(), s.level, GRID).passed


def test_triple_root_gives_single_level():
    sugg = suggest_envelope(eq323(), GRID)
    assert {round(s.level, 6) for s in sugg} == {1.0}
    assert {s.role for s in sugg} == {"super", "sub"}


def test_crossing_roots_give_no_gap_levels():
    eq = AbelEquation.from_strings("-1", "0", "1", "3*sin(t)")
    for s in suggest_envelope(eq, GRID):
        check = check_supersolution if s.role == "super" else check_subsolution
        assert check(eq, s.level, GRID).passed


# -- condition functional --------------------------------------------------------


def _k_closed_form(t, lam=LAMBDA_MAX):
    # int_0^t e^s lam sin^2 s ds
    return lam * ((np.exp(t) - 1) / 2 - (np.exp(t) * (np.cos(2 * t) + 2 * np.sin(2 * t)) - 1) / 10)


def test_condition_functional_matches_closed_form():
    grid = make_grid(0.0, 10.0, density=256)
    acc = condition_functional(eq318(), eq320(), 0.0, 0.0, grid)
    assert acc.ok and acc.shift == 0.0
    np.testing.assert_allclose(acc.K, _k_closed_form(grid), rtol=1e-9, atol=1e-12)
    assert np.all(acc.K >= 0)
    np.testing.assert_allclose(acc.log_W, grid, atol=1e-12)


def test_condition_functional_vanishes_for_identical_equations():
    eq = eq321()
    y1 = solve_ivp(eq, 0.0, 0.2, 10.0)
    acc = condition_functional(eq, eq, y1, 0.2, GRID)
    assert np.max(np.abs(acc.K)) <= 1e-12


@given(st.floats(-2, 2))
@settings(max_examples=25, deadline=None)
def test_condition_functional_linear_in_gamma(delta):
    base = condition_functional(eq318(), eq320(), 0.0, 0.0, GRID)
    moved = condition_functional(eq318(), eq320(), 0.0, delta, GRID)
    np.testing.assert_allclose(moved.K - base.K, delta, rtol=0, atol=1e-12 * (1 + np.max(np.abs(base.K))))


def test_weight_is_positive_and_starts_at_one():
    acc = condition_functional(eq321(), eq322(), -1.0, -1.0, GRID)
    assert acc.W[0] == 1.0
    assert np.all(acc.W > 0)


def test_quarter_weight():
    eq = AbelEquation.from_strings("1", "2", "1", "0")
    full = weighted_functional(eq, None, 0.0, GRID, weight="full")
    quarter = weighted_functional(eq, None, 0.0, GRID, weight="quarter")
    # c - b^2/a = -3 and c - b^2/(4a) = 0
    np.testing.assert_allclose(full.log_W, -3 * GRID, atol=1e-10)
    np.testing.assert_allclose(quarter.log_W, 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        weighted_functional(eq, None, 0.0, GRID, weight="half")


def test_overflowing_weight_keeps_sign_information():
    eq = AbelEquation.from_strings("-1", "0", "20", "-1")
    grid = make_grid(0.0, 60.0, density=64)
    acc = condition_functional(eq, AbelEquation.from_strings("-1", "0", "20", "0"), 0.0, 0.0, grid)
    assert acc.shift > 0 and acc.finite
    assert np.all(acc.K[1:] > 0)


# -- certifiers ------------------------------------------------------------------


def test_thm31_example_holds_with_envelope():
    cert = certify_thm31(eq318(), eq320(), 0.0, ROOT3_3, 0.0, SPAN)
    assert cert.verdict == HOLDS
    np.testing.assert_allclose(cert.envelope.lower, 0.0, atol=1e-12)
    np.testing.assert_allclose(cert.envelope.upper, ROOT3_3)
    assert cert.initial_interval == pytest.approx((0.0, ROOT3_3))
    names = [h.name for h in cert.hypotheses]
    assert names[:2] == ["a_negative", "y1_exists"]
    assert "weighted_condition" in names and "eta_supersolution" in names


def test_thm31_fails_for_large_forcing():
    cert = certify_thm31(eq318(lam=0.5), eq320(), 0.0, ROOT3_3, 0.0, SPAN)
    assert cert.verdict == FAILS
    assert cert.envelope is None
    assert not cert.hypothesis("eta_supersolution").passed
    t, _ = cert.first_violation
    assert math.sin(t) ** 2 > (ROOT3_3 - ROOT3_3**3) / 0.5 - 1e-3


def test_thm31_not_applicable_for_positive_a():
    eq = AbelEquation.from_strings("1", "0", "1", "-0.1*sin(t)^2")
    cert = certify_thm31(eq, eq320(), 0.0, ROOT3_3, 0.0, SPAN)
    assert cert.verdict == NOT_APPLICABLE
    assert "a" in cert.reason


def test_thm31_preconditions():
    with pytest.raises(PreconditionError):
        certify_thm31(eq318(), eq320(), 0.0, ROOT3_3, 0.9, SPAN)
    with pytest.raises(PreconditionError):
        certify_thm31(eq318(), eq320(), 0.0, -0.2, 0.0, SPAN)


def test_thm32_mirror_holds():
    cert = certify_thm32(eq318(sign=+1.0), eq320(), 0.0, -ROOT3_3, 0.0, SPAN)
    assert cert.verdict == HOLDS
    np.testing.assert_allclose(cert.envelope.lower, -ROOT3_3)
    np.testing.assert_allclose(cert.envelope.upper, 0.0, atol=1e-12)


def test_thm32_gamma_above_reference_is_rejected():
    with pytest.raises(PreconditionError):
        certify_thm32(eq318(sign=+1.0), eq320(), 0.0, -ROOT3_3, 0.1, SPAN)


def test_thm32_zero_forcing_boundary_case():
    cert = certify_thm32(eq318(lam=0.0, sign=+1.0), eq320(), 0.0, -ROOT3_3, 0.0, SPAN)
    assert cert.verdict == HOLDS
    assert cert.hypothesis("weighted_condition").evidence["worst"][1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("mu", [2.0, 1.0, 0.0])
def test_thm33_example(mu):
    cert = certify_thm33(eq321(mu), eq322(), eq323(), -1.0, 1.0, -1.0, 1.0, SPAN)
    assert cert.verdict == HOLDS
    np.testing.assert_allclose(cert.envelope.lower, -1.0, atol=1e-12)
    np.testing.assert_allclose(cert.envelope.upper, 1.0, atol=1e-12)


def test_thm33_preconditions():
    with pytest.raises(PreconditionError):
        certify_thm33(eq321(), eq322(), eq323(), -1.0, 1.0, 0.5, 0.0, SPAN)


def test_thm34_identical_equations_both_directions():
    eq = AbelEquation.from_strings("1", "0", "1", "-sin(t)")
    for direction in ("below", "above"):
        cert = certify_thm34(eq, eq, 0.3, direction, SPAN)
        assert cert.verdict == HOLDS, cert.summary()


def test_thm34_shifted_forcing_keeps_order():
    ref = AbelEquation.from_strings("1", "0", "0", "-sin(t)")
    main = AbelEquation.from_strings("1", "0", "0", "-sin(t) - 0.1")
    cert = certify_thm34(main, ref, 0.0, "below", SPAN)
    assert cert.verdict == HOLDS
    assert cert.envelope.upper is None
    y1 = solve_ivp(ref, 0.0, 0.0, 20.0)
    for g in (0.0, 0.5, 2.0):
        y = solve_ivp(main, 0.0, g, 20.0)
        t = np.union1d(y.t, y1.t)
        assert np.all(y.at(t) >= y1.at(t) - 1e-9)
    assert certify_thm34(main, ref, 0.0, "above", SPAN).verdict == FAILS


def test_thm34_mixed_sign_fails():
    ref = AbelEquation.from_strings("1", "0", "0", "0")
    main = AbelEquation.from_strings("1", "0", "0", "-0.1*sin(t)")
    cert = certify_thm34(main, ref, 0.0, "below", SPAN)
    assert cert.verdict == FAILS
    assert cert.first_violation[0] == pytest.approx(math.pi, abs=1e-2)


def test_thm34_needs_positive_a():
    cert = certify_thm34(eq318(), eq320(), 0.0, "below", SPAN)
    assert cert.verdict == NOT_APPLICABLE


def test_thm35_example():
    cert = certify_thm35(eq34(), eq322(), eq323(), -1.0, 1.0, SPAN)
    assert cert.verdict == HOLDS


def test_thm35_pinched_envelope():
    eq = eq323()
    cert = certify_thm35(eq, eq, eq, 1.0, 1.0, SPAN)
    assert cert.verdict == HOLDS
    np.testing.assert_allclose(cert.envelope.lower, cert.envelope.upper)


def test_thm35_forcing_outside_range_fails():
    cert = certify_thm35(eq34(lam="-6"), eq322(), eq323(), -1.0, 1.0, SPAN)
    assert cert.verdict == FAILS


def test_reference_given_as_curve():
    cert = certify_thm31(eq318(), eq320(), "0", ROOT3_3, 0.0, SPAN)
    assert cert.holds
    bad = certify_thm31(eq318(), eq320(), "0.1*sin(t)", ROOT3_3, 0.0, SPAN)
    assert not bad.holds
    assert not bad.hypothesis("y1_solves_reference").passed


def test_unbounded_interval_is_truncated_at_horizon():
    cert = certify_thm31(eq318(), eq320(), 0.0, ROOT3_3, 0.0, Interval(0.0, math.inf), horizon=15.0)
    assert cert.holds
    assert cert.grid_spec["verified_up_to"] == pytest.approx(15.0)


# -- simulation backing --------------------------------------------------------------


@pytest.mark.parametrize(
    "make",
    [
        lambda: certify_thm31(eq318(), eq320(), 0.0, ROOT3_3, 0.0, SPAN),
        lambda: certify_thm32(eq318(sign=+1.0), eq320(), 0.0, -ROOT3_3, 0.0, SPAN),
        lambda: certify_thm33(eq321(), eq322(), eq323(), -1.0, 1.0, -1.0, 1.0, SPAN),
        lambda: certify_thm35(eq34(), eq322(), eq323(), -1.0, 1.0, SPAN),
    ],
)
def test_certified_envelopes_contain_trajectories(make):
    cert = make()
    assert cert.holds
    eq = {"Thm3.1": eq318(), "Thm3.2": eq318(sign=+1.0), "Thm3.3": eq321(), "Thm3.5": eq34()}[cert.theorem]
    rep = validate_envelope(eq, cert, n=20)
    assert rep.ok(1e-6)
    # strictly interior starts stay strictly inside
    lo, hi = cert.initial_interval
    inner = validate_envelope(eq, cert, initial_values=np.linspace(lo, hi, 7)[1:-1])
    assert inner.min_margin > 0


def test_grid_refinement_does_not_flip_verdicts():
    for density in (512, 1024):
        assert certify_thm31(eq318(), eq320(), 0.0, ROOT3_3, 0.0, SPAN, density=density).holds
        assert certify_thm33(eq321(), eq322(), eq323(), -1.0, 1.0, -1.0, 1.0, SPAN, density=density).holds
        assert certify_thm35(eq34(), eq322(), eq323(), -1.0, 1.0, SPAN, density=density).holds


# -- certificate invariants ----------------------------------------------------------


def test_holds_requires_every_hypothesis():
    with pytest.raises(ValueError):
        Certificate("X", HOLDS, [Hypothesis("h", False)], {})


def test_envelope_only_with_holds():
    env = Envelope(np.array([0.0, 1.0]), np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        Certificate("X", FAILS, [Hypothesis("h", False)], {}, envelope=env)


def test_envelope_contains():
    env = Envelope(np.array([0.0, 1.0]), np.zeros(2), None)
    assert env.contains(np.array([0.5]), np.array([1e9]))[0]
    assert not env.contains(np.array([0.5]), np.array([-1e-3]))[0]


def test_as_curve_accepts_many_shapes():
    t = np.linspace(0, 1, 5)
    assert np.all(as_curve(2.0)(t) == 2.0)
    assert np.allclose(as_curve("t^2")(t), t**2)
    assert np.allclose(as_curve(lambda s: s + 1)(t), t + 1)
    samples = as_curve((t, 3 * t))
    assert np.allclose(samples.derivative(np.array([0.5])), 3.0)
    tr = solve_ivp(eq320(), 0.0, 0.5, 1.0)
    assert as_curve(tr).covers(0.0, 1.0) and not as_curve(tr).covers(0.0, 2.0)
    with pytest.raises(TypeError):
        as_curve(object())
