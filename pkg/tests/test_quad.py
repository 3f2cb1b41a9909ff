import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from abelkit.quad import cumulative_weighted, make_grid


def test_grid_contains_endpoints_and_density():
    g = make_grid(0.0, 2.0, density=100, n_chebyshev=16)
    assert g[0] == 0.0 and g[-1] == 2.0
    assert np.all(np.diff(g) > 0)
    assert len(g) >= 201


def test_half_open_grid_drops_right_end():
    g = make_grid(0.0, 1.0, density=10, include_right=False)
    assert g[-1] < 1.0


def test_grid_rejects_infinite_interval():
    with pytest.raises(ValueError):
        make_grid(0.0, math.inf)


def test_exponent_only():
    grid = make_grid(0.0, 3.0, density=64)
    res = cumulative_weighted(lambda t: np.cos(t), None, grid)
    assert res.converged and res.finite
    np.testing.assert_allclose(res.exponent, np.sin(grid), atol=1e-12)
    assert np.all(res.integral == 0.0)


def test_weighted_integral_matches_scipy():
    grid = make_grid(0.0, 10.0, density=64)
    g = lambda t: 1.0 - 0.5 * np.sin(t)  # noqa: E731
    B = lambda t: np.sin(t) ** 2  # noqa: E731
    res = cumulative_weighted(g, B, grid)
    assert res.converged

    def G(t):
        return t + 0.5 * (np.cos(t) - 1.0)

    for t in (0.5, 3.0, 7.25, 10.0):
        ref, _ = sp_integrate.quad(lambda s: math.exp(G(s)) * math.sin(s) ** 2, 0.0, t, epsabs=0, epsrel=1e-13, limit=200)
        i = int(np.argmin(np.abs(grid - t)))
        assert grid[i] == pytest.approx(t, abs=1e-3)
        ref_i, _ = sp_integrate.quad(lambda s: math.exp(G(s)) * math.sin(s) ** 2, 0.0, grid[i], epsabs=0, epsrel=1e-13, limit=200)
        assert res.integral[i] == pytest.approx(ref_i, rel=1e-9)
        assert ref > 0


def test_shift_scales_the_integral():
    grid = make_grid(0.0, 5.0, density=32)
    plain = cumulative_weighted(lambda t: np.ones_like(t), lambda t: np.ones_like(t), grid)
    shifted = cumulative_weighted(lambda t: np.ones_like(t), lambda t: np.ones_like(t), grid, shift=2.0)
    np.testing.assert_allclose(shifted.integral * math.exp(2.0), plain.integral, rtol=1e-13)
    np.testing.assert_allclose(plain.integral, np.expm1(grid), rtol=1e-10)


def test_non_integrable_exponent_is_flagged():
    # 1/t^2 near 0 diverges; refinement never settles
    grid = make_grid(0.0, 1.0, density=64)
    with np.errstate(all="ignore"):
        res = cumulative_weighted(lambda t: -1.0 / t**2, lambda t: np.ones_like(t), grid)
    assert not (res.converged and res.finite)


def test_absolute_integral_dominates():
    grid = make_grid(0.0, 6.0, density=64)
    res = cumulative_weighted(lambda t: np.zeros_like(t), lambda t: np.sin(t), grid)
    assert np.all(res.abs_integral >= np.abs(res.integral) - 1e-15)
    ref, _ = sp_integrate.quad(lambda s: abs(math.sin(s)), 0.0, 6.0, points=[math.pi], epsrel=1e-13)
    # the kink of |sin| at pi limits Simpson to a low order on one panel
    assert res.abs_integral[-1] == pytest.approx(ref, rel=1e-6)
