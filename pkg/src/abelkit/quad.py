"""Sample grids and cumulative weighted quadrature.

The certificates need running integrals of the form::

    G(t) = int_{t0}^{t} g(s) ds
    I(t) = int_{t0}^{t} exp(G(tau) - shift) * B(tau) dtau

at every node of a (dense) grid.  Both are computed with composite Simpson
on each grid panel; ``exp(G)`` at panel midpoints uses the quadratic
interpolant of ``g`` on the panel.  The grid is refined by uniform panel
doubling until successive levels agree (the convergence guard).  A
non-finite integrand or a guard that never settles means the integrand is
treated as not integrable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

ArrayFunc = Callable[[np.ndarray], np.ndarray]

DEFAULT_DENSITY = 2048
DEFAULT_CHEBYSHEV = 64


def make_grid(
    t0: float,
    t1: float,
    density: float = DEFAULT_DENSITY,
    n_chebyshev: int = DEFAULT_CHEBYSHEV,
    include_right: bool = True,
) -> np.ndarray:
    """Uniform grid with ``density`` points per unit time plus Chebyshev nodes.

    The Chebyshev-Lobatto nodes cluster near the endpoints.  When
    ``include_right`` is false the right endpoint is dropped (half-open
    interval).
    """
    if not (math.isfinite(t0) and math.isfinite(t1) and t0 < t1):
        raise ValueError(f"grid needs a finite interval, got [{t0}, {t1}]")
    n = max(2, int(math.ceil(density * (t1 - t0))) + 1)
    pts = [np.linspace(t0, t1, n)]
    if n_chebyshev > 1:
        k = np.arange(n_chebyshev)
        cheb = 0.5 * (t0 + t1) - 0.5 * (t1 - t0) * np.cos(np.pi * k / (n_chebyshev - 1))
        pts.append(cheb)
    grid = np.unique(np.concatenate(pts))
    # drop near-duplicates so every panel has positive width
    min_gap = 1e-12 * max(1.0, abs(t0), abs(t1))
    keep = np.concatenate(([True], np.diff(grid) > min_gap))
    grid = grid[keep]
    grid[0], grid[-1] = t0, t1
    if not include_right:
        grid = grid[:-1]
    return grid


def _refine(grid: np.ndarray, level: int) -> np.ndarray:
    if level == 0:
        return grid
    m = 2**level
    frac = np.arange(m) / m
    h = np.diff(grid)
    inner = grid[:-1, None] + h[:, None] * frac[None, :]
    return np.concatenate((inner.ravel(), grid[-1:]))


@dataclass
class CumulativeIntegral:
    """Running integrals sampled on the nodes of the requested grid."""

    t: np.ndarray
    exponent: np.ndarray  # G(t)
    integral: np.ndarray  # I(t)
    abs_integral: np.ndarray  # int |exp(G - shift) B|
    abs_exponent: np.ndarray  # int |g|
    level: int
    converged: bool
    finite: bool
    change: float  # last relative change seen by the guard
    shift: float = 0.0


def _level(g: ArrayFunc, B: ArrayFunc | None, grid: np.ndarray, level: int, shift):
    nodes = _refine(grid, level)
    h = np.diff(nodes)
    mids = nodes[:-1] + 0.5 * h
    with np.errstate(all="ignore"):
        g0 = g(nodes)
        gm = g(mids)
        panel = h / 6.0 * (g0[:-1] + 4.0 * gm + g0[1:])
        G = np.concatenate(([0.0], np.cumsum(panel)))
        G_abs = np.concatenate(([0.0], np.cumsum(h / 6.0 * (np.abs(g0[:-1]) + 4.0 * np.abs(gm) + np.abs(g0[1:])))))
        G_mid = G[:-1] + h * (5.0 * g0[:-1] + 8.0 * gm - g0[1:]) / 24.0
        if shift is None:
            shift = 0.0
        elif callable(shift):
            shift = float(shift(G))
        if B is None:
            I = np.zeros_like(G)
            I_abs = np.zeros_like(G)
        else:
            w0 = np.exp(G - shift) * B(nodes)
            wm = np.exp(G_mid - shift) * B(mids)
            I = np.concatenate(([0.0], np.cumsum(h / 6.0 * (w0[:-1] + 4.0 * wm + w0[1:]))))
            I_abs = np.concatenate(
                ([0.0], np.cumsum(h / 6.0 * (np.abs(w0[:-1]) + 4.0 * np.abs(wm) + np.abs(w0[1:]))))
            )
    step = 2**level
    return G[::step], I[::step], G_abs[::step], I_abs[::step], shift


def cumulative_weighted(
    g: ArrayFunc,
    B: ArrayFunc | None,
    grid: np.ndarray,
    *,
    rtol: float = 1e-8,
    max_level: int = 4,
    shift=None,
) -> CumulativeIntegral:
    """Running ``G`` and ``I`` on ``grid`` with a refinement guard.

    Parameters
    ----------
    g, B : callables on arrays
        Exponent integrand and forcing.  ``B=None`` computes ``G`` only.
    shift : float, callable or None
        Constant subtracted inside the exponential; a callable receives the
        node values of ``G`` on the working level (used to avoid overflow).
    """
    grid = np.asarray(grid, dtype=float)
    prev = _level(g, B, grid, 0, shift)
    change = math.inf
    for level in range(1, max_level + 1):
        cur = _level(g, B, grid, level, shift)
        G0, I0, *_ = prev
        G1, I1, G1_abs, I1_abs, sh = cur
        finite = bool(np.all(np.isfinite(G1)) and np.all(np.isfinite(I1)))
        if not finite:
            return CumulativeIntegral(grid, G1, I1, I1_abs, G1_abs, level, False, False, math.inf, sh)
        dG = np.max(np.abs(G1 - G0) / (1.0 + G1_abs))
        scale = np.maximum(I1_abs, 1e-300)
        dI = np.max(np.where(I1_abs > 0, np.abs(I1 - I0) / scale, 0.0))
        change = float(max(dG, dI))
        if change < rtol:
            return CumulativeIntegral(grid, G1, I1, I1_abs, G1_abs, level, True, True, change, sh)
        prev = cur
    G1, I1, G1_abs, I1_abs, sh = prev
    return CumulativeIntegral(grid, G1, I1, I1_abs, G1_abs, max_level, False, True, change, sh)
