"""Closed-form solutions and a brute-force quadrature used as test oracles."""
from __future__ import annotations

from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.special import erfc

from .mesh import exact_sum


def heat_exact(jumps: Sequence[Tuple[float, float]], kappa: float, x, t, base: float = 0.0):
    """Heat-kernel evolution of piecewise-constant data.

    Data is ``base + sum_j h_j * 1{x > x_j}`` given as ``jumps = [(x_j, h_j), ...]``;
    a box of height c on (a, b) is ``[(a, c), (b, -c)]``. The solution of
    u_t = kappa u_xx is base + sum_j h_j erfc((x_j - x) / sqrt(4 kappa t)) / 2.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    x = np.asarray(x, dtype=float)
    scale = np.sqrt(4.0 * kappa * t)
    out = np.full(x.shape, float(base))
    for xj, hj in jumps:
        out = out + 0.5 * hj * erfc((xj - x) / scale)
    return out


def _ierfc(z):
    # antiderivative of erfc
    return z * erfc(z) - np.exp(-z * z) / np.sqrt(np.pi)


def heat_exact_average(jumps: Sequence[Tuple[float, float]], kappa: float, lo, hi, t,
                       base: float = 0.0):
    """Exact averages of ``heat_exact`` over the cells [lo, hi]."""
    if not t > 0:
        raise ValueError("t must be positive")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    scale = np.sqrt(4.0 * kappa * t)
    out = np.full(lo.shape, float(base))
    for xj, hj in jumps:
        # d/dx erfc((xj - x)/scale) integrates to -scale * ierfc((xj - x)/scale)
        span = _ierfc((xj - lo) / scale) - _ierfc((xj - hi) / scale)
        out = out + 0.5 * hj * scale * span / (hi - lo)
    return out


def box_jumps(height: float, lo: float, hi: float):
    return [(lo, height), (hi, -height)]


def advection_exact(w0: Callable, v0: float, x, t, domain=None):
    """w0(x - v0 t), wrapped into ``domain`` when given (periodic)."""
    xs = np.asarray(x, dtype=float) - v0 * t
    if domain is not None:
        lo, hi = domain
        xs = lo + np.mod(xs - lo, hi - lo)
    return w0(xs)


def burgers_riemann(a: float, b: float, x, t):
    """Entropy solution of w_t + (w^2/2)_x = 0 with data a for x < 0, b for x > 0."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    if a > b:
        return np.where(x < 0.5 * (a + b) * t, a, b)
    return np.clip(x / t, a, b)


def brute_quadrature(evaluator: Callable, region, m: int = 2, nx: int = 64, nt: int = 64) -> float:
    """Midpoint-in-x, trapezoid-in-t rule on an (m nx) x (m nt) grid of ``region``.

    ``region = (xmin, xmax, tmin, tmax)``; evaluated point by point.
    """
    if m < 2:
        raise ValueError("resolution multiplier must be >= 2")
    xmin, xmax, tmin, tmax = region
    nxm, ntm = m * nx, m * nt
    dx = (xmax - xmin) / nxm
    dt = (tmax - tmin) / ntm
    terms = []
    for j in range(ntm + 1):
        t = tmin + j * dt
        wt = dt * (0.5 if j in (0, ntm) else 1.0)
        for i in range(nxm):
            x = xmin + (i + 0.5) * dx
            terms.append(float(evaluator(x, t)) * dx * wt)
    return exact_sum(terms)
