"""Norms, cross-grid errors and log-log rate fits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .mesh import Field, Grid1D, SpaceTimeField, exact_sum


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log e = logC + slope * log eps."""

    slope: float
    logC: float
    residual: float  # max relative deviation of the data from the fit
    c_hat: float  # max e / sqrt(eps)
    c_min: float  # min e / sqrt(eps)

    @property
    def c_spread(self) -> float:
        return self.c_hat / self.c_min


def restriction_factor(coarse: Grid1D, fine: Grid1D) -> int:
    if (coarse.xmin, coarse.xmax) != (fine.xmin, fine.xmax) or fine.nx % coarse.nx:
        raise ValueError(f"grid with {fine.nx} cells is not an integer refinement of {coarse.nx} cells")
    return fine.nx // coarse.nx


def restrict(values: np.ndarray, factor: int) -> np.ndarray:
    """Cell averages over groups of ``factor`` fine cells (last axis)."""
    values = np.asarray(values, dtype=float)
    if factor == 1:
        return values
    shape = values.shape[:-1] + (values.shape[-1] // factor, factor)
    return values.reshape(shape).mean(axis=-1)


def restrict_field(fine: SpaceTimeField, coarse_grid: Grid1D) -> SpaceTimeField:
    m = restriction_factor(coarse_grid, fine.grid)
    return SpaceTimeField(coarse_grid, fine.tgrid, restrict(fine.values, m))


def l1_qt(u: SpaceTimeField, v: SpaceTimeField) -> float:
    """L1(Q_T) distance, v restricted onto u's grid; slice times must agree."""
    m = restriction_factor(u.grid, v.grid)
    if u.tgrid.nt != v.tgrid.nt or u.tgrid.horizon != v.tgrid.horizon:
        raise ValueError("fields must share slice times")
    diff = np.abs(u.values - restrict(v.values, m))
    return exact_sum(diff * u.grid.dx * u.tgrid.weights[:, None])


def l1_slice(u: Field, v: Field) -> float:
    m = restriction_factor(u.grid, v.grid)
    return exact_sum(np.abs(np.asarray(u.values) - restrict(v.values, m)) * u.grid.dx)


def bv_seminorm(u, periodic: bool = False) -> float:
    """Sum of |u_{i+1} - u_i|, wrapping around when periodic.

    Correctly rounded: the sign of a float difference is exact, so the sum
    is taken over the signed values themselves rather than rounded jumps.
    """
    vals = np.asarray(getattr(u, "values", u), dtype=float)
    if periodic:
        vals = np.append(vals, vals[0])
    sgn = np.sign(vals[1:] - vals[:-1])
    return math.fsum(np.concatenate([sgn * vals[1:], -sgn * vals[:-1]]).tolist())


def sup_bv(field: SpaceTimeField, periodic: bool = False) -> float:
    """max over stored slices of the BV seminorm."""
    return max(bv_seminorm(row, periodic) for row in field.values)


def fit_rate(points: Sequence[Tuple[float, float]]) -> RateFit:
    pts = [(float(e), float(err)) for e, err in points]
    if len(pts) < 3:
        raise ValueError("rate fit needs at least 3 points")
    if any(not (e > 0 and err > 0) for e, err in pts):
        raise ValueError("eps and errors must be positive")
    eps = np.array([p[0] for p in pts])
    err = np.array([p[1] for p in pts])
    slope, logc = np.polyfit(np.log(eps), np.log(err), 1)
    model = np.exp(logc + slope * np.log(eps))
    ratio = err / np.sqrt(eps)
    return RateFit(slope=float(slope), logC=float(logc),
                   residual=float(np.max(np.abs(err - model) / model)),
                   c_hat=float(ratio.max()), c_min=float(ratio.min()))
