"""Problem instances for 1D degenerate convection-diffusion.

A problem is the data ``(f, A, V, w0, [xmin, xmax], T, bc)`` of

    w_t + (V(x) f(w))_x = A(w)_xx.

Coefficient functions are piecewise-linear interpolants of sampled values so
that Lipschitz constants, monotonicity and flat regions are exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .mesh import Grid1D

BOUNDARY_RULES = ("periodic", "outflow")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarFn1D:
    """Piecewise-linear function of the state, constant outside its breakpoints."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = _frozen(self.breakpoints)
        vals = _frozen(self.values)
        if bp.ndim != 1 or bp.shape != vals.shape or bp.size < 2:
            raise ValueError("breakpoints and values must be 1D arrays of equal length >= 2")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(vals))):
            raise ValueError("breakpoints and values must be finite")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, func: Callable, breakpoints) -> "ScalarFn1D":
        bp = np.asarray(breakpoints, dtype=float)
        return cls(bp, np.asarray(func(bp), dtype=float))

    @classmethod
    def zero(cls, lo: float = -1.0, hi: float = 1.0) -> "ScalarFn1D":
        return cls([lo, hi], [0.0, 0.0])

    def __call__(self, w):
        return np.interp(w, self.breakpoints, self.values)

    @property
    def lo(self) -> float:
        return float(self.breakpoints[0])

    @property
    def hi(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0.0))

    def in_range(self, w, slack: float = 1e-12) -> bool:
        w = np.asarray(w, dtype=float)
        span = self.hi - self.lo
        return bool(np.all((w >= self.lo - slack * span) & (w <= self.hi + slack * span)))

    def _cumulative(self, part: np.ndarray) -> "ScalarFn1D":
        # running integral of a piecewise-constant slope, anchored at w = 0
        inc = part * np.diff(self.breakpoints)
        cum = np.concatenate([[0.0], np.cumsum(inc)])
        at_zero = np.interp(0.0, self.breakpoints, cum)
        return ScalarFn1D(self.breakpoints, cum - at_zero)

    def positive_part(self) -> "ScalarFn1D":
        """f+(u) = f(0) + integral_0^u max(f', 0)."""
        g = self._cumulative(np.maximum(self.slopes, 0.0))
        return ScalarFn1D(g.breakpoints, g.values + float(self(0.0)))

    def negative_part(self) -> "ScalarFn1D":
        """f-(u) = integral_0^u min(f', 0)."""
        return self._cumulative(np.minimum(self.slopes, 0.0))


@dataclass(frozen=True, eq=False)
class DiffusionFn:
    """A^eps(w) = A(w) + eps * w."""

    base: ScalarFn1D
    eps: float = 0.0

    def __post_init__(self):
        if not self.eps >= 0.0:
            raise ValueError("eps must be nonnegative")

    def __call__(self, w):
        return self.base(w) + self.eps * np.asarray(w, dtype=float)

    @property
    def lipschitz(self) -> float:
        return self.base.lipschitz + self.eps

    @property
    def min_slope(self) -> float:
        return float(np.min(self.base.slopes)) + self.eps


@dataclass(frozen=True, eq=False)
class VelocityField1D:
    """V sampled at the nx + 1 cell interfaces of a grid.

    ``div_values`` are the difference quotients (V[i+1] - V[i]) / dx located at
    cell centres.
    """

    grid: Grid1D
    node_values: np.ndarray

    def __post_init__(self):
        nv = _frozen(self.node_values)
        if nv.shape != (self.grid.nx + 1,):
            raise ValueError("node_values must have nx + 1 entries")
        object.__setattr__(self, "node_values", nv)

    @classmethod
    def from_function(cls, func: Callable, grid: Grid1D, periodic: bool = False):
        nodes = np.asarray(func(grid.interfaces), dtype=float) * np.ones(grid.nx + 1)
        if periodic:
            nodes = nodes.copy()
            nodes[-1] = nodes[0]
        return cls(grid, nodes)

    @property
    def center_values(self) -> np.ndarray:
        return 0.5 * (self.node_values[1:] + self.node_values[:-1])

    @property
    def div_values(self) -> np.ndarray:
        return np.diff(self.node_values) / self.grid.dx

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.node_values)))

    @property
    def lip_v(self) -> float:
        return float(np.max(np.abs(self.div_values)))

    @property
    def div_sup(self) -> float:
        return float(np.max(np.abs(self.div_values)))

    @property
    def bv_div(self) -> float:
        return float(np.sum(np.abs(np.diff(self.div_values))))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance of the degenerate convection-diffusion problem.

    ``velocity`` and ``w0`` are callables of x so that the same problem can be
    sampled on any grid; ``initial_values`` and ``velocity_field`` do the
    sampling.
    """

    f: ScalarFn1D
    a: ScalarFn1D
    velocity: Callable
    w0: Callable
    domain: Tuple[float, float]
    horizon: float
    bc: str = "outflow"
    name: str = "custom"

    def __post_init__(self):
        if self.bc not in BOUNDARY_RULES:
            raise ValueError(f"unknown boundary rule {self.bc!r}")
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @property
    def periodic(self) -> bool:
        return self.bc == "periodic"

    def grid(self, nx: int) -> Grid1D:
        return Grid1D(self.domain[0], self.domain[1], nx)

    def velocity_field(self, grid: Grid1D) -> VelocityField1D:
        return VelocityField1D.from_function(self.velocity, grid, periodic=self.periodic)

    def initial_values(self, grid: Grid1D) -> np.ndarray:
        """Exact cell averages when ``w0`` provides ``average(lo, hi)``, else centre samples."""
        edges = grid.interfaces
        if hasattr(self.w0, "average"):
            return np.asarray(self.w0.average(edges[:-1], edges[1:]), dtype=float) * np.ones(grid.nx)
        return np.asarray(self.w0(grid.centers), dtype=float) * np.ones(grid.nx)

    def diffusion(self, eps: float = 0.0) -> DiffusionFn:
        return DiffusionFn(self.a, eps)


def validate_problem(spec: ProblemSpec, nx: int = 512) -> List[str]:
    """Names of the violated coefficient hypotheses; empty when all hold.

    V and w0 are checked on an ``nx``-cell sampling of the domain.
    """
    report = []
    f, a = spec.f, spec.a
    if f(0.0) != 0.0:
        report.append("f(0)=0")
    if a(0.0) != 0.0:
        report.append("A(0)=0")
    if not a.is_nondecreasing():
        report.append("A nondecreasing")
    if not np.isfinite(f.lipschitz):
        report.append("f locally Lipschitz")
    if not np.isfinite(a.lipschitz):
        report.append("A locally Lipschitz")
    if not spec.horizon > 0:
        report.append("T>0")

    grid = spec.grid(nx)
    try:
        vel = spec.velocity_field(grid)
        v_ok = np.all(np.isfinite(vel.node_values))
    except (ValueError, TypeError):
        v_ok = False
    if not v_ok:
        report.append("V bounded")
    else:
        if not np.isfinite(vel.lip_v):
            report.append("V Lipschitz")
        if not np.isfinite(vel.bv_div):
            report.append("div V in BV")

    w0 = spec.initial_values(grid)
    if not np.all(np.isfinite(w0)):
        report.append("w0 bounded")
    elif not np.isfinite(np.sum(np.abs(np.diff(w0)))):
        report.append("w0 in BV")
    return report


@dataclass(frozen=True)
class FlatRegions:
    """Maximal closed state intervals on which A is constant."""

    intervals: Tuple[Tuple[float, float], ...] = ()

    def contains(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        mask = np.zeros(w.shape, dtype=bool)
        for lo, hi in self.intervals:
            mask |= (w >= lo) & (w <= hi)
        return mask

    def __len__(self):
        return len(self.intervals)


def flat_regions(a: ScalarFn1D) -> FlatRegions:
    """All maximal intervals of zero slope of a nondecreasing ``a``."""
    if not a.is_nondecreasing():
        raise ValueError("flat regions are defined for nondecreasing A only")
    bp = a.breakpoints
    flat = np.diff(a.values) == 0.0
    intervals = []
    start: Optional[int] = None
    for j, is_flat in enumerate(flat):
        if is_flat and start is None:
            start = j
        elif not is_flat and start is not None:
            intervals.append((float(bp[start]), float(bp[j])))
            start = None
    if start is not None:
        intervals.append((float(bp[start]), float(bp[-1])))
    return FlatRegions(tuple(intervals))


def hyperbolic_mask(field, regions: FlatRegions) -> np.ndarray:
    """True where the field value lies in a flat region of A."""
    values = field.values if hasattr(field, "values") else field
    return regions.contains(values)
