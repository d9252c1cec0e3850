"""Uniform space-time grids, gridded fields and deterministic quadrature.

Integrals over Q_T use the midpoint rule in space (cell centres) and the
trapezoid rule in time (stored slices). All reductions go through
``exact_sum`` (``math.fsum``), which is correctly rounded and therefore
independent of summation order; windowed and exhaustive sums of the same
nonzero terms agree bit for bit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np


def exact_sum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform cell-centred grid on [xmin, xmax]."""

    xmin: float
    xmax: float
    nx: int

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 4:
            raise ValueError("nx must be an integer >= 4")
        if not self.xmax > self.xmin:
            raise ValueError("xmax must exceed xmin")
        object.__setattr__(self, "nx", int(self.nx))

    @property
    def length(self) -> float:
        return self.xmax - self.xmin

    @property
    def dx(self) -> float:
        return (self.xmax - self.xmin) / self.nx

    @property
    def centers(self) -> np.ndarray:
        return self.xmin + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        return self.xmin + np.arange(self.nx + 1) * self.dx

    def refine(self, factor: int) -> "Grid1D":
        return Grid1D(self.xmin, self.xmax, self.nx * int(factor))

    def __eq__(self, other):
        return (isinstance(other, Grid1D) and self.nx == other.nx
                and self.xmin == other.xmin and self.xmax == other.xmax)

    def __hash__(self):
        return hash((self.xmin, self.xmax, self.nx))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of nt intervals on [0, T]."""

    horizon: float
    nt: int

    def __post_init__(self):
        if int(self.nt) != self.nt or self.nt < 1:
            raise ValueError("nt must be a positive integer")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "nt", int(self.nt))

    @property
    def dt(self) -> float:
        return self.horizon / self.nt

    @property
    def times(self) -> np.ndarray:
        # j * T / nt rather than j * dt so the last entry is exactly T
        return self.horizon * np.arange(self.nt + 1) / self.nt

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights for the nt + 1 slice times."""
        w = np.full(self.nt + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.nx,):
            raise ValueError(f"expected {self.grid.nx} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Stored slices w(x_i, t_j), j = 0..nt, as an (nt + 1, nx) array."""

    grid: Grid1D
    tgrid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.tgrid.nt + 1, self.grid.nx):
            raise ValueError(f"expected shape {(self.tgrid.nt + 1, self.grid.nx)}, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return self.tgrid.times

    def slice(self, j: int) -> Field:
        return Field(self.grid, self.values[j])

    @property
    def final(self) -> Field:
        return self.slice(self.tgrid.nt)

    def at_time(self, t: float) -> np.ndarray:
        """Linear interpolation between stored slices."""
        if not 0.0 <= t <= self.tgrid.horizon:
            raise ValueError("time outside [0, T]")
        pos = t / self.tgrid.dt
        j = min(int(math.floor(pos)), self.tgrid.nt - 1)
        theta = pos - j
        return (1.0 - theta) * self.values[j] + theta * self.values[j + 1]

    def subsample(self, stride: int) -> "SpaceTimeField":
        if self.tgrid.nt % stride:
            raise ValueError("stride must divide the number of stored intervals")
        return SpaceTimeField(self.grid, TimeGrid(self.tgrid.horizon, self.tgrid.nt // stride),
                              self.values[::stride])

    @classmethod
    def constant(cls, grid: Grid1D, tgrid: TimeGrid, value: float) -> "SpaceTimeField":
        return cls(grid, tgrid, np.full((tgrid.nt + 1, grid.nx), float(value)))


def quad_qt(evaluator: Callable, grid: Grid1D, tgrid: TimeGrid) -> float:
    """Sum eval(x_i, t_j) dx w_j over cell centres and slice times.

    ``evaluator`` is called once with broadcastable arrays x of shape (1, nx)
    and t of shape (nt + 1, 1).
    """
    x = grid.centers[None, :]
    t = tgrid.times[:, None]
    vals = np.broadcast_to(np.asarray(evaluator(x, t), dtype=float), (tgrid.nt + 1, grid.nx))
    return integrate_qt(vals, grid, tgrid)


def integrate_qt(values: np.ndarray, grid: Grid1D, tgrid: TimeGrid) -> float:
    """Quadrature of gridded (nt + 1, nx) integrand values."""
    return exact_sum(values * grid.dx * tgrid.weights[:, None])


def _pairs_within(coords: np.ndarray, radius: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    n = coords.size
    if radius is None:
        i, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        return i.ravel(), k.ravel()
    # generous window; terms it admits beyond the true support are exact zeros
    reach = radius * (1.0 + 1e-9) + 1e-12
    i_list, k_list = [], []
    for i in range(n):
        k = np.nonzero(np.abs(coords - coords[i]) <= reach)[0]
        i_list.append(np.full(k.size, i))
        k_list.append(k)
    return np.concatenate(i_list), np.concatenate(k_list)


def quad_qtqt(evaluator: Callable, grid: Grid1D, tgrid: TimeGrid,
              support: Optional[Tuple[float, float]] = None, indexed: bool = False,
              block: int = 4096) -> float:
    """Quadrature over Q_T x Q_T of an integrand in (x, t, y, s).

    Each term is ``eval * (dx * dx) * (w_j * w_l)``. With ``support=(r, r0)``
    only index pairs with |x - y| <= r and |t - s| <= r0 are visited; the
    evaluator must vanish outside that window. With ``indexed=True`` the
    evaluator receives index arrays (i, j, k, l) instead of coordinates.
    """
    x, t, wt = grid.centers, tgrid.times, tgrid.weights
    r, r0 = support if support is not None else (None, None)
    ix, ky = _pairs_within(x, r)
    jt, ls = _pairs_within(t, r0)
    area = grid.dx * grid.dx
    tw = wt[jt] * wt[ls]
    terms = []
    for start in range(0, jt.size, block):
        J = jt[start:start + block][:, None]
        L = ls[start:start + block][:, None]
        I, K = ix[None, :], ky[None, :]
        if indexed:
            vals = evaluator(I, J, K, L)
        else:
            vals = evaluator(x[I], t[J], x[K], t[L])
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (J.shape[0], I.shape[1]))
        terms.append((vals * area * tw[start:start + block][:, None]).ravel())
    return exact_sum(np.concatenate(terms)) if terms else 0.0


def write_field_csv(path, field: Field) -> None:
    """Snapshot CSV with header ``x,w`` and 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("x,w\n")
        for xi, wi in zip(field.grid.centers, field.values):
            fh.write(f"{xi:.17g},{wi:.17g}\n")


def read_field_csv(path) -> Field:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"x", "w"}:
        raise ValueError(f"{path}: expected header x,w")
    x = np.array([float(r["x"]) for r in rows])
    w = np.array([float(r["w"]) for r in rows])
    dx = (x[-1] - x[0]) / (x.size - 1)
    grid = Grid1D(x[0] - 0.5 * dx, x[-1] + 0.5 * dx, x.size)
    if not np.allclose(grid.centers, x, rtol=0, atol=1e-9 * grid.length):
        raise ValueError(f"{path}: x column is not a uniform cell-centred grid")
    return Field(grid, w)


def write_spacetime_dir(directory, field: SpaceTimeField) -> list:
    """One snapshot CSV per stored slice plus ``slices.csv`` (index,t,file)."""
    directory = Path(directory)
    (directory / "snapshots").mkdir(parents=True, exist_ok=True)
    files = []
    with open(directory / "slices.csv", "w", newline="") as fh:
        fh.write("index,t,file\n")
        for j, t in enumerate(field.times):
            name = f"snapshots/slice_{j:05d}.csv"
            write_field_csv(directory / name, field.slice(j))
            fh.write(f"{j},{t:.17g},{name}\n")
            files.append(name)
    return files


def read_spacetime_dir(directory) -> SpaceTimeField:
    directory = Path(directory)
    with open(directory / "slices.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) < 2:
        raise ValueError(f"{directory}: need at least two slices")
    times = np.array([float(r["t"]) for r in rows])
    slices = [read_field_csv(directory / r["file"]) for r in rows]
    grid = slices[0].grid
    if any(s.grid != grid for s in slices):
        raise ValueError(f"{directory}: slices live on different grids")
    tgrid = TimeGrid(times[-1], len(rows) - 1)
    if times[0] != 0.0 or not np.allclose(tgrid.times, times, rtol=1e-12, atol=0):
        raise ValueError(f"{directory}: slice times must be uniform from 0 to T")
    return SpaceTimeField(grid, tgrid, np.array([s.values for s in slices]))
