"""Named problem instances and CSV-defined custom problems."""
from __future__ import annotations

import csv
from typing import Dict

import numpy as np

from .problem import ProblemSpec, ScalarFn1D

# breakpoints k/100 so that 0, 0.25, 0.7, ... are represented exactly
_UNIT = np.arange(-100, 101) / 100.0
_WIDE = np.arange(-150, 151) / 100.0


def _burgers(bp):
    return ScalarFn1D.sample(lambda w: 0.5 * w * w, bp)


def _linear(bp):
    return ScalarFn1D.sample(lambda w: w, bp)


def degenerate_diffusion(bp=_UNIT, threshold: float = 0.25):
    """A(w) = max(0, w - threshold)^2."""
    return ScalarFn1D.sample(lambda w: np.maximum(0.0, w - threshold) ** 2, bp)


class PiecewiseConstant:
    """base + sum_j h_j 1{x > x_j}, with exact cell averages."""

    def __init__(self, base: float, jumps):
        self.base = float(base)
        self.jumps = [(float(x), float(h)) for x, h in jumps]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.base)
        for xj, hj in self.jumps:
            out = out + hj * (x > xj)
        return out

    def average(self, lo, hi):
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        out = np.full(lo.shape, self.base)
        for xj, hj in self.jumps:
            out = out + hj * np.clip((hi - xj) / (hi - lo), 0.0, 1.0)
        return out


def riemann(left: float, right: float, x0: float = 0.0) -> PiecewiseConstant:
    return PiecewiseConstant(left, [(x0, right - left)])


def box(height: float, lo: float, hi: float, background: float = 0.0) -> PiecewiseConstant:
    return PiecewiseConstant(background, [(lo, height - background), (hi, background - height)])


def constant_velocity(v0: float):
    return lambda x: np.full(np.shape(x), float(v0))


def sine_velocity(amp: float = 0.3):
    return lambda x: 1.0 + amp * np.sin(np.pi * np.asarray(x))


def advection() -> ProblemSpec:
    return ProblemSpec(f=_linear(_WIDE), a=ScalarFn1D.zero(-1.5, 1.5), velocity=constant_velocity(1.0),
                       w0=box(1.0, -0.5, 0.5), domain=(-1.0, 1.0), horizon=1.0,
                       bc="periodic", name="advection")


def burgers() -> ProblemSpec:
    return ProblemSpec(f=_burgers(_WIDE), a=ScalarFn1D.zero(-1.5, 1.5), velocity=constant_velocity(1.0),
                       w0=box(1.0, -0.5, 0.0), domain=(-1.0, 1.0), horizon=0.5,
                       bc="outflow", name="burgers")


def burgers_degenerate() -> ProblemSpec:
    return ProblemSpec(f=_burgers(_UNIT), a=degenerate_diffusion(), velocity=constant_velocity(1.0),
                       w0=riemann(-0.9, 0.9), domain=(-2.0, 2.0), horizon=0.5,
                       bc="outflow", name="burgers_degenerate")


def heat() -> ProblemSpec:
    return ProblemSpec(f=ScalarFn1D.zero(-1.5, 1.5), a=_linear(_WIDE), velocity=constant_velocity(0.0),
                       w0=box(1.0, -0.25, 0.25), domain=(-2.0, 2.0), horizon=0.05,
                       bc="outflow", name="heat")


def porous_medium() -> ProblemSpec:
    pm = ScalarFn1D.sample(lambda w: w * np.abs(w), _WIDE)
    return ProblemSpec(f=ScalarFn1D.zero(-1.5, 1.5), a=pm, velocity=constant_velocity(0.0),
                       w0=box(1.0, -0.25, 0.25), domain=(-2.0, 2.0), horizon=0.05,
                       bc="outflow", name="porous_medium")


def variable_velocity() -> ProblemSpec:
    return ProblemSpec(f=_burgers(_UNIT), a=degenerate_diffusion(), velocity=sine_velocity(0.3),
                       w0=riemann(-0.9, 0.9), domain=(-2.0, 2.0), horizon=0.5,
                       bc="outflow", name="variable_velocity")


CATALOG: Dict[str, callable] = {
    "advection": advection,
    "burgers": burgers,
    "burgers_degenerate": burgers_degenerate,
    "heat": heat,
    "porous_medium": porous_medium,
    "variable_velocity": variable_velocity,
}


def get_problem(name: str) -> ProblemSpec:
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(CATALOG)}") from None


def _read_columns(path, required):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty table")
    missing = set(required) - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return {c: np.array([float(r[c]) for r in rows]) for c in required}


def load_custom(coeff_csv, field_csv, domain, horizon, bc="outflow") -> ProblemSpec:
    """Problem from a coefficient table (w, f, a) and a field table (x, v, w0).

    V and w0 are linearly interpolated in x.
    """
    coeff = _read_columns(coeff_csv, ("w", "f", "a"))
    fld = _read_columns(field_csv, ("x", "v", "w0"))
    order = np.argsort(fld["x"])
    xs, vs, ws = fld["x"][order], fld["v"][order], fld["w0"][order]
    return ProblemSpec(f=ScalarFn1D(coeff["w"], coeff["f"]), a=ScalarFn1D(coeff["w"], coeff["a"]),
                       velocity=lambda x: np.interp(x, xs, vs), w0=lambda x: np.interp(x, xs, ws),
                       domain=domain, horizon=horizon, bc=bc, name="custom")
