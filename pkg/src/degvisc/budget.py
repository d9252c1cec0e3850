"""Constant chain of the sqrt(eps) error estimate and its numerical checks.

Constants (all measured from gridded fields):

    c1 = sup_t |w(t)|_BV                 reference solution
    K  = integral |rho'|                 mollifier kernel
    c2 = K sup_t |w_eps(t)|_BV
    c3 = Lip(V) Lip(f) sup_t |w_eps(t)|_BV
    c4 = |f(w_eps)|_inf |V'|_BV
    c5 = max(c3, c4), c6 = max(c1, c2, c5)
    bound(r) = c6 ((1 + T) r + T eps / r),   r = sqrt(T eps)
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .entropy import DEFAULT_KERNEL, MollifierKernel, TestFnParams
from .mesh import SpaceTimeField, exact_sum, quad_qtqt
from .metrics import bv_seminorm, restrict_field, sup_bv
from .problem import ProblemSpec

# 4D quadrature cost guard
MAX_NX_4D = 128
MAX_SLICES_4D = 64


def budget_value(c6: float, r: float, horizon: float, eps: float) -> float:
    return c6 * ((1.0 + horizon) * r + horizon * eps / r)


def budget_argmin(horizon: float, eps: float) -> float:
    """Exact minimiser sqrt(T eps / (1 + T)) of ``budget_value`` over r > 0."""
    return math.sqrt(horizon * eps / (1.0 + horizon))


@dataclass(frozen=True)
class ErrorBudget:
    eps: float
    horizon: float
    c1: float
    bigK: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    r_choice: float
    r_star: float
    bound: float
    c7: float

    def ledger_rows(self):
        return [
            ("c1", self.c1, "sup_t BV(w)", "BV bound of the reference solution"),
            ("K", self.bigK, "int |rho'|", "derivative mass of the mollifier kernel"),
            ("c2", self.c2, "K sup_t BV(w_eps)", "viscous remainder constant"),
            ("c3", self.c3, "Lip(V) Lip(f) sup_t BV(w_eps)", "velocity-variation convection constant"),
            ("c4", self.c4, "|f(w_eps)|_inf BV(V')", "divergence-variation convection constant"),
            ("c5", self.c5, "max(c3, c4)", "convection remainder constant"),
            ("c6", self.c6, "max(c1, c2, c5)", "combined constant"),
            ("r", self.r_choice, "sqrt(T eps)", "mollifier radius used in the bound"),
            ("r_star", self.r_star, "sqrt(T eps / (1 + T))", "exact minimiser of the bound in r"),
            ("bound", self.bound, "c6 ((1 + T) r + T eps / r)", "assembled L1 error bound"),
            ("c7", self.c7, "bound / sqrt(T eps)", "constant of the sqrt(T eps) law"),
        ]

    def to_dict(self):
        return asdict(self)


def measure_constants(w_ref: SpaceTimeField, w_eps: SpaceTimeField, spec: ProblemSpec,
                      eps: float, kernel: MollifierKernel = DEFAULT_KERNEL) -> ErrorBudget:
    periodic = spec.periodic
    bv_ref = sup_bv(w_ref, periodic)
    bv_eps = sup_bv(w_eps, periodic)
    vel = spec.velocity_field(w_eps.grid)
    big_k = kernel.abs_derivative_mass
    c2 = big_k * bv_eps
    c3 = vel.lip_v * spec.f.lipschitz * bv_eps
    c4 = float(np.max(np.abs(spec.f(w_eps.values)))) * vel.bv_div
    c5 = max(c3, c4)
    c6 = max(bv_ref, c2, c5)
    T = spec.horizon
    r = math.sqrt(T * eps)
    if r > 0:
        bound = budget_value(c6, r, T, eps)
        c7 = bound / r
    else:
        bound, c7 = 0.0, 0.0
    return ErrorBudget(eps=eps, horizon=T, c1=bv_ref, bigK=big_k, c2=c2, c3=c3, c4=c4, c5=c5,
                       c6=c6, r_choice=r, r_star=budget_argmin(T, eps), bound=bound, c7=c7)


def write_budget_ledger(path, budget: ErrorBudget) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["name", "value", "formula", "meaning"])
        for name, value, formula, meaning in budget.ledger_rows():
            out.writerow([name, f"{value:.17g}", formula, meaning])


def time_integral(values, times, a: float, b: float) -> float:
    """Trapezoid integral over [a, b] of slice values, linear between slices."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    inner = times[(times > a) & (times < b)]
    pts = np.concatenate([[a], inner, [b]])
    vals = np.interp(pts, times, values)
    return exact_sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(pts))


def measured_rvisc_bar(w_eps: SpaceTimeField, eps: float, r: float, nu: float, tau: float,
                       periodic: bool = False, kernel: MollifierKernel = DEFAULT_KERNEL) -> float:
    """eps (K / r) integral_nu^tau |w_eps(t)|_BV dt, the alpha0 -> 0 form.

    The y-integral of |omega_r'| is taken exactly (K / r): y is a continuum
    variable, and a grid sum would misstate it once dx is comparable to r.
    """
    if eps == 0.0:
        return 0.0
    tv = [bv_seminorm(row, periodic) for row in w_eps.values]
    return eps * kernel.abs_derivative_mass / r * time_integral(tv, w_eps.times, nu, tau)


@dataclass(frozen=True)
class RviscCheck:
    measured: float
    bound: float
    passed: bool

    @property
    def ratio(self) -> float:
        return self.measured / self.bound if self.bound > 0 else 0.0


def check_rvisc_bound(w_eps: SpaceTimeField, r: float, nu: float, tau: float, eps: float,
                      budget: ErrorBudget, periodic: bool = False, tol: float = 0.05,
                      kernel: MollifierKernel = DEFAULT_KERNEL) -> RviscCheck:
    """measured R_visc_bar <= (1 + tol) eps T K / r sup_t BV(w_eps)."""
    if not 0.0 <= nu < tau <= budget.horizon:
        raise ValueError("need 0 <= nu < tau <= T")
    measured = measured_rvisc_bar(w_eps, eps, r, nu, tau, periodic, kernel)
    bound = eps * budget.horizon * budget.bigK / r * sup_bv(w_eps, periodic) if eps > 0 else 0.0
    return RviscCheck(measured, bound, measured <= (1.0 + tol) * bound)


@dataclass(frozen=True)
class ApproxInequality:
    lhs: float
    l1_nu: float
    c1_r: float
    rvisc_bar: float
    c5_t_r: float
    allowance: float
    tol: float

    @property
    def rhs(self) -> float:
        return self.l1_nu + self.c1_r + self.rvisc_bar + self.c5_t_r

    @property
    def needed_allowance(self) -> float:
        """Smallest allowance that would make the verdict pass."""
        return max(0.0, self.lhs - self.rhs * (1.0 + self.tol))

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + self.tol) + self.allowance

    def ledger_rows(self):
        return [("lhs", self.lhs), ("l1_at_nu", self.l1_nu), ("c1_r", self.c1_r),
                ("rvisc_bar", self.rvisc_bar), ("c5_T_r", self.c5_t_r), ("rhs", self.rhs),
                ("allowance", self.allowance), ("needed_allowance", self.needed_allowance),
                ("verdict", float(self.passed))]


def _slice_l1(u: np.ndarray, v: np.ndarray, dx: float) -> float:
    return exact_sum(np.abs(u - v) * dx)


def approximation_inequality_check(w_ref: SpaceTimeField, w_eps: SpaceTimeField, spec: ProblemSpec,
                                   r: float, nu: float, tau: float, budget: ErrorBudget, eps: float,
                                   tol: float = 0.05, c_disc: Optional[float] = None,
                                   kernel: MollifierKernel = DEFAULT_KERNEL) -> ApproxInequality:
    """LHS = |w_eps - w|_L1 at tau against the RHS built from the time nu.

    The reference is restricted onto the viscous grid. The discretisation
    allowance is c_disc dx with c_disc = BV(w0) by default.
    """
    if not 0.0 <= nu < tau <= spec.horizon:
        raise ValueError("need 0 <= nu < tau <= T")
    ref = restrict_field(w_ref, w_eps.grid) if w_ref.grid.nx != w_eps.grid.nx else w_ref
    dx = w_eps.grid.dx
    if c_disc is None:
        c_disc = bv_seminorm(spec.initial_values(w_eps.grid), spec.periodic)
    lhs = _slice_l1(w_eps.at_time(tau), ref.at_time(tau), dx)
    l1_nu = _slice_l1(w_eps.at_time(nu), ref.at_time(nu), dx)
    rv = measured_rvisc_bar(w_eps, eps, r, nu, tau, spec.periodic, kernel)
    return ApproxInequality(lhs=lhs, l1_nu=l1_nu, c1_r=budget.c1 * r, rvisc_bar=rv,
                            c5_t_r=budget.c5 * spec.horizon * r, allowance=c_disc * dx, tol=tol)


# --------------------------------------------------------------------------
# doubled-variable terms


@dataclass(frozen=True)
class KuznetsovTerms:
    r_eps_w: float
    r_w_x: float
    r_w_t: float


def _kuznetsov_integrands(w_ref: SpaceTimeField, w_eps: SpaceTimeField, p: TestFnParams):
    x, t = w_eps.grid.centers, w_eps.times
    u, v = w_eps.values, w_ref.values

    def weight(i, j, k, l):
        window = p.kernel.scaled(t[j] - p.nu, p.alpha0) - p.kernel.scaled(t[j] - p.tau, p.alpha0)
        return -window * p.omega(x[i] - x[k]) * p.rho_t(t[j] - t[l])

    def r_eps_w(i, j, k, l):
        return np.abs(u[j, i] - v[j, i]) * weight(i, j, k, l)

    def r_w_x(i, j, k, l):
        return np.abs(v[j, i] - v[j, k]) * weight(i, j, k, l)

    def r_w_t(i, j, k, l):
        return np.abs(v[j, k] - v[l, k]) * weight(i, j, k, l)

    return r_eps_w, r_w_x, r_w_t


def kuznetsov_terms_4d(w_ref: SpaceTimeField, w_eps: SpaceTimeField, p: TestFnParams,
                       windowed: bool = True) -> KuznetsovTerms:
    """4D quadratures of R_{w_eps,w}, R_{w,x}, R_{w,t} (desk scale only).

    The reference is restricted onto the viscous grid; both fields must share
    slice times. ``windowed=False`` visits every index quadruple.
    """
    if w_eps.grid.nx > MAX_NX_4D or w_eps.tgrid.nt > MAX_SLICES_4D:
        raise ValueError(f"4D quadrature limited to nx <= {MAX_NX_4D} and "
                         f"<= {MAX_SLICES_4D} stored intervals")
    if w_ref.grid.nx != w_eps.grid.nx:
        w_ref = restrict_field(w_ref, w_eps.grid)
    if w_ref.tgrid.nt != w_eps.tgrid.nt:
        raise ValueError("fields must share slice times")
    support = (p.r, p.r0) if windowed else None
    vals = [quad_qtqt(fn, w_eps.grid, w_eps.tgrid, support=support, indexed=True)
            for fn in _kuznetsov_integrands(w_ref, w_eps, p)]
    return KuznetsovTerms(*vals)


def kuznetsov_limits(w_ref: SpaceTimeField, w_eps: SpaceTimeField, p: TestFnParams):
    """alpha0 -> 0 limits: (L1 gap at tau - L1 gap at nu, BV-type bound c1 r)."""
    if w_ref.grid.nx != w_eps.grid.nx:
        w_ref = restrict_field(w_ref, w_eps.grid)
    dx = w_eps.grid.dx
    gap = (_slice_l1(w_eps.at_time(p.tau), w_ref.at_time(p.tau), dx)
           - _slice_l1(w_eps.at_time(p.nu), w_ref.at_time(p.nu), dx))
    return gap, sup_bv(w_ref) * p.r
