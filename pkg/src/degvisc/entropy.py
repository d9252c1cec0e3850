"""Discrete entropy machinery: approximate sign, mollifiers, test functions,
Kruzkov-type entropy functionals and the viscous remainder.

Test functions are products

    phi(x, t, y, s) = psi(t) * omega_r(x - y) * rho_r0(t - s),
    psi(t) = H_alpha0(t - nu) - H_alpha0(t - tau),

built on the smooth bump exp(1 / (sigma^2 - 1)). Fixing (y, s) gives the
single-variable test functions on Q_T consumed by the functionals.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .mesh import SpaceTimeField, exact_sum
from .problem import FlatRegions, ProblemSpec, flat_regions

# Audit tolerance constant. The heat oracle calibrates to ~0.05 (nx = 100);
# the pinned value adds headroom for shock and degenerate problems whose
# eps = 0 reference is less accurate. Checked in tests/test_entropy.py.
C_AUDIT = 2.0


class KInHError(ValueError):
    """Kruzkov constant k lies in a flat region of A (A(k) in H)."""


def sgn_eta(tau, eta: float):
    """sgn(tau) for |tau| > eta, tau / eta otherwise."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    tau = np.asarray(tau, dtype=float)
    out = np.where(np.abs(tau) > eta, np.sign(tau), tau / eta)
    return float(out) if out.ndim == 0 else out


def _bump(sigma):
    sigma = np.asarray(sigma, dtype=float)
    inside = np.abs(sigma) < 1.0
    s = np.where(inside, sigma, 0.0)
    return np.where(inside, np.exp(1.0 / (s * s - 1.0)), 0.0)


def _bump_slope_factor(sigma):
    sigma = np.asarray(sigma, dtype=float)
    inside = np.abs(sigma) < 1.0
    s = np.where(inside, sigma, 0.0)
    return np.where(inside, -2.0 * s / (s * s - 1.0) ** 2, 0.0)


class MollifierKernel:
    """Normalised bump rho on [-1, 1] with its derivative and running integral.

    rho and rho' are evaluated in closed form up to the normalisation constant,
    which is computed by composite Gauss-Legendre quadrature on the table
    cells. The running integral is tabulated on ``n_table`` cells and
    interpolated by cubic Hermite splines with exact slopes.
    """

    def __init__(self, n_table: int = 2048, gauss_points: int = 10):
        if n_table % 2:
            raise ValueError("n_table must be even so that 0 is a node")
        self.n_table = n_table
        nodes = np.linspace(-1.0, 1.0, n_table + 1)
        gx, gw = np.polynomial.legendre.leggauss(gauss_points)
        half = 1.0 / n_table
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        self._gauss = (mids[:, None] + half * gx[None, :], half * gw)
        cell_mass = _bump(self._gauss[0]) @ self._gauss[1]
        self.norm = math.fsum(cell_mass.tolist())
        cum = np.concatenate([[0.0], np.cumsum(cell_mass)]) / self.norm
        self.nodes = nodes
        self.table = self.rho(nodes)
        self.dtable = self.drho(nodes)
        self._cum = CubicHermiteSpline(nodes, cum, self.table)

    def rho(self, sigma):
        return _bump(sigma) / self.norm

    def drho(self, sigma):
        return _bump(sigma) * _bump_slope_factor(sigma) / self.norm

    def cumulative(self, sigma):
        """integral of rho from -1 to sigma."""
        s = np.clip(np.asarray(sigma, dtype=float), -1.0, 1.0)
        # clamp: the spline can undershoot by ~1e-25 in the flat tails
        return np.where(s >= 1.0, 1.0, np.where(s <= -1.0, 0.0, np.clip(self._cum(s), 0.0, 1.0)))

    def integrate(self, func) -> float:
        """Composite Gauss-Legendre quadrature of func over [-1, 1]."""
        pts, wts = self._gauss
        return math.fsum((np.asarray(func(pts)) @ wts).tolist())

    @property
    def abs_derivative_mass(self) -> float:
        """K = integral of |rho'|."""
        return self.integrate(lambda s: np.abs(self.drho(s)))

    @property
    def first_moment(self) -> float:
        """integral of |sigma| rho(sigma)."""
        return self.integrate(lambda s: np.abs(s) * self.rho(s))

    # scaled kernels: k_h(z) = rho(z / h) / h
    def scaled(self, z, h):
        return self.rho(np.asarray(z) / h) / h

    def scaled_derivative(self, z, h):
        return self.drho(np.asarray(z) / h) / (h * h)


DEFAULT_KERNEL = MollifierKernel()


@dataclass(frozen=True)
class TestFnParams:
    """Parameters of the doubled-variable test function."""

    r: float
    r0: float
    alpha0: float
    nu: float
    tau: float
    horizon: float
    kernel: MollifierKernel = field(default=DEFAULT_KERNEL, repr=False, compare=False)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        problems = admissibility_errors(self.r, self.r0, self.alpha0, self.nu, self.tau, self.horizon)
        if problems:
            raise ValueError("; ".join(problems))

    def psi(self, t):
        k, a = self.kernel, self.alpha0
        t = np.asarray(t, dtype=float)
        return k.cumulative((t - self.nu) / a) - k.cumulative((t - self.tau) / a)

    def dpsi(self, t):
        k, a = self.kernel, self.alpha0
        t = np.asarray(t, dtype=float)
        return k.scaled(t - self.nu, a) - k.scaled(t - self.tau, a)

    def omega(self, z):
        return self.kernel.scaled(z, self.r)

    def domega(self, z):
        return self.kernel.scaled_derivative(z, self.r)

    def rho_t(self, z):
        return self.kernel.scaled(z, self.r0)

    def drho_t(self, z):
        return self.kernel.scaled_derivative(z, self.r0)

    def phi(self, x, t, y, s):
        return self.psi(t) * self.omega(np.asarray(x) - y) * self.rho_t(np.asarray(t) - s)

    def centered(self, y: float, s: float) -> "SliceTestFunction":
        return SliceTestFunction(self, float(y), float(s))


def admissibility_errors(r, r0, alpha0, nu, tau, horizon) -> List[str]:
    """Violated admissibility constraints of the test-function parameters."""
    errs = []
    if not r > 0:
        errs.append("r must be positive")
    if not 0 < nu < tau < horizon:
        errs.append("need 0 < nu < tau < T")
    if not 0 < r0 < min(nu, horizon - tau):
        errs.append("need 0 < r0 < min(nu, T - tau)")
    if not 0 < alpha0 < min(nu - r0, horizon - tau - r0):
        errs.append("need 0 < alpha0 < min(nu - r0, T - tau - r0)")
    return errs


@dataclass(frozen=True)
class SliceTestFunction:
    """phi(., ., y, s) for fixed (y, s): a test function on Q_T."""

    params: TestFnParams
    y: float
    s: float
    scale: float = 1.0

    def value(self, x, t):
        p = self.params
        return self.scale * p.psi(t) * p.omega(x - self.y) * p.rho_t(t - self.s)

    def dt(self, x, t):
        p = self.params
        om = p.omega(x - self.y)
        return self.scale * (p.dpsi(t) * p.rho_t(t - self.s) + p.psi(t) * p.drho_t(t - self.s)) * om

    def dx(self, x, t):
        p = self.params
        return self.scale * p.psi(t) * p.domega(x - self.y) * p.rho_t(t - self.s)

    def w11_norm(self, n: int = 20001) -> float:
        """integral of |phi| + |phi_t| + |phi_x| over Q_T.

        The product structure reduces this to time integrals of psi rho_r0
        and its derivative; those use a fine trapezoid rule on the support.
        """
        p = self.params
        t = np.linspace(*self.support_t, n)
        g = p.psi(t) * p.rho_t(t - self.s)
        dg = p.dpsi(t) * p.rho_t(t - self.s) + p.psi(t) * p.drho_t(t - self.s)
        mass = np.trapezoid(g, t)
        slope_mass = np.trapezoid(np.abs(dg), t)
        k_over_r = p.kernel.abs_derivative_mass / p.r
        return self.scale * (mass * (1.0 + k_over_r) + slope_mass)

    def normalized(self) -> "SliceTestFunction":
        """Positive multiple with unit W^{1,1} norm (inequalities are homogeneous in phi)."""
        return SliceTestFunction(self.params, self.y, self.s, self.scale / self.w11_norm())

    @property
    def support_x(self):
        return (self.y - self.params.r, self.y + self.params.r)

    @property
    def support_t(self):
        p = self.params
        return (max(self.s - p.r0, p.nu - p.alpha0), min(self.s + p.r0, p.tau + p.alpha0))


@dataclass(frozen=True)
class FiniteDifferenceTestFunction:
    """Same values as ``base`` but derivatives by central differences."""

    base: SliceTestFunction
    h: float

    def value(self, x, t):
        return self.base.value(x, t)

    def dt(self, x, t):
        return (self.base.value(x, t + self.h) - self.base.value(x, t - self.h)) / (2 * self.h)

    def dx(self, x, t):
        return (self.base.value(x + self.h, t) - self.base.value(x - self.h, t)) / (2 * self.h)

    @property
    def support_x(self):
        return self.base.support_x

    @property
    def support_t(self):
        return self.base.support_t


def phi_eval(p: TestFnParams, x, t, y, s):
    return p.phi(x, t, y, s)


def phi_identity_residuals(p: TestFnParams, probes, h: float):
    """Max residuals of the two doubled-variable identities at ``probes``.

    ``probes`` is an (n, 4) array of (x, t, y, s). Returns
    (time_residual, space_residual) where the first compares the central
    difference of d/dt + d/ds against
    [rho_a0(t - nu) - rho_a0(t - tau)] omega_r(x - y) rho_r0(t - s) and the
    second compares d/dx + d/dy against zero.
    """
    x, t, y, s = np.asarray(probes, dtype=float).T
    phi = p.phi
    d_t = (phi(x, t + h, y, s) - phi(x, t - h, y, s)) / (2 * h)
    d_s = (phi(x, t, y, s + h) - phi(x, t, y, s - h)) / (2 * h)
    d_x = (phi(x + h, t, y, s) - phi(x - h, t, y, s)) / (2 * h)
    d_y = (phi(x, t, y + h, s) - phi(x, t, y - h, s)) / (2 * h)
    exact = p.dpsi(t) * p.omega(x - y) * p.rho_t(t - s)
    return float(np.max(np.abs(d_t + d_s - exact))), float(np.max(np.abs(d_x + d_y)))


# --------------------------------------------------------------------------
# functionals


def _check_support(phi, w: SpaceTimeField):
    g = w.grid
    xlo, xhi = phi.support_x
    tlo, thi = phi.support_t
    if xlo <= g.xmin or xhi >= g.xmax:
        raise ValueError("test function support leaves the spatial domain interior")
    if tlo <= 0.0 or thi >= w.tgrid.horizon:
        raise ValueError("test function support must lie inside (0, T)")


class _Window:
    """Slices and cells inside a test function's support, with its derivatives."""

    def __init__(self, phi, w: SpaceTimeField):
        _check_support(phi, w)
        x, t = w.grid.centers, w.times
        xlo, xhi = phi.support_x
        tlo, thi = phi.support_t
        self.ix = np.nonzero((x > xlo) & (x < xhi))[0]
        self.jt = np.nonzero((t > tlo) & (t < thi))[0]
        X, T = x[self.ix][None, :], t[self.jt][:, None]
        self.x, self.t = X, T
        self.value = phi.value(X, T)
        self.dt = phi.dt(X, T)
        self.dx = phi.dx(X, T)
        self.weights = w.grid.dx * w.tgrid.weights[self.jt][:, None]

    def take(self, arr):
        return arr[np.ix_(self.jt, self.ix)]

    def integrate(self, vals):
        return exact_sum(vals * self.weights)


class FieldContext:
    """Per-field quantities shared by all (k, phi) evaluations."""

    def __init__(self, w: SpaceTimeField, spec: ProblemSpec, grad_a=None):
        self.w = w
        self.spec = spec
        vel = spec.velocity_field(w.grid)
        self.v = vel.center_values[None, :]
        self.div_v = vel.div_values[None, :]
        self.fw = spec.f(w.values)
        self.aw = spec.a(w.values)
        dx = w.grid.dx
        self.grad_a = grad_a if grad_a is not None else np.gradient(self.aw, dx, axis=1)
        self.grad_w = np.gradient(w.values, dx, axis=1)


def _context(w, spec, ctx):
    return ctx if ctx is not None else FieldContext(w, spec)


def e_hyp(w: SpaceTimeField, k: float, phi, spec: ProblemSpec, grad_a=None,
          ctx: Optional[FieldContext] = None) -> float:
    """Hyperbolic Kruzkov entropy functional.

    Quadrature over Q_T of |w - k| phi_t + sgn(w - k)[V (f(w) - f(k)) - A(w)_x] phi_x
    - sgn(w - k) V' f(k) phi, with A(w)_x by centred differences.
    """
    ctx = ctx if ctx is not None else FieldContext(w, spec, grad_a)
    win = _Window(phi, w)
    return _e_hyp(ctx, win, k)


def _e_hyp(ctx: FieldContext, win: _Window, k: float) -> float:
    wv = win.take(ctx.w.values)
    sg = np.sign(wv - k)
    fk = float(ctx.spec.f(k))
    v = ctx.v[:, win.ix]
    dv = ctx.div_v[:, win.ix]
    integrand = (np.abs(wv - k) * win.dt
                 + sg * (v * (win.take(ctx.fw) - fk) - win.take(ctx.grad_a)) * win.dx
                 - sg * dv * fk * win.value)
    return win.integrate(integrand)


def _dissipation(ctx: FieldContext, phi, win: _Window, k: float, eta: float) -> float:
    """Quadrature of |A(w)_x|^2 sgn_eta'(A(w) - A(k)) phi.

    A(w) is reconstructed linearly between neighbouring cell centres, which
    makes the x-integral over each segment exact up to evaluating phi at the
    centre of the active sub-segment.
    """
    ak = float(ctx.spec.a(k))
    g = ctx.w.grid
    i0, i1 = max(win.ix[0] - 1, 0), min(win.ix[-1] + 1, g.nx - 1)
    cols = np.arange(i0, i1 + 1)
    a = ctx.aw[np.ix_(win.jt, cols)]
    al, ar = a[:, :-1], a[:, 1:]
    slope = (ar - al) / g.dx
    lo, hi = np.minimum(al, ar), np.maximum(al, ar)
    p = np.maximum(lo, ak - eta)
    q = np.minimum(hi, ak + eta)
    active = (q > p) & (slope != 0.0)
    safe = np.where(active, slope, 1.0)
    xl = g.centers[cols[:-1]][None, :]
    xm = xl + (0.5 * (p + q) - al) / safe
    t = ctx.w.times[win.jt][:, None]
    contrib = np.where(active, np.abs(slope) * (q - p) / eta, 0.0)
    vals = np.where(active, contrib * phi.value(xm, t), 0.0)
    return exact_sum(vals * ctx.w.tgrid.weights[win.jt][:, None])


def default_eta0(spec: ProblemSpec, dx: float) -> float:
    """An eighth of the largest A-increment across one cell at unit gradient."""
    return max(spec.a.lipschitz, 1e-12) * dx / 8.0


def e_par(w: SpaceTimeField, k: float, phi, spec: ProblemSpec, eta0: Optional[float] = None,
          regions: Optional[FlatRegions] = None, ctx: Optional[FieldContext] = None,
          _hyp: Optional[float] = None) -> float:
    """Parabolic entropy functional with the eta -> 0 limit extrapolated.

    The dissipation term is evaluated at eta0, eta0/2, eta0/4 and a
    least-squares line in eta is extrapolated to eta = 0.
    """
    regions = regions if regions is not None else flat_regions(spec.a)
    if bool(regions.contains(k)):
        raise KInHError(f"k ∈ H: k={k!r} lies in a flat region of A")
    ctx = _context(w, spec, ctx)
    win = _Window(phi, w)
    eta0 = eta0 if eta0 is not None else default_eta0(spec, w.grid.dx)
    hyp = _hyp if _hyp is not None else _e_hyp(ctx, win, k)
    etas = np.array([eta0, eta0 / 2, eta0 / 4])
    diss = np.array([_dissipation(ctx, phi, win, k, eta) for eta in etas])
    _, limit = np.polyfit(etas, diss, 1)
    return hyp - float(limit)


def r_visc(w_eps: SpaceTimeField, phi, eps: float, ctx: Optional[FieldContext] = None) -> float:
    """eps * quadrature of |w_x phi_x| (w_x by centred differences)."""
    if eps == 0.0:
        return 0.0
    win = _Window(phi, w_eps)
    grad = ctx.grad_w if ctx is not None else np.gradient(w_eps.values, w_eps.grid.dx, axis=1)
    return eps * win.integrate(np.abs(win.take(grad) * win.dx))


def weak_residual(w: SpaceTimeField, phi, spec: ProblemSpec, eps: float = 0.0) -> float:
    """Quadrature of w phi_t + [V f(w) - A^eps(w)_x] phi_x."""
    win = _Window(phi, w)
    vel = spec.velocity_field(w.grid)
    v = vel.center_values[None, win.ix]
    ae = spec.diffusion(eps)(w.values)
    grad = win.take(np.gradient(ae, w.grid.dx, axis=1))
    wv = win.take(w.values)
    return win.integrate(wv * win.dt + (v * spec.f(wv) - grad) * win.dx)


# --------------------------------------------------------------------------
# audits


def audit_tolerance(dx: float, r: float, eta0: float, c_audit: float = C_AUDIT) -> float:
    return c_audit * (dx + r * dx + eta0)


def default_k_values(w0, regions: FlatRegions, count: int = 20) -> np.ndarray:
    """Equispaced constants spanning the data range widened by 5% per side.

    Values falling exactly on a flat-region endpoint move 1e-9 * range into
    the region.
    """
    if count < 1:
        raise ValueError("need at least one k value")
    w0 = np.asarray(w0, dtype=float)
    lo, hi = float(w0.min()), float(w0.max())
    span = hi - lo if hi > lo else 1.0
    ks = np.linspace(lo - 0.05 * span, hi + 0.05 * span, count)
    for a, b in regions.intervals:
        ks = np.where(ks == a, a + 1e-9 * span, ks)
        ks = np.where(ks == b, b - 1e-9 * span, ks)
    return ks


def default_test_functions(spec: ProblemSpec, count: int = 5,
                           kernel: MollifierKernel = DEFAULT_KERNEL) -> List[SliceTestFunction]:
    """``count`` unit-norm test functions tiling the domain, time centres staggered.

    Radius r = L / (2 (count + 1)) with centres y_j = xmin + L (j + 1) / (count + 1);
    time mollifier r0 = T/10 and window smoothing alpha0 = T/20 on [0.2 T, 0.8 T],
    time centres spread over [0.25 T, 0.75 T].
    """
    if count < 1:
        raise ValueError("need at least one test function")
    xmin, xmax = spec.domain
    L, T = xmax - xmin, spec.horizon
    params = TestFnParams(r=L / (2 * (count + 1)), r0=T / 10, alpha0=T / 20,
                          nu=0.2 * T, tau=0.8 * T, horizon=T, kernel=kernel)
    out = []
    for j in range(count):
        y = xmin + L * (j + 1) / (count + 1)
        s = T * (0.25 + 0.5 * j / max(count - 1, 1))
        out.append(params.centered(y, s).normalized())
    return out


@dataclass
class EntropyRow:
    k: float
    phi_index: int
    e_hyp: float
    e_par: Optional[float]
    r_visc: float
    tol: float
    verdict_hyp: bool
    verdict_par: Optional[bool]


@dataclass
class EntropyReport:
    rows: List[EntropyRow]
    exact_mode: bool
    eps: float

    @property
    def k_values(self) -> List[float]:
        return sorted({r.k for r in self.rows})

    @property
    def passed(self) -> bool:
        return all(r.verdict_hyp and r.verdict_par is not False for r in self.rows)

    @property
    def failures(self) -> List[EntropyRow]:
        return [r for r in self.rows if not r.verdict_hyp or r.verdict_par is False]

    @property
    def tol(self) -> float:
        return self.rows[0].tol if self.rows else 0.0

    def worst_hyp_margin(self) -> float:
        """min over rows of e_hyp + r_visc (negative means a violation before tol)."""
        return min(r.e_hyp + r.r_visc for r in self.rows)

    def worst_par_deviation(self) -> float:
        vals = [abs(r.e_par) if self.exact_mode else -(r.e_par + r.r_visc)
                for r in self.rows if r.e_par is not None]
        return max(vals) if vals else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["k", "e_hyp", "e_par", "r_visc", "tol", "verdict_hyp", "verdict_par"])
            for r in self.rows:
                out.writerow([f"{r.k:.17g}", f"{r.e_hyp:.17g}",
                              "" if r.e_par is None else f"{r.e_par:.17g}",
                              f"{r.r_visc:.17g}", f"{r.tol:.17g}",
                              "pass" if r.verdict_hyp else "fail",
                              "" if r.verdict_par is None else ("pass" if r.verdict_par else "fail")])


def audit_approximate_entropy(w_eps: SpaceTimeField, spec: ProblemSpec, ks: Sequence[float],
                              phis: Sequence, eps: float, tol: Optional[float] = None,
                              eta0: Optional[float] = None,
                              regions: Optional[FlatRegions] = None) -> EntropyReport:
    """Check E_hyp >= -R_visc - tol and E_par >= -R_visc - tol for all (k, phi).

    With eps == 0 the field is treated as an exact entropy solution and the
    parabolic verdict becomes |E_par| <= tol. E_par is skipped for k in H.
    """
    if len(ks) == 0:
        raise ValueError("empty k list")
    regions = regions if regions is not None else flat_regions(spec.a)
    dx = w_eps.grid.dx
    eta0 = eta0 if eta0 is not None else default_eta0(spec, dx)
    if tol is None:
        r = max(phi.params.r for phi in phis)
        tol = audit_tolerance(dx, r, eta0)
    exact = eps == 0.0
    ctx = FieldContext(w_eps, spec)
    rows = []
    for j, phi in enumerate(phis):
        win = _Window(phi, w_eps)
        rv = r_visc(w_eps, phi, eps, ctx)
        for k in ks:
            k = float(k)
            hyp = _e_hyp(ctx, win, k)
            par = None
            if not bool(regions.contains(k)):
                par = e_par(w_eps, k, phi, spec, eta0=eta0, regions=regions, ctx=ctx, _hyp=hyp)
            v_hyp = hyp >= -rv - tol
            if par is None:
                v_par = None
            elif exact:
                v_par = abs(par) <= tol
            else:
                v_par = par >= -rv - tol
            rows.append(EntropyRow(k, j, hyp, par, rv, tol, bool(v_hyp),
                                   None if v_par is None else bool(v_par)))
    return EntropyReport(rows, exact, eps)


def audit_deviation(w: SpaceTimeField, spec: ProblemSpec, ks: Sequence[float], phis: Sequence,
                    eta0: Optional[float] = None) -> float:
    """Largest violation of the exact-solution audit in units of tol with c_audit = 1.

    max over (k, phi) of -E_hyp and |E_par| divided by dx + r dx + eta0.
    """
    eta0 = eta0 if eta0 is not None else default_eta0(spec, w.grid.dx)
    unit = audit_tolerance(w.grid.dx, max(p.params.r for p in phis), eta0, 1.0)
    rep = audit_approximate_entropy(w, spec, ks, phis, 0.0, tol=unit, eta0=eta0)
    devs = [-r.e_hyp for r in rep.rows] + [abs(r.e_par) for r in rep.rows if r.e_par is not None]
    return max(devs) / unit


def calibrate_audit_constant(exact_fields, safety: float = 1.0) -> float:
    """safety * max audit_deviation over (field, spec, ks, phis) tuples of exact solutions."""
    return safety * max(audit_deviation(w, spec, ks, phis) for w, spec, ks, phis in exact_fields)
