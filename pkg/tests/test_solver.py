import numpy as np
import pytest

from degvisc.catalog import burgers, get_problem, riemann
from degvisc.mesh import Field, Grid1D
from degvisc.metrics import bv_seminorm
from degvisc.problem import ProblemSpec, ScalarFn1D
from degvisc.solver import (NumericalError, SchemeConfig, _Stepper, eo_flux, plan_steps,
                            solve, stable_dt, step, support_margin_ok)

BP = np.linspace(-1, 1, 201)
BURGERS_F = ScalarFn1D.sample(lambda w: 0.5 * w * w, BP)


def spec_with(f=BURGERS_F, a=None, v=1.0, w0=None, domain=(-1.0, 1.0), T=0.5, bc="outflow"):
    return ProblemSpec(f=f, a=a if a is not None else ScalarFn1D.zero(-1, 1),
                       velocity=(v if callable(v) else (lambda x: np.full(np.shape(x), float(v)))),
                       w0=w0 if w0 is not None else riemann(1.0, -1.0), domain=domain, horizon=T, bc=bc)


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(cfl_safety=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(eps=-1e-3)
    with pytest.raises(ValueError):
        SchemeConfig(bc="dirichlet")


def test_eo_flux_examples():
    assert eo_flux(BURGERS_F, 0.7, 0.7) == pytest.approx(0.245, abs=1e-15)
    assert eo_flux(BURGERS_F, 0.0, 0.0) == 0.0
    assert eo_flux(BURGERS_F, 1.0, -1.0) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        eo_flux(BURGERS_F, 1.5, 0.0)


def test_eo_flux_consistent_for_nonconvex(rng):
    f = ScalarFn1D.sample(lambda w: w ** 3 - w, BP)
    a = rng.uniform(-1, 1, 200)
    assert np.allclose(eo_flux(f, a, a), f(a), atol=1e-14)


def test_stable_dt_examples():
    lin = ScalarFn1D.sample(lambda w: w, BP)
    adv = spec_with(f=lin, bc="periodic")
    g = Grid1D(-1.0, 1.0, 200)
    assert stable_dt(adv, g, SchemeConfig()) == pytest.approx(0.0045, rel=1e-12)
    heat = spec_with(f=ScalarFn1D.zero(-1, 1), a=lin, v=0.0)
    assert stable_dt(heat, g, SchemeConfig()) == pytest.approx(2.25e-5, rel=1e-12)
    deg = ScalarFn1D.sample(lambda w: np.maximum(0, w - 0.25) ** 2, BP)
    spec = spec_with(a=deg)
    eps = 1 / 64
    conv = g.dx / (1.0 * BURGERS_F.lipschitz)
    diff = g.dx ** 2 / (2 * (deg.lipschitz + eps))
    assert stable_dt(spec, g, SchemeConfig(eps=eps)) == pytest.approx(0.45 * min(conv, diff), rel=1e-12)
    idle = spec_with(f=ScalarFn1D.zero(-1, 1), v=0.0)
    assert stable_dt(idle, g, SchemeConfig()) == idle.horizon


def test_constant_state_is_fixed_point():
    spec = spec_with(v=0.7, bc="periodic", a=ScalarFn1D.sample(lambda w: w * np.abs(w), BP))
    g = Grid1D(-1.0, 1.0, 50)
    w = Field(g, np.full(50, 0.3))
    out = step(w, spec, SchemeConfig(eps=0.01), 0.5 * stable_dt(spec, g, SchemeConfig(eps=0.01)))
    assert np.array_equal(out.values, w.values)


def test_unit_cfl_shifts_by_one_cell():
    lin = ScalarFn1D.sample(lambda w: w, BP)
    spec = spec_with(f=lin, bc="periodic")
    g = Grid1D(-1.0, 1.0, 40)
    cfg = SchemeConfig(cfl_safety=1.0)
    dt = stable_dt(spec, g, cfg)
    assert dt == pytest.approx(g.dx, rel=1e-15)
    w0 = np.where(np.arange(40) < 13, 1.0, 0.0)
    out = step(Field(g, w0), spec, cfg, dt)
    assert np.allclose(out.values, np.roll(w0, 1), atol=1e-15)


def test_heat_spike_spreads_with_three_point_weights():
    lin = ScalarFn1D.sample(lambda w: w, BP)
    spec = spec_with(f=ScalarFn1D.zero(-1, 1), a=lin, v=0.0)
    g = Grid1D(-1.0, 1.0, 20)
    dt = 0.3 * g.dx ** 2
    lam = dt / g.dx ** 2
    w0 = np.zeros(20)
    w0[10] = 1.0
    out = step(Field(g, w0), spec, SchemeConfig(), dt).values
    assert out[9] == pytest.approx(lam) and out[11] == pytest.approx(lam)
    assert out[10] == pytest.approx(1 - 2 * lam)
    assert np.count_nonzero(out) == 3


def test_instability_reports_step_index():
    spec = spec_with()
    g = Grid1D(-1.0, 1.0, 20)
    w = Field(g, np.full(20, 0.5))
    with pytest.raises(NumericalError, match="step 7"), np.errstate(invalid="ignore"):
        step(w, spec, SchemeConfig(), np.inf, step_index=7)


def test_plan_steps():
    n_store, stride, dt = plan_steps(1.0, 0.001)
    assert n_store == 512 and stride == 2 and dt <= 0.001
    assert abs(n_store * stride * dt - 1.0) < 1e-12
    n_store, stride, dt = plan_steps(1.0, 0.1)
    assert (n_store, stride) == (10, 1)
    n_store, stride, dt = plan_steps(1.0, 0.1, n_store=512)
    assert stride == 1 and dt == 1.0 / 512


def _stepper_run(spec, g, cfg, w, n):
    stepper = _Stepper(spec, g, cfg)
    dt = stable_dt(spec, g, cfg)
    history = [w]
    for _ in range(n):
        w = stepper(w, dt)
        history.append(w)
    return history


def test_periodic_mass_conservation():
    spec = get_problem("advection")
    for s in (spec, ProblemSpec(f=burgers().f, a=get_problem("porous_medium").a,
                                velocity=spec.velocity, w0=spec.w0, domain=spec.domain,
                                horizon=spec.horizon, bc="periodic")):
        field = solve(s, s.grid(200), SchemeConfig(eps=0.01))
        mass = field.values.sum(axis=1)
        scale = np.abs(field.values[0]).sum()
        assert np.max(np.abs(mass - mass[0])) <= 1e-12 * scale


@pytest.mark.parametrize("name", ["burgers", "burgers_degenerate", "heat", "porous_medium"])
def test_max_principle_and_tv_per_step(name):
    spec = get_problem(name)
    g = spec.grid(100)
    cfg = SchemeConfig(eps=1 / 64)
    hist = _stepper_run(spec, g, cfg, spec.initial_values(g), 400)
    lo, hi = hist[0].min(), hist[0].max()
    for prev, cur in zip(hist, hist[1:]):
        assert cur.min() >= lo and cur.max() <= hi
        assert bv_seminorm(cur) <= bv_seminorm(prev)


def test_monotonicity_on_ordered_pairs(rng):
    spec = get_problem("burgers_degenerate")
    g = spec.grid(60)
    cfg = SchemeConfig(eps=1 / 128)
    stepper = _Stepper(spec, g, cfg)
    dt = stable_dt(spec, g, cfg)
    for _ in range(50):
        u = rng.uniform(-0.9, 0.8, 60)
        v = np.minimum(u + rng.uniform(0, 0.2, 60), 0.95)
        for _ in range(20):
            u, v = stepper(u, dt), stepper(v, dt)
            assert np.all(u <= v)


def test_growth_bound_with_divergent_velocity():
    spec = get_problem("variable_velocity")
    g = spec.grid(200)
    field = solve(spec, g, SchemeConfig())
    vel = spec.velocity_field(g)
    w0 = field.values[0]
    rng_w = w0.max() - w0.min()
    n_steps = plan_steps(spec.horizon, stable_dt(spec, g, SchemeConfig()))
    total_steps = n_steps[0] * n_steps[1]
    allowance = total_steps * n_steps[2] * vel.div_sup * spec.f.lipschitz * rng_w
    assert np.all(np.isfinite(field.values))
    assert field.values.min() >= w0.min() - allowance
    assert field.values.max() <= w0.max() + allowance


def test_stationary_shock_stays_put():
    spec = spec_with(w0=riemann(1.0, -1.0), T=0.5)
    g = Grid1D(-1.0, 1.0, 200)
    field = solve(spec, g, SchemeConfig())
    for row in field.values:
        flips = np.nonzero(np.sign(row[1:]) != np.sign(row[:-1]))[0]
        assert flips.size >= 1
        assert np.all(np.abs(g.interfaces[flips + 1]) <= g.dx)


def test_support_margin_guard():
    spec = get_problem("porous_medium")
    assert support_margin_ok(solve(spec, spec.grid(100), SchemeConfig()))
    spec = get_problem("burgers")
    assert not support_margin_ok(solve(spec, spec.grid(100), SchemeConfig(eps=1 / 16)))
