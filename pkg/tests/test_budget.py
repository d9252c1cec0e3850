import csv
import math

import numpy as np
import pytest

from degvisc.budget import (ErrorBudget, approximation_inequality_check, budget_argmin, budget_value,
                            check_rvisc_bound, kuznetsov_limits, kuznetsov_terms_4d,
                            measure_constants, write_budget_ledger)
from degvisc.catalog import get_problem
from degvisc.entropy import DEFAULT_KERNEL, TestFnParams
from degvisc.mesh import SpaceTimeField, TimeGrid
from degvisc.metrics import restrict_field
from degvisc.solver import SchemeConfig, solve

EPS = 1 / 64


def zero_field(spec, nx, nt=16):
    return SpaceTimeField(spec.grid(nx), TimeGrid(spec.horizon, nt), np.zeros((nt + 1, nx)))


def smooth_field(spec, nx, nt, phase=0.0):
    g, tg = spec.grid(nx), TimeGrid(spec.horizon, nt)
    X, T = np.meshgrid(g.centers, tg.times, indexing="xy")
    return SpaceTimeField(g, tg, np.sin(2 * X + phase) * np.exp(-T) + 0.3 * np.cos(5 * T + X))


def params(T=0.5, r=None, r0=0.04, alpha0=0.01):
    return TestFnParams(r=r or math.sqrt(T * EPS), r0=r0, alpha0=alpha0, nu=0.2 * T, tau=0.8 * T,
                        horizon=T)


@pytest.fixture(scope="module")
def small_pair():
    spec = get_problem("burgers_degenerate")
    ref = solve(spec, spec.grid(128), SchemeConfig(), n_store=64)
    w = solve(spec, spec.grid(64), SchemeConfig(eps=EPS), n_store=64)
    return spec, ref, w


def test_constants_trivial_cases():
    spec = get_problem("burgers_degenerate")
    z = zero_field(spec, 32)
    b = measure_constants(z, z, spec, EPS)
    assert (b.c1, b.c2, b.c3, b.c4, b.bound) == (0.0, 0.0, 0.0, 0.0, 0.0)
    g = spec.grid(32)
    step = SpaceTimeField(g, z.tgrid, np.tile(np.where(g.centers < 0, 0.0, 1.0), (17, 1)))
    assert measure_constants(step, z, spec, EPS).c1 == 1.0


def test_constants_on_sweep_member(sweep_cache):
    spec = get_problem("variable_velocity")
    w = sweep_cache("variable_velocity", 100, EPS)
    ref = restrict_field(sweep_cache("variable_velocity", 400, 0.0), w.grid)
    b = measure_constants(ref, w, spec, EPS)
    for c in (b.c1, b.bigK, b.c2, b.c3, b.c4):
        assert c > 0
    assert b.c5 == max(b.c3, b.c4) and b.c6 == max(b.c1, b.c2, b.c5)
    r, T = b.r_choice, spec.horizon
    assert r == math.sqrt(T * EPS)
    assert b.bound == b.c6 * ((1 + T) * r + T * EPS / r)
    assert b.bigK == pytest.approx(DEFAULT_KERNEL.abs_derivative_mass)


def test_budget_argmin():
    for T, eps in ((0.5, 1 / 16), (1.0, 1 / 512), (2.0, 0.3)):
        rs = budget_argmin(T, eps)
        assert rs == math.sqrt(T * eps / (1 + T))
        for r in (rs / 2, 2 * rs, math.sqrt(T * eps), 1.01 * rs, 0.99 * rs):
            assert budget_value(1.7, rs, T, eps) <= budget_value(1.7, r, T, eps)


def test_ledger_csv(tmp_path, small_pair):
    spec, ref, w = small_pair
    b = measure_constants(restrict_field(ref, w.grid), w, spec, EPS)
    path = tmp_path / "budget.csv"
    write_budget_ledger(path, b)
    rows = list(csv.DictReader(path.open()))
    assert [r["name"] for r in rows][:7] == ["c1", "K", "c2", "c3", "c4", "c5", "c6"]
    assert float(rows[0]["value"]) == b.c1 and all(r["formula"] for r in rows)


def test_rvisc_bound(small_pair, sweep_cache):
    spec, ref, w = small_pair
    T = spec.horizon
    z = zero_field(spec, 64)
    b0 = measure_constants(z, z, spec, 0.0)
    chk = check_rvisc_bound(z, 0.1, 0.05, 0.45, 0.0, b0)
    assert chk.measured == 0.0 and chk.bound == 0.0 and chk.passed
    const = SpaceTimeField(z.grid, z.tgrid, np.full_like(z.values, 0.4))
    assert check_rvisc_bound(const, 0.1, 0.05, 0.45, EPS, b0).measured == 0.0
    w = sweep_cache("burgers_degenerate", 200, EPS)
    b = measure_constants(restrict_field(sweep_cache("burgers_degenerate", 400, 0.0), w.grid), w, spec, EPS)
    chk = check_rvisc_bound(w, math.sqrt(T * EPS), 0.1 * T, 0.9 * T, EPS, b)
    assert chk.passed and 0 < chk.ratio <= 1.05


def test_approximation_inequality(small_pair):
    spec, ref, w = small_pair
    T = spec.horizon
    b = measure_constants(restrict_field(ref, w.grid), w, spec, EPS)
    same = approximation_inequality_check(w, w, spec, 0.1, 0.1 * T, 0.9 * T, b, 0.0)
    assert same.lhs == 0.0 and same.l1_nu == 0.0 and same.passed
    first = approximation_inequality_check(ref, w, spec, 0.1, 0.0, 0.9 * T, b, EPS)
    tv0 = 1.8
    assert first.l1_nu <= w.grid.dx * tv0 + 1e-15
    full = approximation_inequality_check(ref, w, spec, math.sqrt(T * EPS), 0.1 * T, 0.9 * T, b, EPS)
    assert full.passed and full.needed_allowance == 0.0
    assert dict(full.ledger_rows())["rhs"] == full.rhs
    with pytest.raises(ValueError):
        approximation_inequality_check(ref, w, spec, 0.1, 0.4, 0.2, b, EPS)


def test_kuznetsov_trivial_cases(small_pair):
    spec, ref, w = small_pair
    p = params()
    assert kuznetsov_terms_4d(w, w, p).r_eps_w == 0.0
    frozen = SpaceTimeField(w.grid, w.tgrid, np.tile(w.values[0], (w.tgrid.nt + 1, 1)))
    assert kuznetsov_terms_4d(frozen, w, p).r_w_t == 0.0


@pytest.mark.parametrize("nx,nt", [(8, 8), (16, 12), (48, 16)])
def test_kuznetsov_windowed_equals_brute_force(nx, nt):
    spec = get_problem("burgers_degenerate")
    a, b = smooth_field(spec, nx, nt), smooth_field(spec, nx, nt, phase=0.7)
    p = params(r=0.6, r0=0.06, alpha0=0.02)
    assert kuznetsov_terms_4d(a, b, p) == kuznetsov_terms_4d(a, b, p, windowed=False)


def test_kuznetsov_limits(small_pair):
    spec, ref, w = small_pair
    vals = [kuznetsov_terms_4d(ref, w, params(r0=r0)).r_w_t for r0 in (0.04, 0.02, 0.01)]
    for coarse, fine in zip(vals, vals[1:]):
        assert abs(coarse) / abs(fine) >= 1.3
    p = params()
    terms = kuznetsov_terms_4d(ref, w, p)
    gap, c1r = kuznetsov_limits(ref, w, p)
    assert abs(terms.r_w_x) <= 1.05 * c1r
    assert terms.r_eps_w == pytest.approx(gap, abs=0.1 * abs(gap))


def test_kuznetsov_cost_guard():
    spec = get_problem("burgers_degenerate")
    big = zero_field(spec, 256, 8)
    with pytest.raises(ValueError, match="4D quadrature"):
        kuznetsov_terms_4d(big, big, params())
    many = zero_field(spec, 32, 128)
    with pytest.raises(ValueError, match="4D quadrature"):
        kuznetsov_terms_4d(many, many, params())


def test_error_budget_roundtrip():
    b = ErrorBudget(0.1, 1, 1, 2, 3, 4, 5, 5, 5, 0.3, 0.2, 1.0, 3.3)
    assert b.to_dict()["c6"] == 5 and len(b.ledger_rows()) == 11
