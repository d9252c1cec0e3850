import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degvisc.mesh import Field, Grid1D, SpaceTimeField, TimeGrid
from degvisc.metrics import (bv_seminorm, fit_rate, l1_qt, l1_slice, restrict, restrict_field,
                             sup_bv)


def st_field(values, L=1.0, T=1.0):
    nt, nx = values.shape[0] - 1, values.shape[1]
    return SpaceTimeField(Grid1D(0.0, L, nx), TimeGrid(T, nt), values)


def test_l1_qt_identical_is_zero(rng):
    u = st_field(rng.normal(size=(5, 8)))
    assert l1_qt(u, u) == 0.0


def test_l1_qt_constant_offset():
    L, T, c = 2.0, 0.5, 0.3
    u = st_field(np.zeros((7, 10)), L, T)
    v = st_field(np.full((7, 40), c), L, T)
    assert abs(l1_qt(u, v) - c * L * T) <= 1e-12


def test_l1_qt_matches_double_loop(rng):
    nx, nt = 32, 9
    u = st_field(rng.normal(size=(nt + 1, nx)))
    v = st_field(rng.normal(size=(nt + 1, nx)))
    g, tg = u.grid, u.tgrid
    terms = []
    for j in range(nt + 1):
        for i in range(nx):
            terms.append(abs(u.values[j, i] - v.values[j, i]) * g.dx * tg.weights[j])
    assert l1_qt(u, v) == math.fsum(terms)


def test_l1_qt_rejects_incompatible(rng):
    u = st_field(rng.normal(size=(5, 8)))
    with pytest.raises(ValueError):
        l1_qt(u, st_field(rng.normal(size=(5, 12))))
    with pytest.raises(ValueError):
        l1_qt(u, st_field(rng.normal(size=(6, 16))))


def test_l1_qt_metric_properties(rng):
    for _ in range(20):
        a, b, c = (st_field(rng.normal(size=(4, 16))) for _ in range(3))
        assert abs(l1_qt(a, b) - l1_qt(b, a)) <= 1e-12
        assert l1_qt(a, c) <= l1_qt(a, b) + l1_qt(b, c) + 1e-12


def test_l1_slice_examples():
    g = Grid1D(0.0, 1.0, 10)
    step = Field(g, np.where(g.centers < 0.3, 1.0, 0.0))
    assert l1_slice(step, step) == 0.0
    assert l1_slice(step, Field(g, np.zeros(10))) == pytest.approx(0.3)
    fine = Grid1D(0.0, 1.0, 40)
    v = Field(fine, np.sin(fine.centers))
    brute = sum(abs(step.values[i] - np.mean(v.values[4 * i:4 * i + 4])) * g.dx for i in range(10))
    assert l1_slice(step, v) == pytest.approx(brute, abs=1e-15)


def test_bv_examples():
    assert bv_seminorm(np.full(9, 0.4)) == 0.0
    assert bv_seminorm(np.array([0, 0, 1, 1.0])) == 1.0
    g = Grid1D(0.0, 1.0, 400)
    amp = 0.7
    sine = amp * np.sin(2 * np.pi * g.centers)
    assert bv_seminorm(sine, periodic=True) == pytest.approx(4 * amp, abs=4 * amp * (np.pi * g.dx) ** 2)
    box = np.array([0, 1, 1, 0.0])
    assert bv_seminorm(box, periodic=True) == 2.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=64).filter(lambda v: len(v) % 2 == 0))
def test_restriction_never_increases_tv(vals):
    vals = np.array(vals)
    assert bv_seminorm(restrict(vals, 2)) <= bv_seminorm(vals) * (1 + 1e-12) + 1e-9


def test_restrict_field_and_sup_bv():
    fine = st_field(np.tile(np.array([0, 0, 1, 1, 1, 1, 0, 0.0]), (3, 1)))
    coarse = restrict_field(fine, Grid1D(0.0, 1.0, 4))
    assert coarse.values[0].tolist() == [0.0, 1.0, 1.0, 0.0]
    assert sup_bv(fine) == 2.0


def test_fit_rate_exact_law():
    eps = [2.0 ** -j for j in range(4, 10)]
    fit = fit_rate([(e, 2 * math.sqrt(e)) for e in eps])
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.logC == pytest.approx(math.log(2), abs=1e-12)
    assert fit.residual <= 1e-12
    assert fit.c_hat == pytest.approx(2.0) and fit.c_spread == pytest.approx(1.0)


def test_fit_rate_preconditions():
    with pytest.raises(ValueError):
        fit_rate([(0.1, 0.2), (0.05, 0.1)])
    with pytest.raises(ValueError):
        fit_rate([(0.1, 0.2), (0.05, 0.0), (0.01, 0.1)])
    with pytest.raises(ValueError):
        fit_rate([(0.1, 0.2), (-0.05, 0.1), (0.01, 0.1)])


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.lists(st.floats(1e-4, 1.0), min_size=3, max_size=8, unique=True))
def test_fit_rate_scale_equivariant(lam, errs):
    eps = [2.0 ** -j for j in range(len(errs))]
    a = fit_rate(list(zip(eps, errs)))
    b = fit_rate([(e, lam * v) for e, v in zip(eps, errs)])
    assert abs(a.slope - b.slope) <= 1e-12 * max(1.0, abs(a.slope)) + 1e-12
    assert b.logC - a.logC == pytest.approx(math.log(lam), abs=1e-9)
