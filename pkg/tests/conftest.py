import time

import numpy as np
import pytest

from degvisc.catalog import get_problem
from degvisc.solver import SchemeConfig, solve

SWEEP_EPS = [2.0 ** -j for j in range(4, 10)]

_CRITERIA = {}


@pytest.fixture(scope="session")
def sweep_cache():
    """Reference and viscous solves shared by the acceptance and budget tests.

    ``get.seconds[key]`` holds the wall time of the solve that filled ``key``.
    """
    cache = {}

    def get(name, nx, eps):
        key = (name, nx, eps)
        if key not in cache:
            spec = get_problem(name)
            t0 = time.perf_counter()
            cache[key] = solve(spec, spec.grid(nx), SchemeConfig(eps=eps), n_store=512)
            get.seconds[key] = time.perf_counter() - t0
        return cache[key]

    get.seconds = {}
    return get


@pytest.fixture(scope="session")
def criterion():
    """record(number, passed, detail) prints and keeps one verdict line per criterion."""
    def record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
