"""Calibrate the audit tolerance constant against the exact heat solution.

Prints the largest audit deviation (in units of dx + r dx + eta0) per grid;
the pinned constant in degvisc.entropy must not be smaller.
"""
import argparse

import numpy as np

from degvisc.catalog import get_problem
from degvisc.entropy import C_AUDIT, audit_deviation, default_k_values, default_test_functions
from degvisc.mesh import SpaceTimeField, TimeGrid
from degvisc.oracle import box_jumps, heat_exact_average
from degvisc.problem import flat_regions


def exact_heat(nx, nt):
    spec = get_problem("heat")
    g, tg = spec.grid(nx), TimeGrid(spec.horizon, nt)
    e = g.interfaces
    rows = [spec.initial_values(g)]
    rows += [heat_exact_average(box_jumps(1.0, -0.25, 0.25), 1.0, e[:-1], e[1:], t) for t in tg.times[1:]]
    return spec, SpaceTimeField(g, tg, np.array(rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, nargs="*", default=[100, 200, 400])
    ap.add_argument("--nt", type=int, default=512)
    args = ap.parse_args()
    for nx in args.nx:
        spec, w = exact_heat(nx, args.nt)
        ks = default_k_values(spec.initial_values(w.grid), flat_regions(spec.a))
        dev = audit_deviation(w, spec, ks, default_test_functions(spec))
        print(f"nx {nx:5d}: deviation {dev:.4f}  (pinned constant {C_AUDIT})")


if __name__ == "__main__":
    main()
