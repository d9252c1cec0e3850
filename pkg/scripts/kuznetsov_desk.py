"""Desk-scale doubled-variable terms: r0 halving and the alpha0 -> 0 comparison."""
import argparse
import math

from degvisc.budget import kuznetsov_limits, kuznetsov_terms_4d
from degvisc.catalog import get_problem
from degvisc.entropy import TestFnParams
from degvisc.solver import SchemeConfig, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=64)
    ap.add_argument("--eps", type=float, default=1 / 64)
    args = ap.parse_args()
    spec = get_problem("burgers_degenerate")
    T = spec.horizon
    ref = solve(spec, spec.grid(2 * args.nx), SchemeConfig(), n_store=64)
    w = solve(spec, spec.grid(args.nx), SchemeConfig(eps=args.eps), n_store=64)
    r = math.sqrt(T * args.eps)
    print("r0        R_{w_eps,w}   R_{w,x}      R_{w,t}")
    for r0 in (0.04, 0.02, 0.01):
        p = TestFnParams(r=r, r0=r0, alpha0=0.01, nu=0.2 * T, tau=0.8 * T, horizon=T)
        k = kuznetsov_terms_4d(ref, w, p)
        print(f"{r0:<8g}  {k.r_eps_w:11.5f}  {k.r_w_x:11.5f}  {k.r_w_t:11.5f}")
    gap, c1r = kuznetsov_limits(ref, w, p)
    print(f"L1 gap(tau) - gap(nu) = {gap:.5f};  c1 r = {c1r:.5f}")


if __name__ == "__main__":
    main()
