"""Entropy audits of every catalog problem at eps = 0 and at positive eps."""
import argparse

from degvisc.catalog import CATALOG, get_problem
from degvisc.entropy import audit_approximate_entropy, default_k_values, default_test_functions
from degvisc.problem import flat_regions
from degvisc.solver import SchemeConfig, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=200)
    ap.add_argument("--eps", type=float, nargs="*", default=[0.0, 1 / 16, 1 / 64])
    args = ap.parse_args()
    print("problem               eps       rows  fails  min_hyp/tol  max_par_dev/tol")
    for name in CATALOG:
        spec = get_problem(name)
        for eps in args.eps:
            w = solve(spec, spec.grid(args.nx), SchemeConfig(eps=eps), n_store=512)
            ks = default_k_values(spec.initial_values(w.grid), flat_regions(spec.a))
            rep = audit_approximate_entropy(w, spec, ks, default_test_functions(spec), eps)
            print(f"{name:20s}  {eps:8.5f}  {len(rep.rows):4d}  {len(rep.failures):5d}  "
                  f"{rep.worst_hyp_margin() / rep.tol:11.3f}  {rep.worst_par_deviation() / rep.tol:15.3f}")


if __name__ == "__main__":
    main()
