"""Command line: degvisc <validate|solve|sweep|entropy|budget|plot> --config PATH [--out DIR]."""
from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .budget import (approximation_inequality_check, check_rvisc_bound, measure_constants)
from .config import ConfigError, RunConfig, build_problem, parse_config, resolve_params
from .entropy import (C_AUDIT, EntropyReport, audit_approximate_entropy, default_k_values,
                      default_test_functions)
from .mesh import read_spacetime_dir, write_spacetime_dir
from .metrics import fit_rate, l1_qt, l1_slice, restrict_field
from .problem import flat_regions, validate_problem
from .solver import NumericalError, SchemeConfig, solve, support_margin_ok

log = logging.getLogger("degvisc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERDICT = 0, 2, 3, 4
RATES_COLUMNS = ["eps", "nx_eps", "nx_ref", "dx", "dt", "l1_qt_error", "l1_final_slice",
                 "err_over_sqrt_eps"]


def _g(x: float) -> str:
    return f"{x:.17g}"


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("DEGVISC_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


class Manifest:
    """key,value rows written once at the end; wall times go to timings.csv."""

    def __init__(self, cfg: RunConfig, command: str):
        self.rows: List[tuple] = [("tool_version", __version__), ("command", command)]
        self.rows += [(f"config.{k}", v) for k, v in cfg.echo().items()]
        self.timings: List[tuple] = []

    def add(self, key: str, value) -> None:
        if isinstance(value, float):
            value = _g(value)
        self.rows.append((key, str(value)))

    def time(self, key: str, seconds: float) -> None:
        self.timings.append((key, f"{seconds:.3f}"))

    def write(self, out: Path) -> None:
        files = sorted(p for p in out.rglob("*") if p.is_file()
                       and p.name not in ("manifest.csv", "timings.csv"))
        with open(out / "manifest.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "value"])
            w.writerows(self.rows)
            for p in files:
                digest = hashlib.sha256(p.read_bytes()).hexdigest()
                w.writerow([f"file.{p.relative_to(out).as_posix()}", digest])
        with open(out / "timings.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage", "seconds"])
            w.writerows(self.timings)


def _scheme(cfg: RunConfig, eps: float) -> SchemeConfig:
    return SchemeConfig(cfl_safety=cfg.cfl_safety, eps=eps)


def _solve(cfg: RunConfig, nx: int, eps: float):
    spec = build_problem(cfg)
    return solve(spec, spec.grid(nx), _scheme(cfg, eps), n_store=cfg.n_store)


def _member(args):
    cfg, nx, eps = args
    return _solve(cfg, nx, eps)


def _solve_many(cfg: RunConfig, jobs, manifest: Optional["Manifest"] = None):
    """Independent solves, in parallel up to DEGVISC_THREADS; results keep job order."""
    workers = min(thread_cap(), len(jobs))
    results = []
    try:
        if workers <= 1:
            for j in jobs:
                results.append(_member(j))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_member, j) for j in jobs]
                for fut in futures:
                    results.append(fut.result())
    except NumericalError:
        if manifest is not None:
            manifest.add("members_completed", len(results))
        raise
    return results


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_budget(path: Path, budgets) -> None:
    rows = []
    for b in budgets:
        for name, value, formula, meaning in b.ledger_rows():
            rows.append([_g(b.eps), name, _g(value), formula, meaning])
    _write_csv(path, ["eps", "name", "value", "formula", "meaning"], rows)


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg: RunConfig, out: Path, manifest: Manifest) -> int:
    spec = build_problem(cfg)
    report = validate_problem(spec, nx=cfg.nx)
    _write_csv(out / "validation.csv", ["violation"], [[v] for v in report])
    regions = flat_regions(spec.a) if spec.a.is_nondecreasing() else None
    manifest.add("violations", len(report))
    manifest.add("flat_regions", "" if regions is None else
                 ";".join(f"[{_g(a)},{_g(b)}]" for a, b in regions.intervals))
    for v in report:
        print(f"violated: {v}")
    return EXIT_OK if not report else EXIT_VERDICT


def cmd_solve(cfg: RunConfig, out: Path, manifest: Manifest) -> int:
    eps = cfg.run_eps
    t0 = time.perf_counter()
    field = _solve(cfg, cfg.nx, eps)
    manifest.time("solve", time.perf_counter() - t0)
    write_spacetime_dir(out / "snapshots", field)
    manifest.add("eps", eps)
    manifest.add("grid.nx", cfg.nx)
    manifest.add("grid.dx", field.grid.dx)
    manifest.add("slices", field.tgrid.nt + 1)
    manifest.add("support_margin_ok", support_margin_ok(field))
    return EXIT_OK


def reference_check(cfg: RunConfig, ref, half_ref, errors) -> Dict[str, object]:
    """Self-convergence of the reference (ref_refine vs ref_refine/2, on the coarse grid)."""
    coarse = build_problem(cfg).grid(cfg.nx)
    gap = l1_qt(restrict_field(ref, coarse), half_ref)
    threshold = 0.1 * min(errors) if errors else math.inf
    return {"reference_self_convergence": gap, "reference_threshold": threshold,
            "reference_ok": gap <= threshold}


def run_sweep(cfg: RunConfig, out: Path, manifest: Manifest):
    """Reference once at nx * ref_refine, then one viscous run per eps at nx."""
    if not cfg.eps_list:
        raise ConfigError("sweep needs eps_list")
    spec = build_problem(cfg)
    nx_ref = cfg.nx * cfg.ref_refine
    t0 = time.perf_counter()
    jobs = [(cfg, nx_ref, 0.0), (cfg, nx_ref // 2, 0.0)] + [(cfg, cfg.nx, e) for e in cfg.eps_list]
    results = _solve_many(cfg, jobs, manifest)
    manifest.time("solves", time.perf_counter() - t0)
    ref, half = results[0], results[1]
    members = results[2:]
    coarse = spec.grid(cfg.nx)
    rows, points, budgets = [], [], []
    flagged = not support_margin_ok(ref)
    for eps, w in zip(cfg.eps_list, members):
        err = l1_qt(w, ref)
        fin = l1_slice(w.final, ref.final)
        rows.append([_g(eps), cfg.nx, nx_ref, _g(w.grid.dx), _g(w.tgrid.dt), _g(err), _g(fin),
                     _g(err / math.sqrt(eps))])
        points.append((eps, err))
        budgets.append(measure_constants(ref, w, spec, eps))
        flagged |= not support_margin_ok(w)
    _write_csv(out / "rates.csv", RATES_COLUMNS, rows)
    _write_budget(out / "budget.csv", budgets)
    fit = fit_rate(points) if len(points) >= 3 else None
    if fit is not None:
        for key in ("slope", "logC", "residual", "c_hat", "c_min"):
            manifest.add(f"fit.{key}", getattr(fit, key))
        manifest.add("fit.c_spread", fit.c_spread)
    check = reference_check(cfg, ref, restrict_field(half, coarse),
                            [e for _, e in points])
    for k, v in check.items():
        manifest.add(k, v if not isinstance(v, float) else float(v))
    manifest.add("support_margin_flagged", flagged)
    manifest.add("kernel_K_interpretation", "K = integral |rho'| of the mollifier kernel")
    return fit, check


def cmd_sweep(cfg: RunConfig, out: Path, manifest: Manifest) -> int:
    fit, _ = run_sweep(cfg, out, manifest)
    if fit is not None:
        print(f"slope {fit.slope:.4f}  c_hat {fit.c_hat:.4g}  spread {fit.c_spread:.3f}")
    return EXIT_OK


def run_entropy_audit(cfg: RunConfig, out: Path, manifest: Manifest) -> EntropyReport:
    spec = build_problem(cfg)
    if cfg.k_count < 1:
        raise ConfigError("empty k list")
    if cfg.audit_field:
        field = read_spacetime_dir(cfg.audit_field)
        eps = cfg.eps if cfg.eps is not None else 0.0
    else:
        eps = cfg.eps if cfg.eps is not None else 0.0
        field = _solve(cfg, cfg.nx, eps)
    regions = flat_regions(spec.a)
    ks = default_k_values(field.values[0], regions, cfg.k_count)
    phis = default_test_functions(spec, cfg.testfn_count)
    report = audit_approximate_entropy(field, spec, ks, phis, eps)
    report.to_csv(out / "entropy.csv")
    manifest.add("eps", eps)
    manifest.add("c_audit", C_AUDIT)
    manifest.add("tol", report.tol)
    manifest.add("rows", len(report.rows))
    manifest.add("failures", len(report.failures))
    return report


def cmd_entropy(cfg: RunConfig, out: Path, manifest: Manifest) -> int:
    report = run_entropy_audit(cfg, out, manifest)
    print(f"{len(report.rows)} rows, {len(report.failures)} failures, tol {report.tol:.3e}")
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_budget(cfg: RunConfig, out: Path, manifest: Manifest) -> int:
    eps = cfg.run_eps
    if not eps > 0:
        raise ConfigError("budget needs a positive eps")
    spec = build_problem(cfg)
    ref, w = _solve_many(cfg, [(cfg, cfg.nx * cfg.ref_refine, 0.0), (cfg, cfg.nx, eps)], manifest)
    budget = measure_constants(ref, w, spec, eps)
    p = resolve_params(cfg, spec.horizon, eps)
    rv = check_rvisc_bound(w, p.r, p.nu, p.tau, eps, budget, spec.periodic)
    ai = approximation_inequality_check(ref, w, spec, p.r, p.nu, p.tau, budget, eps)
    _write_budget(out / "budget.csv", [budget])
    _write_csv(out / "approx_inequality.csv", ["quantity", "value"],
               [[k, _g(v)] for k, v in ai.ledger_rows()])
    manifest.add("rvisc.measured", rv.measured)
    manifest.add("rvisc.bound", rv.bound)
    manifest.add("rvisc.passed", rv.passed)
    manifest.add("approx.passed", ai.passed)
    manifest.add("kernel_K_interpretation", "K = integral |rho'| of the mollifier kernel")
    ok = rv.passed and ai.passed
    print(f"R_visc {rv.measured:.4g} <= {rv.bound:.4g}: {rv.passed}; "
          f"approximation inequality: {ai.passed}")
    return EXIT_OK if ok else EXIT_VERDICT


# --------------------------------------------------------------------------
# plot


def read_rates(path) -> List[tuple]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"eps", "l1_qt_error"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: not a rates table")
        try:
            rows = [(float(r["eps"]), float(r["l1_qt_error"])) for r in reader]
        except (TypeError, ValueError):
            raise ValueError(f"{path}: malformed row") from None
    if not rows or any(not (e > 0 and v > 0) for e, v in rows):
        raise ValueError(f"{path}: need positive eps and errors")
    return rows


def emit_plot(rates_path, svg_path, width: int = 480, height: int = 360) -> Path:
    """Log-log scatter of (eps, error) with fitted line and slope-1/2 guide through c_hat."""
    rows = read_rates(rates_path)
    le = np.log10([e for e, _ in rows])
    lv = np.log10([v for _, v in rows])
    c_hat = max(v / math.sqrt(e) for e, v in rows)
    fit = fit_rate(rows) if len(rows) >= 3 else None
    x0, x1 = le.min() - 0.2, le.max() + 0.2
    guide = (math.log10(c_hat) + 0.5 * x0, math.log10(c_hat) + 0.5 * x1)
    ys = list(lv) + list(guide)
    if fit is not None:
        fy = ((fit.logC + fit.slope * x0 * math.log(10)) / math.log(10),
              (fit.logC + fit.slope * x1 * math.log(10)) / math.log(10))
        ys += list(fy)
    y0, y1 = min(ys) - 0.2, max(ys) + 0.2
    pad = 50

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="black"/>',
             f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
             'font-size="12">log10 eps</text>',
             f'<text x="14" y="{height / 2:.1f}" font-size="12" '
             f'transform="rotate(-90 14 {height / 2:.1f})" text-anchor="middle">log10 L1 error</text>']
    parts.append(f'<line class="guide" x1="{px(x0):.2f}" y1="{py(guide[0]):.2f}" '
                 f'x2="{px(x1):.2f}" y2="{py(guide[1]):.2f}" stroke="gray" stroke-dasharray="6 4"/>')
    if fit is not None:
        parts.append(f'<line class="fit" x1="{px(x0):.2f}" y1="{py(fy[0]):.2f}" '
                     f'x2="{px(x1):.2f}" y2="{py(fy[1]):.2f}" stroke="black"/>')
    for x, y in zip(le, lv):
        parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="steelblue"/>')
    label = f"slope {fit.slope:.3f}" if fit is not None else "no fit (fewer than 3 points)"
    parts.append(f'<text x="{pad + 6}" y="{pad + 16}" font-size="12">{label}</text>')
    parts.append("</svg>")
    svg_path = Path(svg_path)
    svg_path.write_text("\n".join(parts) + "\n")
    return svg_path


def cmd_plot(cfg: RunConfig, out: Path, manifest: Manifest, rates: Optional[str] = None) -> int:
    src = Path(rates) if rates else out / "rates.csv"
    emit_plot(src, out / "rates.svg")
    manifest.add("rates_source", src.name)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "sweep": cmd_sweep,
            "entropy": cmd_entropy, "budget": cmd_budget, "plot": cmd_plot}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="degvisc", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    ap.add_argument("--rates", default=None, help="rates.csv for plot (default: <out>/rates.csv)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(cfg, args.command)
    t0 = time.perf_counter()
    try:
        if args.command == "plot":
            code = cmd_plot(cfg, out, manifest, args.rates)
        else:
            code = COMMANDS[args.command](cfg, out, manifest)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest.add("error", str(exc))
        code = EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        manifest.add("error", str(exc))
        code = EXIT_NUMERIC
    manifest.add("exit_code", code)
    manifest.time("total", time.perf_counter() - t0)
    manifest.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
