"""Run configuration: ``key = value`` lines with ``#`` comments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

from .catalog import CATALOG, get_problem, load_custom
from .entropy import admissibility_errors
from .problem import ProblemSpec


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class RunConfig:
    problem: str
    nx: int
    eps_list: Tuple[float, ...] = ()
    xmin: Optional[float] = None
    xmax: Optional[float] = None
    T: Optional[float] = None
    bc: Optional[str] = None
    ref_refine: int = 4
    cfl_safety: float = 0.45
    k_count: int = 20
    testfn_count: int = 5
    nu: Optional[float] = None
    tau: Optional[float] = None
    r: Optional[float] = None
    r0: Optional[float] = None
    alpha0: Optional[float] = None
    eps: Optional[float] = None
    n_store: int = 512
    output_dir: str = "out"
    seed: int = 0
    audit_field: Optional[str] = None
    coeff_csv: Optional[str] = None
    field_csv: Optional[str] = None

    @property
    def run_eps(self) -> float:
        """eps for single-run subcommands: ``eps`` if set, else the first sweep value, else 0."""
        if self.eps is not None:
            return self.eps
        return self.eps_list[0] if self.eps_list else 0.0

    def echo(self) -> Dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(f"{e:.17g}" for e in v)
            elif isinstance(v, float):
                v = f"{v:.17g}"
            out[f.name] = "" if v is None else str(v)
        return out


@dataclass(frozen=True)
class FnParams:
    """Resolved test-function parameters for one eps."""

    r: float
    r0: float
    alpha0: float
    nu: float
    tau: float


def resolve_params(cfg: RunConfig, horizon: float, eps: float) -> FnParams:
    """Overrides where given, else r = sqrt(T eps), r0 = r/4, nu = 0.1 T, tau = 0.9 T,
    alpha0 = min(nu - r0, T - tau - r0) / 2."""
    T = horizon
    r = cfg.r if cfg.r is not None else math.sqrt(T * eps)
    r0 = cfg.r0 if cfg.r0 is not None else r / 4.0
    nu = cfg.nu if cfg.nu is not None else 0.1 * T
    tau = cfg.tau if cfg.tau is not None else 0.9 * T
    alpha0 = cfg.alpha0 if cfg.alpha0 is not None else min(nu - r0, T - tau - r0) / 2.0
    return FnParams(r, r0, alpha0, nu, tau)


_INT_KEYS = {"nx", "ref_refine", "k_count", "testfn_count", "seed", "n_store"}
_FLOAT_KEYS = {"xmin", "xmax", "T", "cfl_safety", "nu", "tau", "r", "r0", "alpha0", "eps"}
_STR_KEYS = {"problem", "bc", "output_dir", "audit_field", "coeff_csv", "field_csv"}
_KNOWN = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"eps_list"}


def _number(text: str, line: int, key: str, kind):
    try:
        value = kind(text)
    except ValueError:
        raise ConfigError(f"malformed value for {key}: {text!r}", line) from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{key} must be finite", line)
    return value


def _parse_eps(text: str, line: int) -> Tuple[float, ...]:
    vals = []
    for tok in text.replace(",", " ").split():
        v = _number(tok, line, "eps_list", float)
        if not v > 0:
            raise ConfigError("eps must be positive", line)
        vals.append(v)
    if not vals:
        raise ConfigError("eps_list is empty", line)
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("eps_list must be strictly descending", line)
    return tuple(vals)


def parse_config(text: str) -> RunConfig:
    values: Dict[str, object] = {}
    lines: Dict[str, int] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", n)
        key, val = (s.strip() for s in body.split("=", 1))
        if key not in _KNOWN:
            raise ConfigError(f"unknown key {key!r}", n)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", n)
        if not val:
            raise ConfigError(f"missing value for {key}", n)
        if key in _INT_KEYS:
            values[key] = _number(val, n, key, int)
        elif key in _FLOAT_KEYS:
            values[key] = _number(val, n, key, float)
        elif key == "eps_list":
            values[key] = _parse_eps(val, n)
        else:
            values[key] = val
        lines[key] = n

    for key in ("problem", "nx"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    cfg = RunConfig(**values)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: RunConfig, lines: Dict[str, int]) -> None:
    at = lines.get
    if cfg.problem != "custom" and cfg.problem not in CATALOG:
        raise ConfigError(f"unknown problem {cfg.problem!r}", at("problem"))
    if cfg.problem == "custom":
        for key in ("coeff_csv", "field_csv", "xmin", "xmax", "T"):
            if getattr(cfg, key) is None:
                raise ConfigError(f"custom problem requires {key}", at("problem"))
    if cfg.nx < 4:
        raise ConfigError("nx must be >= 4", at("nx"))
    if cfg.ref_refine < 4:
        raise ConfigError("ref_refine must be >= 4", at("ref_refine"))
    if not 0 < cfg.cfl_safety <= 1:
        raise ConfigError("cfl_safety must lie in (0, 1]", at("cfl_safety"))
    if cfg.k_count < 1:
        raise ConfigError("k_count must be >= 1", at("k_count"))
    if cfg.testfn_count < 1:
        raise ConfigError("testfn_count must be >= 1", at("testfn_count"))
    if cfg.n_store < 1:
        raise ConfigError("n_store must be >= 1", at("n_store"))
    if cfg.bc is not None and cfg.bc not in ("periodic", "outflow"):
        raise ConfigError(f"unknown boundary rule {cfg.bc!r}", at("bc"))
    if cfg.T is not None and not cfg.T > 0:
        raise ConfigError("T must be positive", at("T"))
    if cfg.eps is not None and cfg.eps < 0:
        raise ConfigError("eps must be nonnegative", at("eps"))
    if cfg.xmin is not None and cfg.xmax is not None and not cfg.xmax > cfg.xmin:
        raise ConfigError("xmax must exceed xmin", at("xmax"))
    horizon = cfg.T if cfg.T is not None else (
        get_problem(cfg.problem).horizon if cfg.problem != "custom" else None)
    to_check: List[float] = [e for e in cfg.eps_list]
    if cfg.eps is not None and cfg.eps > 0:
        to_check.append(cfg.eps)
    for eps in to_check:
        p = resolve_params(cfg, horizon, eps)
        errs = admissibility_errors(p.r, p.r0, p.alpha0, p.nu, p.tau, horizon)
        if errs:
            line = next((at(k) for k in ("tau", "nu", "r0", "alpha0", "r") if k in lines),
                        at("eps_list") or at("eps"))
            raise ConfigError(f"inadmissible test-function parameters at eps={eps:g}: "
                              + "; ".join(errs), line)


def build_problem(cfg: RunConfig) -> ProblemSpec:
    """Catalog (or custom CSV) problem with domain, horizon and bc overrides applied."""
    if cfg.problem == "custom":
        return load_custom(cfg.coeff_csv, cfg.field_csv, (cfg.xmin, cfg.xmax), cfg.T,
                           cfg.bc or "outflow")
    spec = get_problem(cfg.problem)
    domain = (cfg.xmin if cfg.xmin is not None else spec.domain[0],
              cfg.xmax if cfg.xmax is not None else spec.domain[1])
    return ProblemSpec(f=spec.f, a=spec.a, velocity=spec.velocity, w0=spec.w0, domain=domain,
                       horizon=cfg.T if cfg.T is not None else spec.horizon,
                       bc=cfg.bc or spec.bc, name=spec.name)
