"""Task orchestration: surface -> isometric -> conformal -> task sections of a report."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calculus import Calculus
from .catalog import catalog
from .config import RunConfig
from .conformal import (ConformalData, canonical_frame_from_lift, compare_tensors,
                        conformal_data, identity_suite, integrability_suite, invariants_frame)
from .errors import ConfGeomError, NonRegular
from .indefinite import random_pseudo_orthogonal
from .isometric import isometric_data, scalar_curvature_checked
from .isotropy import isotropy_from
from .report import Report
from .spaceforms import apply_conformal, lift, rescale_lift
from .willmore import (BumpSpec, conformal_volume, first_variation_check, residual_crosscheck,
                       willmore_residual)

VERSION = "0.1.0"

JETS_TOLERANCES = {
    "analyze.gauss": 1e-5,
    "analyze.identity": 1e-6,
    "analyze.lapY_norm": 1e-4,
    "analyze.integrability": 1e-4,
    "analyze.dual_path": 1e-6,
    "invariance.metric": 1e-8,
    "invariance.rescale": 1e-6,
    "variation.rel_error": 0.05,
}
FD_TOLERANCES = {
    "analyze.gauss": 1e-3,
    "analyze.identity": 1e-3,
    "analyze.lapY_norm": 1e-3,
    "analyze.integrability": 1e-2,
    "analyze.dual_path": 1e-3,
    "invariance.metric": 1e-4,
    "invariance.rescale": 1e-4,
    "variation.rel_error": 0.05,
}


@dataclass
class RunResult:
    report: Report
    fields: dict
    timings: list
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


def tolerances(cfg: RunConfig) -> dict:
    base = dict(JETS_TOLERANCES if cfg.backend == "jets" else FD_TOLERANCES)
    base.update(cfg.tolerances)
    return base


class Context:
    """Shared pipeline state (surface, isometric and conformal data) for one configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.calc = cfg.calculus()
        self.immersion = catalog(cfg.surface, cfg.params, cfg.grid)
        self.iso = isometric_data(self.immersion, self.calc)
        self.tol = tolerances(cfg)
        self.non_regular = None
        self.data: ConformalData | None = None
        try:
            self.data = conformal_data(self.iso, self.calc)
        except NonRegular as exc:
            self.non_regular = str(exc)

    @property
    def region(self) -> np.ndarray:
        return self.calc.interior(self.calc.default_band()) & self.data.tensors.valid


def _check(rep: Report, key: str, value: float, tol: float, failures: list):
    rep.add(key, value)
    rep.add(key + ".tolerance", tol)
    ok = bool(value <= tol)
    rep.add(key + ".pass", ok)
    if not ok and not failures:
        failures.append(key)


def task_analyze(ctx: Context) -> tuple:
    rep, failures = Report(), []
    tol = ctx.tol
    _, _, gauss = scalar_curvature_checked(ctx.iso.tangent, ctx.iso.second,
                                           ctx.immersion.spaceform, ctx.calc)
    _check(rep, "gauss_residual", gauss, tol["analyze.gauss"], failures)
    if ctx.data is None:
        return rep, failures
    d = ctx.data
    region = ctx.region
    rep.add("xi_discrepancy", d.frame.xi_discrepancy)
    rep.add("conformal_volume", conformal_volume(d.tensors, ctx.calc))
    ids = identity_suite(d.tensors, d.frame, ctx.calc, region)
    for k, v in ids.items():
        if k == "sigma_regions":
            rep.add("identity.sigma_regions", int(v))
            continue
        t = tol["analyze.lapY_norm"] if k == "lapY_norm" else tol["analyze.identity"]
        _check(rep, f"identity.{k}", v, t, failures)
    for k, v in integrability_suite(d.tensors, ctx.calc, region).items():
        _check(rep, f"integrability.{k}", v, tol["analyze.integrability"], failures)
    if d.factor.sign > 0:
        for k, v in compare_tensors(d.extrinsic, d.tensors, region).items():
            _check(rep, f"dual_path.{k}", v, tol["analyze.dual_path"], failures)
    else:
        for k, v in compare_tensors(d.extrinsic, d.tensors, region).items():
            rep.add(f"dual_path.{k}", v)
    return rep, failures


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b))) / max(float(np.max(np.abs(b))), 1.0)


def _log_factor(calc: Calculus, seed: int):
    """Smooth random exponent lambda(s, t) from the seed (trigonometric, periodic-safe)."""
    rng = np.random.default_rng(seed)
    out = None
    for X, ax in zip(calc.coordinates(), calc.grid.axes):
        k = 2.0 * np.pi / (ax.hi - ax.lo)
        a, ph = rng.uniform(0.1, 0.4), rng.uniform(0.0, 2.0 * np.pi)
        term = ((X * k + ph).sin()) * a
        out = term if out is None else out + term
    return out


def invariance_one(ctx: Context, seed: int) -> list:
    d, calc = ctx.data, ctx.calc
    base = lift(ctx.immersion, calc)
    region = ctx.region
    ref = d.tensors
    T = random_pseudo_orthogonal(base.signature, seed)
    _, fr = canonical_frame_from_lift(apply_conformal(T, base), calc)
    mapped = invariants_frame(fr, calc)
    lam = _log_factor(calc, seed)
    _, fr2 = canonical_frame_from_lift(rescale_lift(base, lam), calc)
    mask = region & fr.g.valid & fr2.g.valid
    return [
        ("map_orthogonality", T.orthogonality_residual),
        ("metric", _rel(fr.g.value[mask], ref.g.value[mask])),
        ("A", _rel(mapped.A.value[mask], ref.A.value[mask])),
        ("rescale", _rel(fr2.g.value[mask], ref.g.value[mask])),
    ]


def task_invariance(ctx: Context, pool) -> tuple:
    rep, failures = Report(), []
    results = list(pool.map(lambda s: invariance_one(ctx, s), ctx.cfg.seeds))
    worst = {}
    for seed, items in zip(ctx.cfg.seeds, results):
        for k, v in items:
            rep.add(f"seed{seed}.{k}", v)
            worst[k] = max(worst.get(k, 0.0), v)
    _check(rep, "max_metric", worst["metric"], ctx.tol["invariance.metric"], failures)
    rep.add("max_A", worst["A"])
    _check(rep, "max_rescale", worst["rescale"], ctx.tol["invariance.rescale"], failures)
    return rep, failures


def task_willmore(ctx: Context) -> tuple:
    rep = Report()
    d = ctx.data
    wr = willmore_residual(d.tensors, ctx.calc)
    rep.add("form", wr.form_used)
    rep.add("L2", wr.L2)
    rep.add("Linf", wr.Linf)
    if ctx.calc.backend == "jets" or ctx.calc.stencil.order >= 6:
        rep.add("crosscheck", residual_crosscheck(d.tensors, ctx.calc))
    rep.add("conformal_volume", conformal_volume(d.tensors, ctx.calc))
    ctx.willmore_E = wr.E
    return rep, []


def task_variation(ctx: Context, pool) -> tuple:
    rep, failures = Report(), []
    rank = len(ctx.data.tensors.xi_signs)
    bumps = [BumpSpec.random(ctx.calc, rank, s) for s in ctx.cfg.seeds]
    results = list(pool.map(
        lambda b: first_variation_check(ctx.immersion, b, ctx.calc, data=ctx.data), bumps))
    worst = 0.0
    for seed, r in zip(ctx.cfg.seeds, results):
        p = f"seed{seed}"
        rep.add(f"{p}.bump.center", r.bump["center"])
        rep.add(f"{p}.bump.radius", r.bump["radius"])
        rep.add(f"{p}.bump.weights", r.bump["weights"])
        rep.add(f"{p}.bump.profile", r.bump["profile"])
        rep.add(f"{p}.t_step", r.t_step)
        rep.add(f"{p}.W0", r.W0)
        rep.add(f"{p}.fd_derivative", r.fd_derivative)
        rep.add(f"{p}.fd_unextrapolated", r.fd_raw)
        rep.add(f"{p}.formula_value", r.formula_value)
        rep.add(f"{p}.abs_error", r.abs_error)
        rep.add(f"{p}.rel_error", r.rel_error)
        rep.add(f"{p}.noise_floor", r.noise_floor)
        rep.add(f"{p}.within_noise", bool(abs(r.fd_derivative) <= r.noise_floor
                                          and abs(r.formula_value) <= r.noise_floor))
        resolved = abs(r.fd_derivative) > 10.0 * r.noise_floor
        rep.add(f"{p}.resolved", bool(resolved))
        if resolved:
            worst = max(worst, r.rel_error)
    # on Willmore surfaces both sides vanish and only the within_noise flags are meaningful
    n_resolved = sum(abs(r.fd_derivative) > 10.0 * r.noise_floor for r in results)
    rep.add("resolved_seeds", n_resolved)
    if n_resolved:
        _check(rep, "max_rel_error", worst, ctx.tol["variation.rel_error"], failures)
    rep.add("max_abs_error", max(r.abs_error for r in results))
    return rep, failures


def task_isotropy(ctx: Context) -> tuple:
    rep = Report()
    overrides = {k.split(".", 1)[1]: v for k, v in ctx.tol.items() if k.startswith("isotropy.")}
    r = isotropy_from(ctx.data.tensors, ctx.data.frame, ctx.calc, ctx.region, **overrides)
    rep.add("verdict", r.verdict)
    rep.add("lambda_mean", r.lambda_mean)
    rep.add("lambda_stddev", r.lambda_stddev)
    rep.add("lambda_stddev.threshold", r.thresholds.lambda_stddev)
    rep.add("dev_A", r.dev_A)
    rep.add("dev_A.threshold", r.thresholds.dev_A)
    rep.add("dev_C", r.dev_C)
    rep.add("dev_C.threshold", r.thresholds.dev_C)
    rep.add("c_mean", r.c_mean)
    rep.add("c_variation", r.c_variation)
    rep.add("c_variation.threshold", r.thresholds.c_variation)
    rep.add("c_norm2", r.c_norm2)
    rep.add("c_norm2_minus_2lambda", r.c_norm2_minus_2lambda)
    rep.add("y_dot_c_minus_1", r.y_dot_c)
    rep.add("kappa_conf_variation", r.kappa_variation)
    rep.add("tol_band", r.tol_band)
    rep.add("band_limited", r.band_limited)
    for i, msg in enumerate(r.diagnostics):
        rep.add(f"diagnostic{i}", msg)
    ctx.lambda_field = r.lambda_field
    return rep, []


def _fields(ctx: Context) -> dict:
    """Named per-node fields: name -> (values with grid axes first, mask)."""
    out = {}
    sf = ctx.iso.second
    out["H"] = (sf.H.value, sf.H.valid)
    out["norm2_II"] = (sf.norm2_II.value, sf.norm2_II.valid)
    if ctx.data is None:
        return out
    d = ctx.data
    cf = d.factor
    out["f"] = (cf.f.value, cf.f.valid)
    out["tau"] = (cf.tau.value, cf.tau.valid & cf.regular_mask)
    out["sigma"] = (cf.sigma.astype(float), cf.regular_mask)
    ct = d.tensors
    for name in ("g", "A", "B", "C"):
        fld = getattr(ct, name)
        out[name] = (fld.value, fld.valid)
    out["kappa_conf"] = (ct.kappa_conf.value, ct.kappa_conf.valid)
    if getattr(ctx, "willmore_E", None) is not None:
        out["willmore_E"] = (ctx.willmore_E.value, ctx.willmore_E.valid)
    if getattr(ctx, "lambda_field", None) is not None:
        out["lambda"] = (ctx.lambda_field.value, ctx.lambda_field.valid)
    return out


def run(cfg: RunConfig, threads: int = 1) -> RunResult:
    """Execute the configured tasks; each task fills its own report section."""
    rep = Report()
    timings = []
    failures, warnings = [], []
    rep.add("software.name", "confgeom")
    rep.add("software.version", VERSION)
    rep.update("config", cfg.echo())

    t0 = time.perf_counter()
    ctx = Context(cfg)
    timings.append(("setup", time.perf_counter() - t0))
    cf = ctx.data.factor if ctx.data else None
    grid_nodes = int(np.prod(cfg.grid.shape))
    rep.add("mask.nodes", grid_nodes)
    rep.add("mask.fraction_regular", cf.fraction_regular if cf else 0.0)
    rep.add("mask.regions", cf.regions if cf else 0)
    rep.add("mask.sigma", cf.region_signs if cf else [])
    rep.add("mask.valid_nodes", int(ctx.data.tensors.valid.sum()) if ctx.data else 0)
    if ctx.non_regular:
        warnings.append(f"non-regular: {ctx.non_regular}")
    if ctx.data is not None:
        warnings.extend(ctx.data.frame.warnings)

    tasks = {"analyze": lambda: task_analyze(ctx)}
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        tasks.update({
            "invariance": lambda: task_invariance(ctx, pool),
            "willmore": lambda: task_willmore(ctx),
            "variation": lambda: task_variation(ctx, pool),
            "isotropy": lambda: task_isotropy(ctx),
        })
        for name in ("analyze", "invariance", "willmore", "variation", "isotropy"):
            if name not in cfg.tasks:
                continue
            t0 = time.perf_counter()
            section = Report()
            if ctx.data is None and name != "analyze":
                section.add("status", "skipped")
                section.add("reason", "non-regular surface")
            else:
                try:
                    sub, bad = tasks[name]()
                    section.add("status", "failed" if bad else "ok")
                    if bad:
                        section.add("first_failure", bad[0])
                        failures.append(f"{name}.{bad[0]}")
                    section.extend(sub)
                except (ConfGeomError, ArithmeticError, ValueError) as exc:
                    section = Report()
                    section.add("status", "error")
                    section.add("error", f"{type(exc).__name__}: {exc}")
                    failures.append(f"{name}: {type(exc).__name__}")
            rep.extend(section, f"task.{name}")
            timings.append((name, time.perf_counter() - t0))

    rep.add("warnings.count", len(warnings))
    for i, w in enumerate(warnings):
        rep.add(f"warnings.{i}", w)
    rep.add("status", "failed" if failures else "ok")
    return RunResult(rep, _fields(ctx), timings, failures, warnings)
