"""Conformal isotropy test and the three-case classification via c = N + lambda Y."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .calculus import Calculus
from .conformal import CanonicalLift, ConformalTensors, conformal_data
from .errors import NonRegular
from .isometric import isometric_data
from .jets import Field, einsum
from .spaceforms import Immersion

JETS_REL_THRESHOLD = 1e-4
FD_FACTOR = 10.0


class Verdict(enum.Enum):
    NOT_ISOTROPIC = "NOT_ISOTROPIC"
    FLAT_CASE = "FLAT_CASE"
    SPHERE_CASE = "SPHERE_CASE"
    HYPERBOLIC_CASE = "HYPERBOLIC_CASE"


@dataclass
class Thresholds:
    dev_A: float
    dev_C: float
    lambda_stddev: float
    c_variation: float
    y_dot_c: float = 1e-6

    @classmethod
    def default(cls, calc: Calculus, scale: float = 1.0, **overrides):
        """1e-4 x scale for analytic jets, 10 h^(order-2) x scale for stencils."""
        if calc.backend == "jets":
            base = JETS_REL_THRESHOLD
        else:
            h = max(ax.spacing for ax in calc.grid.axes)
            base = FD_FACTOR * h ** (calc.stencil.order - 2)
        t = base * max(scale, 1.0)
        values = dict(dev_A=t, dev_C=t, lambda_stddev=t, c_variation=t)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class IsotropyReport:
    lambda_field: Field | None
    lambda_mean: float
    lambda_stddev: float
    dev_A: float
    dev_C: float
    c_field: np.ndarray | None
    c_mean: np.ndarray | None
    c_variation: float
    c_norm2: float
    verdict: Verdict | None
    thresholds: Thresholds | None = None
    y_dot_c: float = float("nan")
    c_norm2_minus_2lambda: float = float("nan")
    kappa_variation: float = float("nan")
    tol_band: float = float("nan")
    band_limited: bool = False
    diagnostics: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def fit_lambda(ct: ConformalTensors) -> Field:
    """Least-squares lambda for A + lambda g = 0, i.e. -tr_g(A)/m."""
    m = ct.g.comp_shape[0]
    return einsum("ij,ij->", ct.g_inv, ct.A) * (-1.0 / m)


def _orthonormal_basis(g: np.ndarray) -> np.ndarray:
    """Columns form a g-orthonormal basis (up to sign) at every node."""
    w, V = np.linalg.eigh(g)
    return V / np.sqrt(np.abs(w))[..., None, :]


def isotropy_deviations(ct: ConformalTensors, lam: Field, region: np.ndarray | None = None):
    """Sup-norms of A + lambda g and C, componentwise in a g-orthonormal frame."""
    mask = ct.valid & lam.valid
    if region is not None:
        mask = mask & region
    E = _orthonormal_basis(ct.g.value[mask])
    R = ct.A.value[mask] + lam.value[mask][:, None, None] * ct.g.value[mask]
    dev_A = np.einsum("nia,nij,njb->nab", E, R, E)
    dev_C = np.einsum("nri,nia->nra", ct.C.value[mask], E)
    return float(np.max(np.abs(dev_A))), float(np.max(np.abs(dev_C))) if dev_C.size else 0.0


def conserved_vector(frame: CanonicalLift, lam: Field, region: np.ndarray | None = None):
    """c = N + lambda Y per node, its mean and the largest node deviation from it."""
    c = frame.N + frame.Y * lam
    mask = c.valid if region is None else c.valid & region
    vals = c.value[mask]
    c_mean = vals.mean(axis=0)
    c_var = float(np.max(np.abs(vals - c_mean)))
    return c, c_mean, c_var


def classify(c_norm2: float, tol_band: float) -> Verdict:
    if abs(c_norm2) <= tol_band:
        return Verdict.FLAT_CASE
    return Verdict.SPHERE_CASE if c_norm2 < 0 else Verdict.HYPERBOLIC_CASE


def _field_scale(ct: ConformalTensors, mask: np.ndarray) -> float:
    E = _orthonormal_basis(ct.g.value[mask])
    A = np.einsum("nia,nij,njb->nab", E, ct.A.value[mask], E)
    return float(np.max(np.abs(A)))


def isotropy_from(ct: ConformalTensors, frame: CanonicalLift, calc: Calculus,
                  region: np.ndarray | None = None, **overrides) -> IsotropyReport:
    """Classify from precomputed tensors and frame."""
    lam = fit_lambda(ct)
    mask = ct.valid & lam.valid
    if region is not None:
        mask = mask & region
    lv = lam.value[mask]
    th = Thresholds.default(calc, _field_scale(ct, mask), **overrides)
    dev_A, dev_C = isotropy_deviations(ct, lam, mask)
    c, c_mean, c_var = conserved_vector(frame, lam, mask)
    diag = np.asarray(frame.diag, dtype=float)
    c_norm2 = float(np.sum(c_mean * c_mean * diag))
    y_dot_c = np.sum(frame.Y.value[mask] * c.value[mask] * diag, axis=-1)
    kappa = ct.kappa_conf.value[mask]
    report = IsotropyReport(
        lambda_field=lam, lambda_mean=float(lv.mean()), lambda_stddev=float(lv.std()),
        dev_A=dev_A, dev_C=dev_C, c_field=c.value, c_mean=c_mean, c_variation=c_var,
        c_norm2=c_norm2, verdict=None, thresholds=th,
        y_dot_c=float(np.max(np.abs(y_dot_c - 1.0))),
        c_norm2_minus_2lambda=abs(c_norm2 - 2.0 * float(lv.mean())),
        kappa_variation=float(np.max(kappa) - np.min(kappa)))
    failed = [name for name in ("dev_A", "dev_C", "lambda_stddev", "c_variation")
              if not getattr(report, name) <= getattr(th, name)]
    for name in failed:
        report.diagnostics.append(
            f"{name} = {getattr(report, name):.3e} exceeds threshold {getattr(th, name):.3e}")
    if report.y_dot_c > th.y_dot_c:
        report.diagnostics.append(f"<Y, c> - 1 = {report.y_dot_c:.3e} exceeds {th.y_dot_c:.1e}")
    if failed:
        report.verdict = Verdict.NOT_ISOTROPIC
        return report
    band = c_var * float(np.linalg.norm(c_mean))
    band = max(band, 64.0 * np.finfo(float).eps * max(float(np.sum(c_mean * c_mean)), 1.0))
    report.tol_band = band
    report.verdict = classify(c_norm2, band)
    report.band_limited = report.verdict is Verdict.FLAT_CASE
    return report


def isotropy(immersion: Immersion, calc: Calculus, region: np.ndarray | None = None,
             **overrides) -> IsotropyReport:
    """Full pipeline; a non-regular surface gives a warning and no verdict."""
    try:
        cd = conformal_data(isometric_data(immersion, calc), calc)
    except NonRegular as exc:
        nan = float("nan")
        return IsotropyReport(None, nan, nan, nan, nan, None, None, nan, nan, None,
                              warnings=[f"non-regular: {exc}"])
    report = isotropy_from(cd.tensors, cd.frame, calc, region, **overrides)
    report.warnings.extend(cd.frame.warnings)
    return report
