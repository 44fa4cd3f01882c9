"""Conformal volume, Willmore residuals and a numerical first-variation check."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .calculus import Calculus, covariant_derivative, integrate
from .conformal import ConformalData, ConformalTensors, conformal_data, conformal_factor
from .errors import BumpSupportError, MaskedIntegrationDomain, StencilOrderError
from .isometric import (IsometricData, isometric_data, normal_frame, second_fundamental,
                        tangent_frame)
from .jets import Field, einsum, pair
from .spaceforms import Immersion, Kind, lift


class Form(enum.Enum):
    """EQ_4_10 is the fourth-order form in B, EQ_4_11 the divergence form in C."""

    EQ_4_10 = "EQ_4_10"
    EQ_4_11 = "EQ_4_11"


@dataclass
class WillmoreResidual:
    E: Field                    # E[alpha], normal index lowered
    L2: float
    Linf: float
    form_used: Form


@dataclass
class BumpSpec:
    """Smooth compactly supported profile times a unit combination of normals."""

    center: tuple
    radius: tuple
    weights: tuple = (1.0,)
    power: int = 8

    @classmethod
    def random(cls, calc: Calculus, rank: int, seed: int, margin: int | None = None):
        """Seeded bump whose support stays ``margin`` nodes clear of non-periodic edges."""
        rng = np.random.default_rng(seed)
        margin = max(calc.default_band(), 2) if margin is None else margin
        center, radius = [], []
        for ax in calc.grid.axes:
            span = ax.hi - ax.lo
            if ax.periodic:
                rad = rng.uniform(0.15, 0.3) * span
                c = ax.lo + rng.uniform(0.0, 1.0) * span
            else:
                room = 0.5 * span - (margin + 1) * ax.spacing
                rad = rng.uniform(0.3, 0.6) * room
                c = 0.5 * (ax.lo + ax.hi) + rng.uniform(-1.0, 1.0) * (room - rad)
            center.append(float(c))
            radius.append(float(rad))
        w = rng.normal(size=rank)
        w = w / np.linalg.norm(w)
        return cls(tuple(center), tuple(radius), tuple(float(x) for x in w))

    def rho2(self, calc: Calculus) -> Field:
        out = None
        for k, (X, ax) in enumerate(zip(calc.coordinates(), calc.grid.axes)):
            d = X - self.center[k]
            if ax.periodic:
                span = ax.hi - ax.lo
                shift = np.round(d.value / span) * span
                d = d - shift
            term = d * d * (1.0 / self.radius[k] ** 2)
            out = term if out is None else out + term
        return out

    def profile(self, calc: Calculus) -> Field:
        """(1 - rho^2)^power inside the support, identically zero outside.

        ``power = 0`` selects the C-infinity bump exp(1 - 1/(1 - rho^2)), whose
        steep flanks need much finer grids for the same quadrature accuracy.
        """
        r2 = self.rho2(calc)
        inside = r2.value < 1.0
        data = r2.data.copy()
        data[:, ~inside] = 0.0
        q = 1.0 - Field(data, r2.space, calc)
        if self.power:
            phi = q
            for _ in range(self.power - 1):
                phi = phi * q
        else:
            phi = (1.0 - q.reciprocal()).exp()
        phi.data[:, ~inside] = 0.0
        return phi

    def support(self, calc: Calculus) -> np.ndarray:
        return self.rho2(calc).value < 1.0

    def describe(self) -> dict:
        return {"center": list(self.center), "radius": list(self.radius),
                "weights": list(self.weights),
                "profile": (f"(1 - rho^2)^{self.power}" if self.power else "exp(1 - 1/(1 - rho^2))")
                + ", rho^2 = sum ((s_k - c_k)/r_k)^2"}


@dataclass
class VariationReport:
    fd_derivative: float
    formula_value: float
    abs_error: float
    rel_error: float
    bump: dict
    t_step: float
    W0: float
    fd_raw: float = float("nan")
    noise_floor: float = float("nan")
    details: dict = field(default_factory=dict)


def _region(ct: ConformalTensors, calc: Calculus, band: int | None = None) -> np.ndarray:
    band = calc.default_band() if band is None else band
    return calc.interior(band) & ct.valid


def conformal_volume(ct: ConformalTensors, calc: Calculus, region: np.ndarray | None = None) -> float:
    """Volume of the conformal metric over ``region`` (default: all unmasked nodes)."""
    region = ct.g.valid if region is None else region
    one = calc.samples(np.ones(calc.grid.shape))
    return integrate(one, ct.g, calc, region)


def _lower(Eup: Field, signs) -> Field:
    return Eup * np.asarray(signs, dtype=float)


def _summarise(E: Field, ct: ConformalTensors, calc: Calculus, form: Form,
               region: np.ndarray | None) -> WillmoreResidual:
    region = _region(ct, calc) if region is None else region & E.valid
    if not region.any():
        return WillmoreResidual(E, float("nan"), float("nan"), form)
    sq = np.sum(E.value ** 2, axis=-1)
    Linf = float(np.sqrt(sq[region].max()))
    dens = calc.samples(sq)
    L2 = float(np.sqrt(abs(integrate(dens, ct.g, calc, region))))
    return WillmoreResidual(E, L2, Linf, form)


def residual_divergence(ct: ConformalTensors, calc: Calculus) -> Field:
    """g^ij C_{i,j} + g^ik g^jl (R_ij/(m-1) - A_ij) B_kl, normal index lowered."""
    m = calc.m
    gi = ct.g_inv
    dC = covariant_derivative(ct.C, ["normal", "co"], ct.conn, calc)
    div = einsum("ij,aij->a", gi, dC)
    P = ct.R_conf * (1.0 / (m - 1)) - ct.A
    Eup = div + einsum("ik,jl,ij,akl->a", gi, gi, P, ct.B)
    return _lower(Eup, ct.xi_signs)


def residual_fourth_order(ct: ConformalTensors, calc: Calculus) -> Field:
    """g^ik g^jl (B_ij,kl + A_ij B_kl + g_gn g^rq B_ir B^g_qj B^n_kl), lowered."""
    if calc.backend == "fd" and calc.stencil.order < 6:
        raise StencilOrderError("the fourth-order residual form needs order-6 stencils")
    gi, s = ct.g_inv, ct.xi_signs
    dB = covariant_derivative(ct.B, ["normal", "co", "co"], ct.conn, calc)
    ddB = covariant_derivative(dB, ["normal", "co", "co", "co"], ct.conn, calc)
    lap = einsum("ik,jl,aijkl->a", gi, gi, ddB)
    AB = einsum("ik,jl,ij,akl->a", gi, gi, ct.A, ct.B)
    Bs = ct.B * s[:, None, None]
    cubic = einsum("ik,jl,rq,bir,cqj,ckl->b", gi, gi, gi, ct.B, Bs, ct.B)
    return _lower(lap + AB + cubic, s)


def willmore_residual(ct: ConformalTensors, calc: Calculus, form: Form = Form.EQ_4_11,
                      region: np.ndarray | None = None) -> WillmoreResidual:
    form = Form(form)
    E = residual_divergence(ct, calc) if form is Form.EQ_4_11 else residual_fourth_order(ct, calc)
    return _summarise(E, ct, calc, form, region)


def residual_crosscheck(ct: ConformalTensors, calc: Calculus,
                        region: np.ndarray | None = None) -> float:
    """max |E_fourth - (1 - m) E_div| over unmasked nodes.

    Substituting the divergence identity for B turns one form into (1 - m)
    times the other, so the unscaled difference only vanishes on Willmore
    submanifolds.
    """
    m = calc.m
    e10 = residual_fourth_order(ct, calc)
    e11 = residual_divergence(ct, calc)
    region = _region(ct, calc) if region is None else region
    region = region & e10.valid & e11.valid
    if not region.any():
        return float("nan")
    diff = np.abs(e10.value - (1.0 - m) * e11.value)
    return float(diff[region].max())


def richardson(values, ratio: float = 2.0):
    """Observed order and extrapolated limit from a sequence refined by ``ratio``.

    Uses the last three values when available, else assumes the given pair is
    already in the asymptotic regime with the order from the last two.
    """
    v = [float(x) for x in values]
    if len(v) >= 3:
        a, b, c = v[-3:]
        num, den = abs(a - b), abs(b - c)
        p = np.log(num / den) / np.log(ratio) if num > 0 and den > 0 else float("nan")
        if np.isfinite(p) and p > 0:
            return p, c + (c - b) / (ratio ** p - 1.0)
        return p, c
    a, b = v[-2:]
    p = np.log(abs(a) / abs(b)) / np.log(ratio) if a != 0 and b != 0 else float("nan")
    return p, b


# -- first variation -----------------------------------------------------------------

def _perturbed(base: Field, normal: Field, phi: Field, t: float, imm: Immersion) -> Field:
    w = base + normal * (phi * t)
    if imm.spaceform.kind is Kind.FLAT:
        return w
    q = pair(w, w, imm.spaceform.ambient_signature.diag)
    return w * q.abs().power(-0.5)


def _volume_and_lift(imm: Immersion, calc: Calculus, region: np.ndarray):
    """W over ``region`` and the canonical lift values for a low-order pipeline."""
    tf = tangent_frame(imm, calc)
    nf = normal_frame(imm, tf)
    sf = second_fundamental(imm, tf, nf, calc)
    iso = IsometricData(imm, calc, tf, nf, sf, None)
    cf = conformal_factor(iso)
    g = tf.I * (cf.tau * 2.0).exp()
    one = calc.samples(np.ones(calc.grid.shape))
    W = integrate(one, g, calc, region)
    W_coarse = integrate(calc.samples(_coarse_weights(calc)), g, calc, region)
    Y = lift(imm, calc).values * cf.tau.exp()
    return W, Y.value, cf, W_coarse


def _coarse_weights(calc: Calculus) -> np.ndarray:
    """Density turning the trapezoid rule into the rule on every other node (step 2h).

    Differences of two integrals that agree away from an interior support are
    integrated consistently, so comparing both rules estimates the quadrature error.
    """
    w = np.ones(calc.grid.shape)
    for k, n in enumerate(calc.grid.shape):
        wk = np.zeros(n)
        wk[::2] = 2.0
        shape = [1] * calc.m
        shape[k] = n
        w = w * wk.reshape(shape)
    return w


def _normal_direction(imm: Immersion, calc: Calculus, weights) -> Field:
    nf = normal_frame(imm, tangent_frame(imm, calc))
    w = np.zeros(nf.rank)
    k = min(len(weights), nf.rank)
    w[:k] = weights[:k]
    return einsum("ab,a->b", nf.e, w / np.linalg.norm(w))


def first_variation_check(immersion: Immersion, bump: BumpSpec, calc: Calculus,
                          t_step: float | None = None, data: ConformalData | None = None,
                          form: Form = Form.EQ_4_11) -> VariationReport:
    """Compare dW/dt from perturbed volumes with the first-variation integral.

    ``calc`` drives the base pipeline (residual, frame).  The perturbed runs only
    need the conformal metric, so with jets they use a short order-3 expansion.
    """
    m = calc.m
    if data is None:
        data = conformal_data(isometric_data(immersion, calc), calc)
    ct = data.tensors
    support = bump.support(calc)
    margin = max(calc.default_band(), 1)
    if np.any(support & ~calc.interior(margin)):
        raise BumpSupportError("bump support reaches the boundary band")
    if np.any(support & ~ct.valid):
        raise MaskedIntegrationDomain("non-regular or masked nodes inside the bump support")

    lo = Calculus(calc.grid, "jets", 3) if calc.backend == "jets" else calc
    base = immersion.field(lo)
    normal = _normal_direction(immersion, lo, np.asarray(bump.weights))
    phi = bump.profile(lo)
    scale = float(np.max(np.abs(base.value)))
    t_step = 1e-3 * max(scale, 1.0) if t_step is None else float(t_step)

    region = ct.g.valid & lo.interior(0)
    cache = {}

    def run(t):
        if t not in cache:
            vals = _perturbed(base, normal, phi, t, immersion)
            imm_t = Immersion(immersion.spaceform, immersion.grid, values=vals,
                              name=immersion.name)
            cache[t] = _volume_and_lift(imm_t, lo, region)
        return cache[t]

    W0 = run(0.0)[0]
    derivs, coarse, dYs = [], [], []
    for h in (t_step, 0.5 * t_step):
        Wp, Yp, _, Cp = run(h)
        Wm, Ym, _, Cm = run(-h)
        derivs.append((Wp - Wm) / (2 * h))
        coarse.append((Cp - Cm) / (2 * h))
        dYs.append((Yp - Ym) / (2 * h))
    fd = (4.0 * derivs[1] - derivs[0]) / 3.0
    fd_coarse = (4.0 * coarse[1] - coarse[0]) / 3.0
    dY = (4.0 * dYs[1] - dYs[0]) / 3.0

    E = willmore_residual(ct, calc, form).E.value
    frame_xi = data.frame.xi.value
    diag = immersion.spaceform.lift_signature.diag
    v = np.einsum("...a,...ca,a->...c", dY, frame_xi, diag) * ct.xi_signs
    factor = m * m / (m - 1.0)
    if Form(form) is Form.EQ_4_11:
        factor *= (1.0 - m)
    dens = np.where(support, np.sum(v * E, axis=-1), 0.0)
    formula = factor * integrate(calc.samples(dens), ct.g, calc, support)
    formula_coarse = factor * integrate(calc.samples(dens * _coarse_weights(calc)), ct.g, calc,
                                        support)
    noise = abs(fd - fd_coarse) + abs(formula - formula_coarse)
    abs_err = abs(fd - formula)
    rel = abs_err / abs(fd) if fd != 0 else float("inf") if abs_err > 0 else 0.0
    return VariationReport(fd, formula, abs_err, rel, bump.describe(), t_step, W0, derivs[0],
                           noise, {"v_max": float(np.max(np.abs(v[support]))) if support.any() else 0.0})
