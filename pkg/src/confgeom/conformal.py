"""Conformal factor, canonical lift and frame, and the invariant tensors A, B, C.

The conformal metric is ``g = <dY, dY> = e^{2 tau} I`` with ``e^{2 tau} = |f|`` and
``f = m/(m-1) (|II|^2 - m |H|^2)``.  The sign ``sigma = sign(f)`` is kept as data:
it is the sign in ``<Delta Y, Delta Y> = m^2 kappa + sigma`` and in the trace of A.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .calculus import (BundleConnection, Calculus, Curvature, covariant_derivative, curvature,
                       hessian, laplace_beltrami, levi_civita, metric_inverse)
from .errors import NonRegular
from .isometric import IsometricData, pivoted_frame
from .jets import Field, einsum, pair, stack
from .spaceforms import LightConeLift, lift, lift_vector_field

REGULARITY_TOL = 1e-8
MIN_REGULAR_FRACTION = 0.1
XI_WARN_TOL = 1e-6


@dataclass
class ConformalFactor:
    tau: Field
    sigma: np.ndarray           # +1 / -1 per node, 0 where non-regular
    regular_mask: np.ndarray
    f: Field
    regions: int = 0
    region_signs: tuple = ()

    @property
    def fraction_regular(self) -> float:
        return float(np.mean(self.regular_mask))

    @property
    def sign(self) -> int:
        """Common sign over the regular nodes, or 0 when regions disagree."""
        vals = set(self.region_signs)
        return vals.pop() if len(vals) == 1 else 0


@dataclass
class CanonicalLift:
    Y: Field
    Yi: Field                   # Yi[i, a]
    N: Field
    xi: Field                   # xi[alpha, a]
    xi_signs: np.ndarray
    g: Field
    g_inv: Field
    conn: BundleConnection      # Levi-Civita of g, no normal block
    lapY: Field
    diag: np.ndarray
    sigma: np.ndarray
    xi_discrepancy: float = float("nan")
    warnings: list = field(default_factory=list)


@dataclass
class ConformalTensors:
    g: Field
    g_inv: Field
    A: Field                    # A[i, j]
    B: Field                    # B[alpha, i, j]
    C: Field                    # C[alpha, i]
    omega_normal: Field         # omega[alpha, beta, j]
    xi_signs: np.ndarray        # g_alpha_beta = diag(xi_signs)
    conn: BundleConnection      # tangent Levi-Civita of g plus normal connection
    curv: Curvature
    sigma: np.ndarray
    path: str

    @property
    def R_conf(self) -> Field:
        return self.curv.ricci

    @property
    def kappa_conf(self) -> Field:
        return self.curv.kappa

    @property
    def valid(self) -> np.ndarray:
        return self.A.valid & self.B.valid & self.C.valid


def _regions(sigma: np.ndarray, periodic) -> tuple:
    """Connected regular regions of constant sign, glued across periodic edges."""
    out = []
    for s in (1, -1):
        lab, n = ndimage.label(sigma == s)
        if n == 0:
            continue
        parent = list(range(n + 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for ax, per in enumerate(periodic):
            if not per:
                continue
            first = np.take(lab, 0, axis=ax)
            last = np.take(lab, -1, axis=ax)
            for a, b in zip(first.ravel(), last.ravel()):
                if a and b:
                    parent[find(a)] = find(b)
        roots = {find(k) for k in range(1, n + 1)}
        out.extend([s] * len(roots))
    return tuple(out)


def _factor_from(f: Field, scale: np.ndarray, calc: Calculus) -> ConformalFactor:
    regular = np.abs(f.value) > REGULARITY_TOL * scale
    regular &= f.valid
    frac = float(np.mean(regular))
    if frac < MIN_REGULAR_FRACTION:
        raise NonRegular(f"only {100 * frac:.1f}% of nodes are regular", frac)
    sigma = np.where(regular, np.sign(f.value), 0.0)
    safe = f.data.copy()
    safe[0] = np.where(regular, f.value, 1.0)
    fs = Field(safe, f.space, calc, f.mask)
    tau = (fs * np.where(regular, sigma, 1.0)).log() * 0.5
    tau = tau.with_mask(regular)
    regions = _regions(sigma, [ax.periodic for ax in calc.grid.axes])
    return ConformalFactor(tau, sigma, regular, f, len(regions), regions)


def conformal_factor(iso: IsometricData) -> ConformalFactor:
    """``tau`` and ``sigma`` from ``f = m/(m-1) (|II|^2 - m |H|^2)``."""
    m = iso.calc.m
    if m < 2:
        raise ValueError("the conformal factor needs m >= 2")
    sf = iso.second
    II2, H2 = sf.norm2_II, sf.norm2_H
    f = (II2 - H2 * float(m)) * (m / (m - 1.0))
    scale = np.maximum.reduce([np.abs(II2.value), m * np.abs(H2.value), np.ones(II2.value.shape)])
    return _factor_from(f, scale, iso.calc)


def lift_invariant(lift_: LightConeLift, calc: Calculus):
    """``(f, I_y)`` with ``f = <Delta y, Delta y> - m^2 kappa`` for an arbitrary lift.

    Delta and kappa are taken with respect to ``I_y = <dy, dy>``; the conformal
    metric is ``|f| I_y``.
    """
    y = lift_.values
    diag = lift_.signature.diag
    dy = calc.gradient(y).transpose(1, 0)
    Iy = pair(dy, dy, diag)
    Iy_inv = metric_inverse(Iy)
    conn = levi_civita(Iy, calc, Iy_inv)
    lap = laplace_beltrami(y, Iy_inv, conn, calc)
    kappa = curvature(Iy, conn, calc).kappa
    m = calc.m
    f = pair(lap, lap, diag) - kappa * float(m * m)
    return f, Iy.with_mask(Iy_inv.mask)


def conformal_metric_from_lift(lift_: LightConeLift, calc: Calculus) -> Field:
    f, Iy = lift_invariant(lift_, calc)
    return Iy * f.abs()


def factor_from_lift(lift_: LightConeLift, calc: Calculus) -> ConformalFactor:
    f, _ = lift_invariant(lift_, calc)
    scale = np.maximum(np.abs(f.value), 1.0)
    return _factor_from(f, scale, calc)


def _frame_core(y: Field, tau: Field, diag, calc: Calculus):
    Y = y * tau.exp()
    Yi = calc.gradient(Y).transpose(1, 0)
    g = pair(Yi, Yi, diag)
    g_inv = metric_inverse(g)
    conn = levi_civita(g, calc, g_inv)
    lapY = laplace_beltrami(Y, g_inv, conn, calc)
    m = calc.m
    N = lapY * (-1.0 / m) - Y * (pair(lapY, lapY, diag) * (1.0 / (2.0 * m * m)))
    return Y, Yi, g.with_mask(g_inv.mask), g_inv, conn, lapY, N


def _project_frame(zeta: Field, Y, Yi, N, g_inv, diag) -> Field:
    """Remove span{Y, N, Y_i} components from vectors ``zeta[c, a]``."""
    zN = pair(zeta, N, diag)
    zY = pair(zeta, Y, diag)
    zI = einsum("ci,ij->cj", pair(zeta, Yi, diag), g_inv)
    return zeta - einsum("c,a->ca", zN, Y) - einsum("c,a->ca", zY, N) \
        - einsum("cj,ja->ca", zI, Yi)


def _orthonormalise(v: Field, signs, diag) -> Field:
    """Hyperbolic Gram-Schmidt in a fixed order with known signs."""
    out = []
    for a in range(v.comp_shape[0]):
        w = v[a]
        for b, e in enumerate(out):
            w = w - e * (pair(w, e, diag) * float(signs[b]))
        q = pair(w, w, diag)
        out.append(w * q.abs().power(-0.5))
    return stack(out, axis=0)


def canonical_frame(lift_: LightConeLift, cf: ConformalFactor, iso: IsometricData,
                    calc: Calculus) -> CanonicalLift:
    """Canonical frame {Y, N, Y_i, xi_alpha} seeded by the lifted ambient normals."""
    diag = lift_.signature.diag
    y = lift_.values
    Y, Yi, g, g_inv, conn, lapY, N = _frame_core(y, cf.tau, diag, calc)
    nf, sf = iso.normal, iso.second
    zeta = lift_vector_field(nf.e, iso.tangent.u, iso.immersion.spaceform)
    xi = _orthonormalise(_project_frame(zeta, Y, Yi, N, g_inv, diag), nf.signs, diag)
    xi_alg = einsum("c,a->ca", sf.H_low, y) + zeta
    region = xi.valid & xi_alg.valid
    disc = np.abs(xi.value - xi_alg.value)[region]
    disc = float(disc.max()) if disc.size else float("nan")
    notes = []
    if disc > XI_WARN_TOL:
        notes.append(f"algebraic normal frame differs from projected frame by {disc:.3e}")
    return CanonicalLift(Y, Yi, N, xi, nf.signs, g, g_inv, conn, lapY, diag, cf.sigma,
                         disc, notes)


def canonical_frame_from_lift(lift_: LightConeLift, calc: Calculus, cf: ConformalFactor = None):
    """Canonical frame using only the lift; the conformal normals come from ambient axes."""
    diag = lift_.signature.diag
    cf = cf or factor_from_lift(lift_, calc)
    y = lift_.values
    Y, Yi, g, g_inv, conn, lapY, N = _frame_core(y, cf.tau, diag, calc)
    d = len(diag)
    cand = _project_frame(calc.constant(np.eye(d), y.order), Y, Yi, N, g_inv, diag)
    r = d - 2 - calc.m
    xi, signs, valid, seam, _ = pivoted_frame(cand, r, diag, g_inv.valid & cf.regular_mask)
    frame = CanonicalLift(Y, Yi, N, xi, signs, g, g_inv, conn, lapY, diag, cf.sigma)
    return cf, frame


def _tensors(g, g_inv, A, B, C, omega, signs, calc, sigma, path) -> ConformalTensors:
    conn = levi_civita(g, calc, g_inv)
    curv = curvature(g, conn, calc)
    conn = BundleConnection(conn.gamma, omega, g_inv)
    return ConformalTensors(g, g_inv, A, B, C, omega, np.asarray(signs), conn, curv, sigma, path)


def invariants_frame(frame: CanonicalLift, calc: Calculus) -> ConformalTensors:
    """Read A, B, C and the normal connection off the derivatives of the frame."""
    diag = frame.diag
    s = frame.xi_signs
    dYi = calc.gradient(frame.Yi).transpose(0, 2, 1)       # (i, j, a) = d_j Y_i
    A = -pair(dYi, frame.N, diag)
    B = pair(frame.xi, dYi, diag) * s[:, None, None]       # (alpha, i, j)
    dN = calc.gradient(frame.N).transpose(1, 0)            # (i, a)
    C = pair(frame.xi, dN, diag) * s[:, None]              # (alpha, i)
    dxi = calc.gradient(frame.xi).transpose(0, 2, 1)       # (alpha, j, a)
    omega = pair(dxi, frame.xi, diag).transpose(0, 2, 1) * s[None, :, None]
    return _tensors(frame.g, frame.g_inv, A, B, C, omega, s, calc, frame.sigma, "frame")


def invariants_extrinsic(iso: IsometricData, cf: ConformalFactor, calc: Calculus) -> ConformalTensors:
    """A, B, C from the closed forms in terms of tau, h, H and the normal connection."""
    tf, nf, sf = iso.tangent, iso.normal, iso.second
    m = calc.m
    eps = float(iso.immersion.spaceform.epsilon)
    tau = cf.tau
    dtau = calc.gradient(tau)                                  # tau_i
    hess = hessian(tau, tf.conn, calc)                         # tau_{i,j}
    up = einsum("ij,j->i", tf.I_inv, dtau)                     # tau^i
    grad2 = einsum("i,i->", dtau, up)
    # the h.H term enters with a plus sign; with a minus the trace and Gauss
    # identities fail as soon as H is nonzero
    A = einsum("i,j->ij", dtau, dtau) + einsum("aij,a->ij", sf.h, sf.H_low) - hess \
        - tf.I * ((grad2 + sf.norm2_H - eps) * 0.5)
    et = tau.exp()
    B = (sf.h - einsum("a,ij->aij", sf.H, tf.I)) * et
    C = (einsum("a,i->ai", sf.H, dtau) - einsum("aij,j->ai", sf.h, up)
         - iso.H_cov) * (-tau).exp()
    g = tf.I * (tau * 2.0).exp()
    g_inv = metric_inverse(g)
    return _tensors(g.with_mask(g_inv.mask), g_inv, A, B, C, nf.theta, nf.signs, calc,
                    cf.sigma, "extrinsic")


# -- residual suites --------------------------------------------------------------

def _sup(field: Field, region: np.ndarray) -> float:
    v = field.value
    mask = region & field.valid
    if not mask.any():
        return float("nan")
    v = v[mask]
    return float(np.max(np.abs(v))) if v.size else 0.0


def frame_relations(frame: CanonicalLift, region: np.ndarray) -> dict:
    diag = frame.diag
    Y, N, Yi, xi = frame.Y, frame.N, frame.Yi, frame.xi
    r = len(frame.xi_signs)
    out = {
        "YY": pair(Y, Y, diag),
        "NN": pair(N, N, diag),
        "NY_minus_1": pair(N, Y, diag) - 1.0,
        "NYk": pair(Yi, N, diag),
        "YYk": pair(Yi, Y, diag),
        "xiY": pair(xi, Y, diag),
        "xiN": pair(xi, N, diag),
        "xiYk": pair(xi, Yi, diag),
        "xi_gram": pair(xi, xi, diag) - np.diag(frame.xi_signs).reshape(r, r),
    }
    return {k: _sup(v, region) for k, v in out.items()}


def identity_suite(ct: ConformalTensors, frame: CanonicalLift | None, calc: Calculus,
                   region: np.ndarray | None = None) -> dict:
    """Residuals of the trace, Ricci, trace-free, norm and divergence identities."""
    m = calc.m
    region = calc.interior(calc.default_band()) if region is None else region
    region = region & ct.valid
    sig = ct.sigma
    gi, s = ct.g_inv, ct.xi_signs
    Bs = ct.B * s[:, None, None]
    trA = einsum("ij,ij->", gi, ct.A)
    kappa = ct.kappa_conf
    res = {}
    res["trace_A"] = _sup(trA - (kappa * float(m * m) + sig) * (1.0 / (2 * m)), region)
    BB = einsum("aik,kl,alj->ij", Bs, gi, ct.B)
    ricci_rhs = ct.g * trA + ct.A * float(m - 2) - BB
    res["ricci"] = _sup(ct.R_conf - ricci_rhs, region)
    res["trace_free_B"] = _sup(einsum("ij,aij->a", gi, ct.B), region)
    normB = einsum("ij,kl,aik,ajl->", gi, gi, Bs, ct.B)
    res["norm_B"] = _sup(normB - sig * ((m - 1.0) / m), region)
    dB = covariant_derivative(ct.B, ["normal", "co", "co"], ct.conn, calc)
    res["div_B"] = _sup(ct.C * (1.0 - m) - einsum("jk,aijk->ai", gi, dB), region)
    if frame is not None:
        lap2 = pair(frame.lapY, frame.lapY, frame.diag)
        res["lapY_norm"] = _sup(lap2 - kappa * float(m * m) - sig, region)
        res.update({f"frame_{k}": v for k, v in frame_relations(frame, region).items()})
    res["sigma_regions"] = float(len(set(np.unique(sig[region]))))
    return res


def _normal_curvature(omega: Field, calc: Calculus) -> Field:
    """R_a^b_kl for the connection with omega[a, b, j] = coefficient of xi_b in d xi_a."""
    dW = calc.gradient(omega)                          # (a, b, j, k) = d_k omega_a^b(j)
    R = einsum("abik->abki", dW) - dW
    WW = einsum("ack,cbl->abkl", omega, omega)
    return R + WW - einsum("abkl->ablk", WW)


def integrability_suite(ct: ConformalTensors, calc: Calculus,
                        region: np.ndarray | None = None) -> dict:
    """Pointwise residuals of the Codazzi-type, curl, normal-curvature and Gauss identities."""
    region = calc.interior(calc.default_band()) if region is None else region
    region = region & ct.valid
    g, gi, s = ct.g, ct.g_inv, ct.xi_signs
    A, B, C = ct.A, ct.B, ct.C
    Bs = B * s[:, None, None]
    Cs = C * s[:, None]
    dA = covariant_derivative(A, ["co", "co"], ct.conn, calc)          # A_{ij,k}
    lhs = dA - einsum("ijk->ikj", dA)
    rhs = -(einsum("aij,ak->ijk", Bs, C) - einsum("aik,aj->ijk", Bs, C))
    res = {"codazzi_A": _sup(lhs - rhs, region)}
    dB = covariant_derivative(B, ["normal", "co", "co"], ct.conn, calc)
    lhs = dB - einsum("aijk->aikj", dB)
    rhs = einsum("ij,ak->aijk", g, C) - einsum("ik,aj->aijk", g, C)
    res["codazzi_B"] = _sup(lhs - rhs, region)
    dC = covariant_derivative(C, ["normal", "co"], ct.conn, calc)      # C_{i,j}
    lhs = dC - einsum("aij->aji", dC)
    rhs = einsum("kl,aik,lj->aij", gi, B, A) - einsum("kl,ajk,li->aij", gi, B, A)
    res["curl_C"] = _sup(lhs - rhs, region)
    Rn = _normal_curvature(ct.omega_normal, calc)                      # Rn[b, a] = R^a_b
    lhs = einsum("bakl,a->abkl", Rn, s)
    rhs = einsum("kl,cik,dlj->cdij", gi, Bs, Bs)
    rhs = rhs - einsum("cdij->dcij", rhs)
    res["normal_curvature"] = _sup(lhs - rhs, region)
    gauss = einsum("aik,ajl->ijkl", Bs, B) - einsum("ail,ajk->ijkl", Bs, B) \
        + einsum("ik,jl->ijkl", g, A) - einsum("il,jk->ijkl", g, A) \
        + einsum("ik,jl->ijkl", A, g) - einsum("il,jk->ijkl", A, g)
    res["gauss"] = _sup(ct.curv.riemann - gauss, region)
    return res


def compare_tensors(a: ConformalTensors, b: ConformalTensors, region: np.ndarray) -> dict:
    """Max difference of A, B, C between two paths, relative to max(|b|, 1).

    The floor keeps identically vanishing tensors (C on the Clifford torus) from
    turning rounding noise into an O(1) relative error.
    """
    out = {}
    for name in ("A", "B", "C", "g"):
        x, y = getattr(a, name), getattr(b, name)
        mask = region & x.valid & y.valid
        if not mask.any():
            out[name] = float("nan")
            continue
        xv, yv = x.value[mask], y.value[mask]
        scale = max(float(np.max(np.abs(yv))), 1.0)
        out[name] = float(np.max(np.abs(xv - yv))) / scale
    return out


@dataclass
class ConformalData:
    iso: IsometricData
    lift: LightConeLift
    factor: ConformalFactor
    frame: CanonicalLift
    extrinsic: ConformalTensors
    tensors: ConformalTensors


def conformal_data(iso: IsometricData, calc: Calculus) -> ConformalData:
    cf = conformal_factor(iso)
    lift_ = lift(iso.immersion, calc)
    frame = canonical_frame(lift_, cf, iso, calc)
    ext = invariants_extrinsic(iso, cf, calc)
    fr = invariants_frame(frame, calc)
    for note in frame.warnings:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return ConformalData(iso, lift_, cf, frame, ext, fr)
