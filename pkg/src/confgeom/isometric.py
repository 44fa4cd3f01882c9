"""Classical submanifold geometry of an immersion into a space form."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .calculus import (BundleConnection, Calculus, covariant_derivative, curvature,
                       laplace_beltrami, levi_civita, metric_inverse)
from .errors import NullPivot
from .jets import Field, einsum, pair, stack
from .spaceforms import Immersion, Kind, SpaceForm

SEAM_THRESHOLD = 0.5
GLOBAL_PIVOT_FLOOR = 0.05


@dataclass
class TangentFrame:
    u: Field            # position, comp (d,)
    du: Field           # du[i, a] = d_i u^a
    I: Field            # induced metric I_ij
    I_inv: Field
    conn: BundleConnection
    spaceform: SpaceForm
    calc: Calculus

    @property
    def diag(self) -> np.ndarray:
        return self.spaceform.ambient_signature.diag


@dataclass
class NormalFrame:
    e: Field            # e[alpha, a]
    signs: np.ndarray   # <e_alpha, e_alpha>
    theta: Field        # theta[alpha, beta, j]: coefficient of e_beta in d e_alpha(d_j)
    seam_mask: np.ndarray
    pivoting: str       # "global" or "per-node"

    @property
    def rank(self) -> int:
        return len(self.signs)


@dataclass
class SecondFundamental:
    h: Field            # h[alpha, i, j]
    H: Field            # H^alpha
    H_low: Field        # H_alpha
    norm2_II: Field
    norm2_H: Field
    u_ij: Field         # u_{i,j} with the curved-ambient correction, comp (m, m, d)


def tangent_frame(immersion: Immersion, calc: Calculus) -> TangentFrame:
    u = immersion.field(calc)
    du = calc.gradient(u).transpose(1, 0)
    diag = immersion.spaceform.ambient_signature.diag
    I = pair(du, du, diag)
    I_inv = metric_inverse(I)
    conn = levi_civita(I, calc, I_inv)
    return TangentFrame(u, du, I.with_mask(I_inv.mask), I_inv, conn, immersion.spaceform, calc)


def _project_out(w: Field, basis: Field, gram_inv: Field, diag) -> Field:
    """Remove from the vectors ``w[c, a]`` their components along ``basis[i, a]``."""
    coef = pair(w, basis, diag)                       # (c, i)
    coef = einsum("ci,ij->cj", coef, gram_inv)
    return w - einsum("cj,ja->ca", coef, basis)


def _pivot_order(q: np.ndarray, valid: np.ndarray, floor: float):
    """Candidate index whose |<w,w>| stays above ``floor`` at every valid node, else None.

    Seeds are unit coordinate axes, so ``floor`` is an absolute conditioning bound.
    """
    worst = np.where(valid[..., None], np.abs(q), np.inf).min(axis=tuple(range(q.ndim - 1)))
    k = int(np.argmax(worst))
    return k if worst[k] > floor else None


def _best_match(cand: np.ndarray, ref: np.ndarray, perms, sgn):
    """Per-node permutation and signs of ``cand`` closest to ``ref`` (both (..., r, d))."""
    best = np.full(cand.shape[:-2], np.inf)
    perm = np.zeros(cand.shape[:-2] + (cand.shape[-2],), dtype=int)
    sign = np.ones(cand.shape[:-2] + (cand.shape[-2],))
    for p in perms:
        c = cand[..., p, :]
        for s in sgn:
            d = np.sum((s[:, None] * c - ref) ** 2, axis=(-2, -1))
            better = d < best
            best = np.where(better, d, best)
            perm[better] = p
            sign[better] = s
    return perm, sign


def _align_frames(vals: np.ndarray, valid: np.ndarray):
    """Sweep choosing per-node permutation and signs closest to the previous node.

    Slices along the last grid axis are aligned one after another (vectorised
    within a slice); the first slice is aligned recursively.  ``vals`` has shape
    (*grid, r, d); returns (perm, signs) of shape (*grid, r).
    """
    grid = vals.shape[:-2]
    r = vals.shape[-2]
    perms = [np.array(p) for p in itertools.permutations(range(r))]
    sgn = [np.array(s) for s in itertools.product([1.0, -1.0], repeat=r)]
    perm = np.broadcast_to(np.arange(r), grid + (r,)).copy()
    sign = np.ones(grid + (r,))
    aligned = vals.copy()
    if len(grid) > 1:
        p0, s0 = _align_frames(vals[..., 0, :, :], valid[..., 0])
        perm[..., 0, :], sign[..., 0, :] = p0, s0
        aligned[..., 0, :, :] = s0[..., None] * np.take_along_axis(vals[..., 0, :, :], p0[..., None], -2)
    for j in range(1, grid[-1]):
        p, s = _best_match(vals[..., j, :, :], aligned[..., j - 1, :, :], perms, sgn)
        keep = ~(valid[..., j] & valid[..., j - 1])
        p[keep] = np.arange(r)
        s[keep] = 1.0
        perm[..., j, :], sign[..., j, :] = p, s
        aligned[..., j, :, :] = s[..., None] * np.take_along_axis(vals[..., j, :, :], p[..., None], -2)
    return perm, sign


def _seams(vals: np.ndarray, valid: np.ndarray, periodic) -> np.ndarray:
    """Nodes whose frame jumps to a grid neighbour by more than the seam threshold.

    Jumps are relative to the Euclidean size of the frames, which for time-like
    vectors can be far above one.
    """
    seam = np.zeros(vals.shape[:-2], dtype=bool)
    size = np.sqrt(np.sum(vals ** 2, axis=(-2, -1)))
    for ax, per in enumerate(periodic):
        nxt = np.roll(vals, -1, axis=ax)
        ok = valid & np.roll(valid, -1, axis=ax)
        scale = np.maximum(size, np.roll(size, -1, axis=ax))
        jump = np.sqrt(np.sum((nxt - vals) ** 2, axis=(-2, -1))) > SEAM_THRESHOLD * scale
        jump &= ok
        if not per:
            idx = [slice(None)] * seam.ndim
            idx[ax] = -1
            jump[tuple(idx)] = False
        seam |= jump | np.roll(jump, 1, axis=ax)
    return seam


def pivoted_frame(w: Field, r: int, diag, valid: np.ndarray, tol: float = 1e-10):
    """Orthonormalise ``r`` vectors picked from the candidates ``w[c, a]``.

    A candidate that stays well away from the light cone at every node is pivoted
    globally, which keeps the frame smooth; otherwise pivots are chosen per node
    and the result is aligned by a neighbour sweep, with jumps masked as seams.
    Returns ``(frame, signs, valid, seam, per_node)``.
    """
    calc = w.calc
    if r == 0:
        raise NullPivot("no complementary directions to orthonormalise")
    vecs, signs_nodes, per_node = [], [], False
    for _ in range(r):
        q = np.einsum("...ca,...ca,a->...c", w.value, w.value, diag)
        euclid = np.einsum("...ca,...ca->...c", w.value, w.value)
        k = _pivot_order(q, valid, GLOBAL_PIVOT_FLOOR)
        if k is None:
            per_node = True
            score = np.where(np.abs(q) > tol * euclid, np.abs(q), -1.0)
            idx = np.argmax(score, axis=-1)
            bad = np.take_along_axis(score, idx[..., None], -1)[..., 0] < 0
            valid = valid & ~bad
            v = w.take(idx, axis=0)
        else:
            v = w[k]
        qv = pair(v, v, diag)
        s = np.sign(qv.value)
        s[s == 0] = 1.0
        e = v * qv.abs().power(-0.5)
        vecs.append(e)
        signs_nodes.append(s)
        w = w - einsum("c,a->ca", pair(w, e, diag) * s[..., None], e)
    e = stack(vecs, axis=0)
    sign_arr = np.stack(signs_nodes, axis=-1)
    if per_node:
        perm, flip = _align_frames(e.value, valid)
        e = stack([e.take(perm[..., k], axis=0) for k in range(r)], axis=0) * flip[..., None]
        sign_arr = np.take_along_axis(sign_arr, perm, axis=-1)
    ref = sign_arr[valid]
    signs = ref[0] if len(ref) else np.ones(r)
    valid = valid & ~np.any(sign_arr != signs, axis=-1)
    seam = np.zeros_like(valid)
    if per_node:
        seam = _seams(e.value, valid, [ax.periodic for ax in calc.grid.axes])
    return e.with_mask(valid & ~seam), signs, valid, seam, per_node


def normal_frame(immersion: Immersion, tf: TangentFrame, tol: float = 1e-10) -> NormalFrame:
    """Orthonormal frame of the normal bundle by pivoted Gram-Schmidt on ambient axes."""
    calc = tf.calc
    sf = immersion.spaceform
    diag = sf.ambient_signature.diag
    d = len(diag)
    basis = tf.du
    if sf.kind is not Kind.FLAT:
        basis = stack([tf.du[i] for i in range(tf.du.comp_shape[0])] + [tf.u], axis=0)
    gram_inv = metric_inverse(pair(basis, basis, diag))
    w = _project_out(calc.constant(np.eye(d), tf.u.order), basis, gram_inv, diag)
    valid = tf.I_inv.valid & gram_inv.valid
    e, signs, valid, seam, per_node = pivoted_frame(w, d - basis.comp_shape[0], diag, valid, tol)
    de = calc.gradient(e).transpose(0, 2, 1)             # (alpha, j, a)
    theta = pair(de, e, diag).transpose(0, 2, 1) * signs[None, :, None]
    return NormalFrame(e, signs, theta, seam, "per-node" if per_node else "global")


def second_fundamental(immersion: Immersion, tf: TangentFrame, nf: NormalFrame,
                       calc: Calculus) -> SecondFundamental:
    diag = tf.diag
    ddu = calc.gradient(tf.du)                           # (i, a, j)
    u_ij = ddu.transpose(0, 2, 1) - einsum("kij,ka->ija", tf.conn.gamma, tf.du)
    eps = tf.spaceform.epsilon
    if eps != 0:
        u_ij = u_ij + einsum("ij,a->ija", tf.I, tf.u) * float(eps)
    h = pair(nf.e, u_ij, diag) * nf.signs[:, None, None]   # (alpha, i, j)
    m = tf.I.comp_shape[0]
    H = einsum("aij,ij->a", h, tf.I_inv) * (1.0 / m)
    H_low = H * nf.signs
    norm2_II = einsum("aij,akl,ik,jl->", h * nf.signs[:, None, None], h, tf.I_inv, tf.I_inv)
    norm2_H = einsum("a,a->", H_low, H)
    return SecondFundamental(h, H, H_low, norm2_II, norm2_H, u_ij)


def mean_curvature_vector(nf: NormalFrame, sf: SecondFundamental) -> Field:
    """Ambient realisation H^alpha e_alpha."""
    return einsum("a,ab->b", sf.H, nf.e)


def scalar_curvature_checked(tf: TangentFrame, sf: SecondFundamental, spaceform: SpaceForm,
                             calc: Calculus | None = None, band: int | None = None):
    """Normalised scalar curvature intrinsically and by the Gauss formula.

    Returns ``(kappa, kappa_gauss, residual)`` with the residual taken over valid
    nodes away from the boundary band.
    """
    calc = calc or tf.calc
    m = calc.m
    if m < 2:
        raise ValueError("scalar curvature needs m >= 2")
    curv = curvature(tf.I, tf.conn, calc)
    kappa = curv.kappa
    kappa_gauss = (sf.norm2_H * float(m * m) - sf.norm2_II) * (1.0 / (m * (m - 1))) \
        + float(spaceform.epsilon)
    band = calc.default_band() if band is None else band
    region = calc.interior(band) & kappa.valid & kappa_gauss.valid
    diff = np.abs(kappa.value - kappa_gauss.value)[region]
    residual = float(diff.max()) if diff.size else float("nan")
    return kappa, kappa_gauss, residual


def normal_derivatives(nf: NormalFrame, sf: SecondFundamental, calc: Calculus):
    """Normal connection and the normal-bundle covariant derivative ``H^alpha_{,i}``."""
    conn = BundleConnection(gamma=None, normal=nf.theta)
    H_cov = covariant_derivative(sf.H, ["normal"], conn, calc)
    return nf.theta, H_cov


def laplacian_position(tf: TangentFrame) -> Field:
    """Componentwise Laplace-Beltrami of the position vector."""
    return laplace_beltrami(tf.u, tf.I_inv, tf.conn, tf.calc)


@dataclass
class IsometricData:
    immersion: Immersion
    calc: Calculus
    tangent: TangentFrame
    normal: NormalFrame
    second: SecondFundamental
    H_cov: Field


def isometric_data(immersion: Immersion, calc: Calculus) -> IsometricData:
    tf = tangent_frame(immersion, calc)
    nf = normal_frame(immersion, tf)
    sf = second_fundamental(immersion, tf, nf, calc)
    _, H_cov = normal_derivatives(nf, sf, calc)
    return IsometricData(immersion, calc, tf, nf, sf, H_cov)
