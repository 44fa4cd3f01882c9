"""Indefinite linear algebra for inner products of arbitrary signature.

All vectors are rows; a group element T acts as ``x -> x @ T``.  Signatures
list the ``+1`` entries first, then the ``-1`` entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateMetric, DimensionMismatch, NullPivot

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class Signature:
    plus: int
    minus: int = 0

    def __post_init__(self):
        if self.plus < 0 or self.minus < 0:
            raise ValueError(f"negative signature counts: {self.plus}, {self.minus}")

    @property
    def dim(self) -> int:
        return self.plus + self.minus

    @property
    def diag(self) -> np.ndarray:
        return np.concatenate([np.ones(self.plus), -np.ones(self.minus)])

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)

    def __str__(self):
        return f"({self.plus},{self.minus})"


def inner(x, y, sig: Signature):
    """Indefinite inner product along the last axis (broadcasts)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != sig.dim or y.shape[-1] != sig.dim:
        raise DimensionMismatch(
            f"vectors of length {x.shape[-1]}, {y.shape[-1]} for signature {sig}")
    return np.sum(x * y * sig.diag, axis=-1)


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    """Symmetric, possibly indefinite, matrix with cached inverse/determinant."""

    entries: np.ndarray
    tol: float = DEGENERACY_TOL

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))

    @cached_property
    def scale(self) -> float:
        return float(np.max(np.linalg.norm(self.entries, axis=1)))

    def is_degenerate(self) -> bool:
        return abs(self.det) <= self.tol * self.scale ** self.dim

    @cached_property
    def inverse(self) -> np.ndarray:
        if self.is_degenerate():
            raise DegenerateMetric(
                f"|det| = {abs(self.det):.3e} below tolerance for scale {self.scale:.3e}")
        return np.linalg.solve(self.entries, np.eye(self.dim))

    @property
    def signs(self) -> tuple[int, int]:
        """Numbers of positive and negative eigenvalues."""
        w = np.linalg.eigvalsh(self.entries)
        return int(np.sum(w > 0)), int(np.sum(w < 0))


def gram(basis, sig: Signature, tol: float = DEGENERACY_TOL) -> MetricMatrix:
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape[-1] != sig.dim:
        raise DimensionMismatch(f"basis vectors of length {basis.shape[-1]}, signature {sig}")
    entries = (basis * sig.diag) @ basis.T
    entries = 0.5 * (entries + entries.T)
    mm = MetricMatrix(entries, tol)
    if mm.is_degenerate():
        raise DegenerateMetric("Gram matrix is degenerate")
    return mm


@dataclass(frozen=True, eq=False)
class PseudoOrthogonalMap:
    matrix: np.ndarray
    signature: Signature
    generator: np.ndarray | None = field(default=None, repr=False)

    @cached_property
    def orthogonality_residual(self) -> float:
        G = self.signature.matrix
        return float(np.max(np.abs(self.matrix.T @ G @ self.matrix - G)))

    def apply(self, x):
        return np.asarray(x) @ self.matrix


def _expm_taylor(M: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(M, 1)
    s = max(0, int(np.ceil(np.log2(norm / 0.25)))) if norm > 0 else 0
    A = M / 2.0 ** s
    result = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, 30):
        term = term @ A / k
        result = result + term
        if np.max(np.abs(term)) < 1e-18:
            break
    for _ in range(s):
        result = result @ result
    return result


def random_pseudo_orthogonal(sig: Signature, seed: int, scale: float = 1.0) -> PseudoOrthogonalMap:
    """Sample an element of O(plus, minus) as the exponential of a random generator.

    The generator is ``M = G S`` with ``S`` antisymmetric, so ``(G M)^T = -G M``.
    It is normalised to spectral norm ``scale`` (at most 1 by default).
    """
    rng = np.random.default_rng(seed)
    d = sig.dim
    S = np.triu(rng.uniform(-1.0, 1.0, size=(d, d)), 1)
    S = S - S.T
    M = sig.diag[:, None] * S
    norm = np.linalg.norm(M, 2)
    if norm > 0:
        M = M * (scale / norm)
    return PseudoOrthogonalMap(_expm_taylor(M), sig, M)


def indefinite_gram_schmidt(vectors, sig: Signature, tol: float = 1e-10):
    """Orthonormalise ``vectors`` w.r.t. ``sig`` with largest-norm pivoting.

    Returns ``(frame, signs)`` with ``inner(frame[a], frame[b]) = signs[a] * delta_ab``.
    """
    remaining = [np.asarray(v, dtype=float).copy() for v in vectors]
    frame, signs = [], []
    while remaining:
        norms = [inner(v, v, sig) for v in remaining]
        ok = [abs(q) > tol * float(v @ v) and float(v @ v) > 0 for q, v in zip(norms, remaining)]
        if not any(ok):
            raise NullPivot("all remaining candidates are null or zero after projection")
        k = max((i for i in range(len(remaining)) if ok[i]), key=lambda i: abs(norms[i]))
        v = remaining.pop(k)
        q = norms[k]
        e = v / np.sqrt(abs(q))
        s = 1.0 if q > 0 else -1.0
        frame.append(e)
        signs.append(s)
        remaining = [w - s * inner(w, e, sig) * e for w in remaining]
    return np.array(frame), np.array(signs)
