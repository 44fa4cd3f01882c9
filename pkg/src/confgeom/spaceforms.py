"""Pseudo-Riemannian space forms, light-cone lifts and the conformal group action."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import Calculus, ParamGrid
from .errors import InvalidParameter, PointAtInfinity, SignatureMismatch
from .indefinite import PseudoOrthogonalMap, Signature
from .jets import Field, einsum, pair, stack


class Kind(enum.Enum):
    FLAT = "FLAT"
    SPHERE = "SPHERE"
    HYPERBOLIC = "HYPERBOLIC"


@dataclass(frozen=True)
class SpaceForm:
    kind: Kind
    n: int
    p: int = 0

    def __post_init__(self):
        if not 0 <= self.p <= self.n:
            raise InvalidParameter(f"index p={self.p} outside [0, {self.n}]")

    @property
    def epsilon(self) -> int:
        return {Kind.FLAT: 0, Kind.SPHERE: 1, Kind.HYPERBOLIC: -1}[self.kind]

    @property
    def ambient_signature(self) -> Signature:
        n, p = self.n, self.p
        if self.kind is Kind.FLAT:
            return Signature(n - p, p)
        if self.kind is Kind.SPHERE:
            return Signature(n - p + 1, p)
        return Signature(n - p, p + 1)

    @property
    def lift_signature(self) -> Signature:
        return Signature(self.n - self.p + 1, self.p + 1)

    @property
    def ambient_dim(self) -> int:
        return self.ambient_signature.dim

    def __str__(self):
        return f"{self.kind.value}(n={self.n}, p={self.p})"


@dataclass
class Immersion:
    """A parametrised patch ``u : grid -> space form``.

    Either ``evaluator`` (closed form, called with coordinate fields) or a
    precomputed ``values`` field must be given.
    """

    spaceform: SpaceForm
    grid: ParamGrid
    evaluator: Callable | None = None
    values: Field | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.grid.m

    def field(self, calc: Calculus) -> Field:
        if self.values is not None:
            if self.values.calc is not calc:
                raise ValueError("precomputed immersion is bound to a different calculus")
            return self.values
        comps = self.evaluator(calc.coordinates())
        comps = [c if isinstance(c, Field) else calc.constant(np.broadcast_to(c, calc.grid.shape))
                 for c in comps]
        return stack(comps, axis=0)

    def membership_residual(self, calc: Calculus) -> float:
        """max |<u,u> - epsilon| for curved space forms, 0 for flat ones."""
        if self.spaceform.kind is Kind.FLAT:
            return 0.0
        u = self.field(calc).value
        q = np.sum(u * u * self.spaceform.ambient_signature.diag, axis=-1)
        return float(np.max(np.abs(q - self.spaceform.epsilon)))


@dataclass
class LightConeLift:
    values: Field
    signature: Signature

    def null_residual(self) -> float:
        y = self.values.value
        q = np.sum(y * y * self.signature.diag, axis=-1)
        return float(np.max(np.abs(q[self.values.valid])))


def lift_field(u: Field, spaceform: SpaceForm) -> Field:
    """Light-cone lift of a space-form valued field (sigma, sigma_+, sigma_-)."""
    kind = spaceform.kind
    one = u[0] * 0.0 + 1.0
    if kind is Kind.FLAT:
        q = pair(u, u, spaceform.ambient_signature.diag)
        parts = [(q - 1.0) * 0.5] + [u[a] for a in range(u.comp_shape[0])] + [(q + 1.0) * 0.5]
    elif kind is Kind.SPHERE:
        parts = [u[a] for a in range(u.comp_shape[0])] + [one]
    else:
        parts = [one] + [u[a] for a in range(u.comp_shape[0])]
    return stack(parts, axis=0)


def lift(immersion: Immersion, calc: Calculus) -> LightConeLift:
    return LightConeLift(lift_field(immersion.field(calc), immersion.spaceform),
                         immersion.spaceform.lift_signature)


def lift_vector_field(e: Field, u: Field, spaceform: SpaceForm) -> Field:
    """Extend ambient vectors of the space form to R^{n+2}_{p+1}.

    For the flat chart this is ``(0, e, 0) + <u, e> (1, 0, 1)``; for the curved
    charts the vector is included with a zero in the extra slot.  Works on
    fields with any leading component axes; the last axis is the ambient one.
    """
    kind = spaceform.kind
    d = e.comp_shape[-1]
    cols = [e[..., a] for a in range(d)]
    if kind is Kind.FLAT:
        ue = pair(e, u, spaceform.ambient_signature.diag)
        parts = [ue] + cols + [ue]
    elif kind is Kind.SPHERE:
        parts = cols + [cols[0] * 0.0]
    else:
        parts = [cols[0] * 0.0] + cols
    return stack(parts, axis=e.ncomp - 1)


def apply_conformal(T: PseudoOrthogonalMap, lift_: LightConeLift) -> LightConeLift:
    if T.signature != lift_.signature:
        raise SignatureMismatch(f"map signature {T.signature} vs lift {lift_.signature}")
    return LightConeLift(einsum("a,ab->b", lift_.values, T.matrix), lift_.signature)


def rescale_lift(lift_: LightConeLift, log_factor: Field) -> LightConeLift:
    """y -> exp(lambda) y, another lift of the same submanifold."""
    return LightConeLift(lift_.values * log_factor.exp(), lift_.signature)


def dehomogenize(lift_: LightConeLift, target: SpaceForm, tol: float = 1e-10) -> Immersion:
    """Representative in the chart of ``target``; raises on chart-excluded nodes."""
    if target.lift_signature != lift_.signature:
        raise SignatureMismatch(f"target {target} does not match lift signature {lift_.signature}")
    y = lift_.values
    yv = y.value
    scale_ref = np.max(np.abs(yv), axis=-1)
    if target.kind is Kind.FLAT:
        denom = y[-1] - y[0]
        body = lambda inv: stack([y[a] * inv for a in range(1, yv.shape[-1] - 1)], axis=0)
    elif target.kind is Kind.SPHERE:
        denom = y[-1]
        body = lambda inv: stack([y[a] * inv for a in range(yv.shape[-1] - 1)], axis=0)
    else:
        denom = y[0]
        body = lambda inv: stack([y[a] * inv for a in range(1, yv.shape[-1])], axis=0)
    bad = np.abs(denom.value) <= tol * scale_ref
    bad &= y.valid
    if bad.any():
        nodes = [tuple(int(i) for i in ix) for ix in np.argwhere(bad)]
        raise PointAtInfinity(f"{len(nodes)} nodes on the excluded hyperplane of {target}", nodes)
    u = body(denom.reciprocal())
    return Immersion(target, y.calc.grid, values=u, name="dehomogenized")
