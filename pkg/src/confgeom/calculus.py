"""Discrete calculus on parameter grids.

Two derivative backends share one interface:

* ``jets`` -- fields carry Taylor coefficients and differentiation is exact
  coefficient shifting (each derivative lowers the jet order by one);
* ``fd`` -- fields are samples and differentiation uses central stencils of
  order 2, 4 or 6 (one-sided at non-periodic boundaries).

Derivative indices are appended as the last component axis, so the gradient
of a field with components ``(a,)`` has components ``(a, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridTooSmall, MaskedIntegrationDomain, MissingConnection, StencilOrderError
from .indefinite import DEGENERACY_TOL
from .jets import Field, JetSpace, einsum, matinv, stack


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int
    periodic: bool = False

    @property
    def spacing(self) -> float:
        div = self.count if self.periodic else self.count - 1
        return (self.hi - self.lo) / div

    @property
    def coords(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.count)


@dataclass(frozen=True)
class ParamGrid:
    axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        for ax in self.axes:
            if ax.count < 2 or not ax.hi > ax.lo:
                raise GridTooSmall(f"invalid axis {ax}")

    @property
    def m(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(ax.count for ax in self.axes)

    def spacing(self, k: int) -> float:
        return self.axes[k].spacing

    def mesh(self) -> list:
        return np.meshgrid(*[ax.coords for ax in self.axes], indexing="ij")

    def refined(self, factor: float) -> "ParamGrid":
        axes = []
        for ax in self.axes:
            n = int(round(ax.count * factor)) if ax.periodic else int(round((ax.count - 1) * factor)) + 1
            axes.append(Axis(ax.lo, ax.hi, n, ax.periodic))
        return ParamGrid(tuple(axes))


@dataclass(frozen=True)
class StencilConfig:
    order: int = 6
    boundary: str = "one-sided"

    def __post_init__(self):
        if self.order not in (2, 4, 6):
            raise StencilOrderError(f"stencil order must be 2, 4 or 6, got {self.order}")
        if self.boundary not in ("one-sided", "periodic"):
            raise StencilOrderError(f"unknown boundary treatment {self.boundary!r}")

    @property
    def radius(self) -> int:
        return self.order // 2


def stencil_weights(offsets) -> np.ndarray:
    """First-derivative weights on integer ``offsets`` (unit spacing)."""
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    V = np.vander(x, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


@lru_cache(maxsize=None)
def diff_matrix(count: int, spacing: float, periodic: bool, order: int) -> np.ndarray:
    r = order // 2
    if count < 2 * order + 1:
        raise GridTooSmall(f"{count} nodes is too few for order-{order} stencils")
    D = np.zeros((count, count))
    central = stencil_weights(np.arange(-r, r + 1))
    for i in range(count):
        if periodic:
            for o, w in zip(range(-r, r + 1), central):
                D[i, (i + o) % count] += w
        elif r <= i < count - r:
            D[i, i - r:i + r + 1] = central
        else:
            start = 0 if i < r else count - 1 - order
            nodes = np.arange(start, start + order + 1)
            D[i, nodes] = stencil_weights(nodes - i)
    D /= spacing
    D.setflags(write=False)
    return D


class Calculus:
    """Derivative backend bound to a parameter grid."""

    def __init__(self, grid: ParamGrid, backend: str = "jets", jet_order: int = 6,
                 stencil: StencilConfig | None = None):
        if backend not in ("jets", "fd"):
            raise ValueError(f"unknown backend {backend!r}")
        self.grid = grid
        self.backend = backend
        self.stencil = stencil or StencilConfig()
        self.jet_order = jet_order if backend == "jets" else 0
        if backend == "fd":
            for ax in grid.axes:
                if ax.count < 2 * self.stencil.order + 1:
                    raise GridTooSmall(
                        f"axis with {ax.count} nodes too small for order-{self.stencil.order} stencils")

    @property
    def m(self) -> int:
        return self.grid.m

    def space(self, order: int | None = None) -> JetSpace:
        return JetSpace.get(self.m, self.jet_order if order is None else order)

    def coordinates(self) -> list:
        """Coordinate functions as fields (exact linear jets for the jets backend)."""
        sp = self.space()
        out = []
        for k, X in enumerate(self.grid.mesh()):
            data = np.zeros((sp.size,) + X.shape)
            data[0] = X
            if sp.order >= 1:
                data[sp.unit(k)] = 1.0
            out.append(Field(data, sp, self))
        return out

    def samples(self, values, mask=None) -> Field:
        """Wrap per-node values (grid shape first) as an order-0 field."""
        values = np.asarray(values, dtype=float)
        return Field(values[None], self.space(0), self, mask)

    def constant(self, value, order: int | None = None) -> Field:
        value = np.asarray(value, dtype=float)
        sp = self.space(order)
        data = np.zeros((sp.size,) + self.grid.shape + value.shape)
        data[0] = value
        return Field(data, sp, self)

    def partial(self, f: Field, axis: int) -> Field:
        if axis >= self.m:
            raise IndexError(f"axis {axis} out of range for m={self.m}")
        if self.backend == "jets":
            if f.order == 0:
                raise StencilOrderError("jet order exhausted; raise jet_order")
            sp, src, fac = f.space.derivative_table(axis)
            fac = fac.reshape((-1,) + (1,) * (f.data.ndim - 1))
            return Field(f.data[src] * fac, sp, self, f.mask)
        ax = self.grid.axes[axis]
        D = diff_matrix(ax.count, ax.spacing, ax.periodic, self.stencil.order)
        vals = np.moveaxis(f.data[0], axis, -1)
        with np.errstate(all="ignore"):
            out = np.moveaxis(vals @ D.T, -1, axis)
        mask = f.mask
        if mask is not None:
            bad = np.moveaxis((~mask).astype(float), axis, -1) @ (np.abs(D.T) > 0)
            mask = mask & ~(np.moveaxis(bad, -1, axis) > 0)
        return Field(out[None], f.space, self, mask)

    def gradient(self, f: Field) -> Field:
        return stack([self.partial(f, k) for k in range(self.m)], axis=f.ncomp)

    def interior(self, width: int) -> np.ndarray:
        """Nodes at least ``width`` nodes away from every non-periodic boundary."""
        mask = np.ones(self.grid.shape, dtype=bool)
        if width <= 0:
            return mask
        for k, ax in enumerate(self.grid.axes):
            if ax.periodic:
                continue
            idx = np.arange(ax.count)
            ok = (idx >= width) & (idx < ax.count - width)
            shape = [1] * self.m
            shape[k] = ax.count
            mask &= ok.reshape(shape)
        return mask

    def default_band(self, depth: int = 2) -> int:
        return 0 if self.backend == "jets" else depth * self.stencil.radius


# -- metric machinery ----------------------------------------------------------

def metric_inverse(metric: Field, tol: float = DEGENERACY_TOL) -> Field:
    """Inverse metric; nodes failing the scale-invariant degeneracy test are masked."""
    g0 = metric.value
    m = g0.shape[-1]
    det = np.linalg.det(g0)
    scale = np.max(np.linalg.norm(g0, axis=-1), axis=-1)
    bad = ~(np.abs(det) > tol * scale ** m)
    safe = metric
    if bad.any():
        data = metric.data.copy()
        data[0][bad] = np.eye(m)
        safe = Field(data, metric.space, metric.calc, metric.mask)
    inv = matinv(safe)
    return inv.with_mask(~bad)


@dataclass
class BundleConnection:
    """Tangent Christoffels ``gamma[k, i, j]`` and optional normal connection.

    ``normal[a, b, j]`` is the coefficient of ``xi_b`` in ``d xi_a (e_j)``.
    """

    gamma: Field
    normal: Field | None = None
    metric_inv: Field | None = None


def levi_civita(metric: Field, calc: Calculus, metric_inv: Field | None = None) -> BundleConnection:
    ginv = metric_inverse(metric) if metric_inv is None else metric_inv
    dg = calc.gradient(metric)  # dg[a, b, i] = d_i g_ab
    # lower[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    lower = einsum("jli->ijl", dg) + einsum("ilj->ijl", dg) - dg
    gamma = 0.5 * einsum("kl,ijl->kij", ginv, lower)
    return BundleConnection(gamma, None, ginv)


@dataclass
class Curvature:
    riemann: Field      # R_ijkl, R_ijkl = K (g_ik g_jl - g_il g_jk) for constant curvature K
    ricci: Field        # R_jl = g^ik R_ijkl
    scalar: Field
    kappa: Field        # scalar / (m (m - 1))


def curvature(metric: Field, conn: BundleConnection, calc: Calculus) -> Curvature:
    G = conn.gamma
    ginv = conn.metric_inv if conn.metric_inv is not None else metric_inverse(metric)
    dG = calc.gradient(G)  # dG[i, a, b, k] = d_k Gamma^i_ab
    # R^i_jkl = d_k G^i_lj - d_l G^i_kj + G^i_kp G^p_lj - G^i_lp G^p_kj
    t1 = einsum("iljk->ijkl", dG)
    t2 = einsum("ikjl->ijkl", dG)
    t3 = einsum("ikp,plj->ijkl", G, G)
    t4 = einsum("ilp,pkj->ijkl", G, G)
    R_up = t1 - t2 + t3 - t4
    riemann = einsum("ip,pjkl->ijkl", metric, R_up)
    ricci = einsum("ik,ijkl->jl", ginv, riemann)
    scalar = einsum("jl,jl->", ginv, ricci)
    m = calc.m
    kappa = scalar / (m * (m - 1)) if m > 1 else scalar * 0.0
    return Curvature(riemann, ricci, scalar, kappa)


_LETTERS = "abcdefghnopqrstuvwxy"


def covariant_derivative(field: Field, slots, conn: BundleConnection, calc: Calculus) -> Field:
    """Covariant derivative appending one covariant slot.

    ``slots`` gives one of ``co``, ``contra``, ``normal`` (upper normal index),
    ``normal_co`` or ``ambient`` for each component axis of ``field``.
    """
    slots = list(slots)
    if len(slots) != field.ncomp:
        raise ValueError(f"{len(slots)} slot kinds for {field.ncomp} component axes")
    out = calc.gradient(field)
    idx = _LETTERS[:field.ncomp]
    J, Z = "j", "z"
    for p, kind in enumerate(slots):
        if kind == "ambient":
            continue
        src = idx[:p] + Z + idx[p + 1:]
        tgt = idx + J
        if kind in ("co", "contra"):
            G = conn.gamma
            if kind == "co":
                out = out - einsum(f"{Z}{idx[p]}{J},{src}->{tgt}", G, field)
            else:
                out = out + einsum(f"{idx[p]}{Z}{J},{src}->{tgt}", G, field)
        elif kind in ("normal", "normal_co"):
            W = conn.normal
            if W is None:
                raise MissingConnection("normal slot without a normal connection")
            if kind == "normal":
                out = out + einsum(f"{Z}{idx[p]}{J},{src}->{tgt}", W, field)
            else:
                out = out - einsum(f"{idx[p]}{Z}{J},{src}->{tgt}", W, field)
        else:
            raise MissingConnection(f"unknown slot kind {kind!r}")
    return out


def hessian(field: Field, conn: BundleConnection, calc: Calculus, slots=None) -> Field:
    """Second covariant derivative; last two slots are the derivative indices."""
    slots = ["ambient"] * field.ncomp if slots is None else list(slots)
    first = covariant_derivative(field, slots, conn, calc)
    return covariant_derivative(first, slots + ["co"], conn, calc)


def laplace_beltrami(field: Field, metric_inv: Field, conn: BundleConnection,
                     calc: Calculus) -> Field:
    """g^ij f_{,ij}, componentwise over the component axes of ``field``."""
    H = hessian(field, conn, calc)
    idx = _LETTERS[:field.ncomp]
    return einsum(f"{idx}ij,ij->{idx}", H, metric_inv)


def quadrature_weights(grid: ParamGrid) -> np.ndarray:
    w = np.ones(grid.shape)
    for k, ax in enumerate(grid.axes):
        wk = np.full(ax.count, ax.spacing)
        if not ax.periodic:
            wk[0] *= 0.5
            wk[-1] *= 0.5
        shape = [1] * grid.m
        shape[k] = ax.count
        w = w * wk.reshape(shape)
    return w


def integrate(density: Field, metric: Field, calc: Calculus, region=None) -> float:
    """Integral of a scalar density against |det g|^(1/2) over ``region``."""
    region = np.ones(calc.grid.shape, dtype=bool) if region is None else np.asarray(region, bool)
    valid = density.valid & metric.valid
    if np.any(region & ~valid):
        raise MaskedIntegrationDomain(
            f"{int(np.sum(region & ~valid))} masked nodes inside the integration domain")
    vol = np.sqrt(np.abs(np.linalg.det(metric.value)))
    w = quadrature_weights(calc.grid)
    terms = np.where(region, density.value * vol * w, 0.0)
    return float(np.sum(np.ascontiguousarray(terms).ravel()))
