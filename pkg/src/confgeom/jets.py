"""Per-node truncated Taylor arithmetic on parameter grids.

A :class:`Field` stores, at every grid node, the Taylor coefficients of a
tensor-valued function up to some total degree.  ``data`` has shape
``(ncoef, *grid_shape, *comp_shape)``.  Order-0 fields are plain samples and
are what the finite-difference backend works with; higher orders come from
evaluating closed-form expressions on coordinate jets, which gives exact
derivatives to rounding error.

Coefficients are indexed by multi-indices in graded order, so truncating to a
lower order is a prefix slice.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


class JetSpace:
    """Multi-index bookkeeping for ``m`` variables up to total degree ``order``."""

    def __init__(self, m: int, order: int):
        self.m = m
        self.order = order
        multi = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(m), d):
                alpha = [0] * m
                for a in combo:
                    alpha[a] += 1
                multi.append(tuple(alpha))
        self.multi = multi
        self.index = {a: k for k, a in enumerate(multi)}
        self.size = len(multi)
        self.degree = np.array([sum(a) for a in multi])
        self.factorial = np.array([math.prod(math.factorial(x) for x in a) for a in multi],
                                  dtype=float)

        self.mult = []
        for a1 in multi:
            k2s, ks = [], []
            for k2, a2 in enumerate(multi):
                if sum(a1) + sum(a2) <= order:
                    k2s.append(k2)
                    ks.append(self.index[tuple(x + y for x, y in zip(a1, a2))])
            self.mult.append((np.array(k2s, dtype=int), np.array(ks, dtype=int)))

    @lru_cache(maxsize=None)
    def derivative_table(self, axis: int):
        """Source indices and factors for d/ds_axis, landing in order-1 space."""
        out = JetSpace.get(self.m, self.order - 1)
        src = np.empty(out.size, dtype=int)
        fac = np.empty(out.size)
        for k, beta in enumerate(out.multi):
            b = list(beta)
            b[axis] += 1
            src[k] = self.index[tuple(b)]
            fac[k] = beta[axis] + 1
        return out, src, fac

    def unit(self, axis: int) -> int:
        e = [0] * self.m
        e[axis] = 1
        return self.index[tuple(e)]

    @staticmethod
    @lru_cache(maxsize=None)
    def get(m: int, order: int) -> "JetSpace":
        return JetSpace(m, order)


def _merge_masks(*masks):
    out = None
    for mk in masks:
        if mk is None:
            continue
        out = mk.copy() if out is None else (out & mk)
    return out


class Field:
    """Tensor field over a parameter grid with per-node Taylor coefficients."""

    __array_priority__ = 1000

    def __init__(self, data, space: JetSpace, calc, mask=None):
        self.data = data
        self.space = space
        self.calc = calc
        self.mask = mask

    # -- shape bookkeeping -------------------------------------------------
    @property
    def ngrid(self) -> int:
        return len(self.calc.grid.shape)

    @property
    def comp_shape(self) -> tuple:
        return self.data.shape[1 + self.ngrid:]

    @property
    def ncomp(self) -> int:
        return len(self.comp_shape)

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self) -> np.ndarray:
        return self.data[0]

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.calc.grid.shape, dtype=bool)
        return self.mask

    def _new(self, data, space=None, mask=None):
        return Field(data, self.space if space is None else space, self.calc, mask)

    def truncate(self, order: int) -> "Field":
        if order >= self.order:
            return self
        sp = JetSpace.get(self.space.m, order)
        return Field(self.data[:sp.size], sp, self.calc, self.mask)

    def with_mask(self, mask) -> "Field":
        return Field(self.data, self.space, self.calc, _merge_masks(self.mask, mask))

    def derivative(self, alpha) -> np.ndarray:
        """Value of the partial derivative with multi-index ``alpha``."""
        k = self.space.index[tuple(alpha)]
        return self.data[k] * self.space.factorial[k]

    def _expand(self, nc: int) -> np.ndarray:
        extra = nc - self.ncomp
        if extra <= 0:
            return self.data
        shape = self.data.shape[:1 + self.ngrid] + (1,) * extra + self.comp_shape
        return self.data.reshape(shape)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Field):
            order = min(self.order, other.order)
            a, b = self.truncate(order), other.truncate(order)
            nc = max(a.ncomp, b.ncomp)
            return a._expand(nc), b._expand(nc), a.space, _merge_masks(a.mask, b.mask)
        return None

    def __add__(self, other):
        co = self._coerce(other)
        if co is not None:
            a, b, sp, mk = co
            return Field(a + b, sp, self.calc, mk)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.data.shape[1:], other.shape)
        data = np.broadcast_to(self.data, (self.data.shape[0],) + shape).copy()
        data[0] = data[0] + other
        return self._new(data, mask=self.mask)

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self.data, mask=self.mask)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        co = self._coerce(other)
        if co is None:
            return self._new(self.data * other, mask=self.mask)
        a, b, sp, mk = co
        if sp.size == 1:
            return Field(a * b, sp, self.calc, mk)
        shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
        out = np.zeros((sp.size,) + shape)
        for k1 in range(sp.size):
            k2s, ks = sp.mult[k1]
            out[ks] += a[k1] * b[k2s]
        return Field(out, sp, self.calc, mk)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Field):
            return self * other.reciprocal()
        return self._new(self.data / other, mask=self.mask)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        return self.power(p)

    # -- nonlinear scalar functions ----------------------------------------
    def _compose(self, derivs):
        """Compose with f given ``derivs[n] = f^(n)(a0) / n!``."""
        out = np.zeros_like(self.data)
        out[0] = derivs[0]
        if self.order == 0:
            return self._new(out, mask=self.mask)
        delta_data = self.data.copy()
        delta_data[0] = 0.0
        delta = self._new(delta_data, mask=self.mask)
        P = delta
        for n in range(1, self.order + 1):
            out = out + derivs[n] * P.data
            if n < self.order:
                P = P * delta
        return self._new(out, mask=self.mask)

    def _taylor(self, fn):
        with np.errstate(all="ignore"):
            return self._compose(fn(self.value, self.order))

    def power(self, p):
        def fn(a0, order):
            out, c = [], 1.0
            for n in range(order + 1):
                out.append(c * a0 ** (p - n))
                c = c * (p - n) / (n + 1)
            return out
        return self._taylor(fn)

    def reciprocal(self):
        return self.power(-1.0)

    def sqrt(self):
        return self.power(0.5)

    def exp(self):
        def fn(a0, order):
            e = np.exp(a0)
            return [e / math.factorial(n) for n in range(order + 1)]
        return self._taylor(fn)

    def log(self):
        def fn(a0, order):
            out = [np.log(a0)]
            for n in range(1, order + 1):
                out.append((-1.0) ** (n + 1) / (n * a0 ** n))
            return out
        return self._taylor(fn)

    def _cyclic(self, cycle):
        def fn(a0, order):
            vals = [f(a0) for f in cycle]
            return [vals[n % len(vals)] / math.factorial(n) for n in range(order + 1)]
        return self._taylor(fn)

    def sin(self):
        return self._cyclic([np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)])

    def cos(self):
        return self._cyclic([np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin])

    def sinh(self):
        return self._cyclic([np.sinh, np.cosh])

    def cosh(self):
        return self._cyclic([np.cosh, np.sinh])

    def abs(self):
        """|f| as sign(f(node)) * f; smooth wherever f(node) != 0."""
        return self * np.sign(self.value)

    # -- component manipulation --------------------------------------------
    def _comp_key(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return (slice(None),) * (1 + self.ngrid) + key

    def __getitem__(self, key):
        return self._new(self.data[self._comp_key(key)], mask=self.mask)

    def transpose(self, *perm):
        base = list(range(1 + self.ngrid))
        return self._new(self.data.transpose(base + [1 + self.ngrid + p for p in perm]),
                         mask=self.mask)

    def take(self, idx, axis: int = 0):
        """Gather along component ``axis`` with per-node integer indices ``idx``."""
        ax = 1 + self.ngrid + axis
        ind = idx.reshape((1,) + idx.shape + (1,) * (self.data.ndim - 1 - idx.ndim))
        ind = np.broadcast_to(ind, self.data.shape[:ax] + (1,) + self.data.shape[ax + 1:])
        return self._new(np.take_along_axis(self.data, ind, axis=ax).squeeze(ax),
                         mask=self.mask)

    def sum(self, axis: int = 0):
        return self._new(self.data.sum(axis=1 + self.ngrid + axis), mask=self.mask)

    def copy(self):
        return self._new(self.data.copy(), mask=None if self.mask is None else self.mask.copy())

    def __repr__(self):
        return (f"Field(order={self.order}, grid={self.calc.grid.shape}, "
                f"comp={self.comp_shape})")


# -- module-level helpers ------------------------------------------------------

def stack(fields, axis: int = 0) -> Field:
    order = min(f.order for f in fields)
    fs = [f.truncate(order) for f in fields]
    ng = fs[0].ngrid
    data = np.stack([f.data for f in fs], axis=1 + ng + axis)
    return Field(data, fs[0].space, fs[0].calc, _merge_masks(*[f.mask for f in fs]))


def _comp_first(data, nc):
    """(K, *grid, *comp) -> contiguous (K, *comp, *grid); tiny contractions run
    far faster with the grid axes innermost."""
    nd = data.ndim
    return np.ascontiguousarray(np.moveaxis(data, list(range(nd - nc, nd)), list(range(1, 1 + nc))))


def _comp_last(data, nc):
    nd = data.ndim
    return np.ascontiguousarray(np.moveaxis(data, list(range(1, 1 + nc)), list(range(nd - nc, nd))))


def _einsum2(spec, a, b):
    ins, out = spec.split("->")
    ia, ib = ins.split(",")
    if not isinstance(a, Field):
        a, b, ia, ib = b, a, ib, ia
    if not isinstance(b, Field):
        A = _comp_first(a.data, len(ia))
        data = np.einsum(f"Q{ia}...,{ib}->Q{out}...", A, np.asarray(b, dtype=float))
        return a._new(_comp_last(data, len(out)), mask=a.mask)
    order = min(a.order, b.order)
    a, b = a.truncate(order), b.truncate(order)
    sp = a.space
    mk = _merge_masks(a.mask, b.mask)
    A = _comp_first(a.data, len(ia))
    B = _comp_first(b.data, len(ib))
    if sp.size == 1:
        res = np.einsum(f"Q{ia}...,Q{ib}...->Q{out}...", A, B)
    else:
        res = None
        for k1 in range(sp.size):
            k2s, ks = sp.mult[k1]
            part = np.einsum(f"{ia}...,Q{ib}...->Q{out}...", A[k1], B[k2s])
            if res is None:
                res = np.zeros((sp.size,) + part.shape[1:])
            res[ks] += part
    return Field(_comp_last(res, len(out)), sp, a.calc, mk)


def einsum(spec: str, *ops):
    """Einstein summation over component axes of Fields and constant arrays."""
    ins, out = spec.replace(" ", "").split("->")
    ins = ins.split(",")
    cur, cur_idx = ops[0], ins[0]
    for n in range(1, len(ops)):
        later = "".join(ins[n + 1:]) + out
        both = cur_idx + ins[n]
        keep = "".join(sorted({c for c in both if c in later}, key=both.index))
        cur = _einsum2(f"{cur_idx},{ins[n]}->{keep}", cur, ops[n])
        cur_idx = keep
    if cur_idx != out or len(ops) == 1:
        if isinstance(cur, Field):
            cur = cur._new(np.einsum(f"...{cur_idx}->...{out}", cur.data), mask=cur.mask)
        else:
            cur = np.einsum(f"{cur_idx}->{out}", cur)
    return cur


def matinv(A: Field) -> Field:
    """Inverse of a matrix-valued field (last two component axes) by Neumann series."""
    with np.errstate(all="ignore"):
        X0 = np.linalg.inv(A.value)
    X = A._new(np.zeros_like(A.data), mask=A.mask)
    X.data[0] = X0
    if A.order == 0:
        return X
    D = A.copy()
    D.data[0] = 0.0
    M = -einsum("ij,jk->ik", X, D)
    term = X
    result = X
    for _ in range(A.order):
        term = einsum("ij,jk->ik", M, term)
        result = result + term
    return result


def pair(x: Field, y: Field, diag) -> Field:
    """Indefinite pairing along the last component axis with diagonal signature.

    Leading component axes of ``x`` then ``y`` are kept, in that order.
    """
    letters = "bcdefghijklnopq"
    nx, ny = x.ncomp - 1, y.ncomp - 1
    ix, iy = letters[:nx], letters[nx:nx + ny]
    return einsum(f"{ix}a,{iy}a->{ix}{iy}", x * np.asarray(diag, dtype=float), y)


# -- elementwise functions that accept Fields or plain arrays -------------------

def _dispatch(name, npfn):
    def fn(x):
        if isinstance(x, Field):
            return getattr(x, name)()
        return npfn(x)
    fn.__name__ = name
    return fn


sin = _dispatch("sin", np.sin)
cos = _dispatch("cos", np.cos)
sinh = _dispatch("sinh", np.sinh)
cosh = _dispatch("cosh", np.cosh)
exp = _dispatch("exp", np.exp)
log = _dispatch("log", np.log)
sqrt = _dispatch("sqrt", np.sqrt)
