"""Truncated multivariate Taylor arithmetic (forward-mode jets).

A :class:`Jet` stores the Taylor coefficients of a complex valued function of
``nvars`` real variables about a base point, truncated at total degree
``order``.  Coefficients live in an array of shape ``(ncoef, *shape)`` so a
single jet can carry a whole array of values (a batch of grid points, a
matrix, or both).  Monomials are stored in graded order, which makes
truncation to a lower order a prefix slice.

Partial derivatives are recovered from Taylor coefficients by multiplying
with the multi-index factorial; see :meth:`Jet.partial`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


class DomainError(ArithmeticError):
    """Raised when a jet operation is evaluated at a singular base value."""


@dataclass(frozen=True)
class JetSpace:
    nvars: int
    order: int
    monomials: tuple
    index: dict
    pair_left: np.ndarray
    pair_right: np.ndarray
    pair_starts: np.ndarray
    deriv_src: tuple
    deriv_scale: tuple
    factorials: np.ndarray

    @property
    def size(self) -> int:
        return len(self.monomials)

    def __hash__(self):
        return hash((self.nvars, self.order))

    def __eq__(self, other):
        return (isinstance(other, JetSpace)
                and (self.nvars, self.order) == (other.nvars, other.order))


def _graded_monomials(nvars: int, order: int) -> list:
    out = []
    for deg in range(order + 1):
        block = [m for m in itertools.product(range(deg + 1), repeat=nvars)
                 if sum(m) == deg]
        block.sort(reverse=True)
        out.extend(block)
    return out


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    """Return the (cached) coefficient layout for ``nvars`` variables."""
    if nvars < 0 or order < 0:
        raise ValueError("nvars and order must be non-negative")
    monos = _graded_monomials(nvars, order)
    index = {m: k for k, m in enumerate(monos)}
    triples = []
    for i, a in enumerate(monos):
        for j, b in enumerate(monos):
            s = tuple(x + y for x, y in zip(a, b))
            if sum(s) <= order:
                triples.append((index[s], i, j))
    triples.sort()
    out_idx = np.array([t[0] for t in triples])
    left = np.array([t[1] for t in triples])
    right = np.array([t[2] for t in triples])
    starts = np.searchsorted(out_idx, np.arange(len(monos)))

    deriv_src, deriv_scale = [], []
    lower = _graded_monomials(nvars, max(order - 1, 0)) if order > 0 else []
    for v in range(nvars):
        src, scale = [], []
        for m in lower:
            up = list(m)
            up[v] += 1
            src.append(index[tuple(up)])
            scale.append(float(up[v]))
        deriv_src.append(np.array(src, dtype=int))
        deriv_scale.append(np.array(scale))
    fact = np.array([math.prod(math.factorial(k) for k in m) for m in monos],
                    dtype=float)
    return JetSpace(nvars, order, tuple(monos), index, left, right, starts,
                    tuple(deriv_src), tuple(deriv_scale), fact)


def _expand(arr: np.ndarray, ndim: int) -> np.ndarray:
    return arr.reshape(arr.shape + (1,) * ndim)


def _pad(c: np.ndarray, vdim: int) -> np.ndarray:
    """Left-pad the value axes of a coefficient array to ``vdim`` axes."""
    extra = vdim - (c.ndim - 1)
    if extra <= 0:
        return c
    return c.reshape(c.shape[:1] + (1,) * extra + c.shape[1:])


class Jet:
    """Truncated Taylor polynomial with array-valued coefficients."""

    __slots__ = ("space", "c")
    __array_ufunc__ = None

    def __init__(self, space: JetSpace, coeffs):
        self.space = space
        self.c = np.asarray(coeffs, dtype=complex)
        if self.c.shape[0] != space.size:
            raise ValueError("coefficient array does not match jet space")

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, space: JetSpace, value) -> "Jet":
        value = np.asarray(value, dtype=complex)
        c = np.zeros((space.size,) + value.shape, dtype=complex)
        c[0] = value
        return cls(space, c)

    @classmethod
    def variable(cls, space: JetSpace, var: int, value) -> "Jet":
        j = cls.constant(space, value)
        if space.order >= 1:
            unit = [0] * space.nvars
            unit[var] = 1
            j.c[space.index[tuple(unit)]] = 1.0
        return j

    @classmethod
    def seeds(cls, point: Sequence, order: int) -> list:
        """One variable jet per coordinate of ``point``."""
        sp = jet_space(len(point), order)
        return [cls.variable(sp, k, p) for k, p in enumerate(point)]

    # inspection -------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def shape(self) -> tuple:
        return self.c.shape[1:]

    @property
    def order(self) -> int:
        return self.space.order

    def partial(self, multi_index: Sequence[int]) -> np.ndarray:
        """Mixed partial derivative for the given multi-index."""
        m = tuple(multi_index)
        if sum(m) > self.space.order:
            raise ValueError("jet order too low for requested partial")
        k = self.space.index[m]
        return self.c[k] * self.space.factorials[k]

    def d(self, *vars_: int) -> np.ndarray:
        """Partial derivative in the listed variables, e.g. ``j.d(0, 1)``."""
        m = [0] * self.space.nvars
        for v in vars_:
            m[v] += 1
        return self.partial(m)

    def gradient(self) -> np.ndarray:
        return np.stack([self.d(v) for v in range(self.space.nvars)])

    # structural -------------------------------------------------------
    def truncate(self, order: int) -> "Jet":
        if order >= self.space.order:
            return self
        sp = jet_space(self.space.nvars, order)
        return Jet(sp, self.c[:sp.size])

    def diff(self, var: int) -> "Jet":
        """Exact derivative in ``var``; the result has order one lower."""
        if self.space.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        sp = jet_space(self.space.nvars, self.space.order - 1)
        src = self.space.deriv_src[var]
        scale = _expand(self.space.deriv_scale[var], self.c.ndim - 1)
        return Jet(sp, self.c[src] * scale)

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.space, self.c[(slice(None),) + idx])

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.space, self.c.reshape((self.space.size,) + shape))

    def swap(self, a: int = -1, b: int = -2) -> "Jet":
        a = a if a < 0 else a + 1
        b = b if b < 0 else b + 1
        return Jet(self.space, np.swapaxes(self.c, a, b))

    @property
    def T(self) -> "Jet":
        return self.swap(-1, -2)

    def sum(self, axis) -> "Jet":
        axis = axis if axis < 0 else axis + 1
        return Jet(self.space, self.c.sum(axis=axis))

    def trace(self) -> "Jet":
        return Jet(self.space, np.trace(self.c, axis1=-2, axis2=-1))

    def conj(self) -> "Jet":
        return Jet(self.space, self.c.conj())

    @property
    def real(self) -> "Jet":
        return Jet(self.space, self.c.real.astype(complex))

    @property
    def imag(self) -> "Jet":
        return Jet(self.space, self.c.imag.astype(complex))

    def copy(self) -> "Jet":
        return Jet(self.space, self.c.copy())

    def __repr__(self) -> str:
        return (f"Jet(nvars={self.space.nvars}, order={self.space.order}, "
                f"shape={self.shape}, value={self.value!r})")

    # arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.space.nvars != self.space.nvars:
                raise ValueError("jets over different variable sets")
            a, b = self, other
            if other.space.order != self.space.order:
                k = min(other.space.order, self.space.order)
                a, b = self.truncate(k), other.truncate(k)
        else:
            a, b = self, Jet.constant(self.space, other)
        vdim = max(a.c.ndim, b.c.ndim) - 1
        if a.c.ndim != b.c.ndim:
            a, b = Jet(a.space, _pad(a.c, vdim)), Jet(b.space, _pad(b.c, vdim))
        return a, b

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.space, a.c + b.c)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.space, a.c - b.c)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.space, b.c - a.c)

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=complex)
            return Jet(self.space, _pad(self.c, other.ndim) * other)
        a, b = self._coerce(other)
        return _bilinear(a, b, np.multiply)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.c @ np.asarray(other, dtype=complex))
        a, b = self._coerce(other)
        return _bilinear(a, b, np.matmul)

    def __rmatmul__(self, other):
        return Jet(self.space, np.asarray(other, dtype=complex) @ self.c)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=complex)
            return Jet(self.space, _pad(self.c, other.ndim) / other)
        a, b = self._coerce(other)
        return a * reciprocal(b)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        if isinstance(p, (int, np.integer)) or (
                isinstance(p, (float, np.floating)) and float(p).is_integer()):
            return ipow(self, int(p))
        return rpow(self, p)


def _bilinear(a: Jet, b: Jet, op: Callable) -> Jet:
    sp = a.space
    if sp.order == 0:
        return Jet(sp, op(a.c, b.c))
    prod = op(a.c[sp.pair_left], b.c[sp.pair_right])
    return Jet(sp, np.add.reduceat(prod, sp.pair_starts, axis=0))


def einsum(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Jet-valued ``np.einsum`` of two operands (leading axis handled)."""
    ins, out = subscripts.split("->")
    sa, sb = ins.split(",")
    spec = f"Z{sa},Z{sb}->Z{out}"
    k = min(a.space.order, b.space.order)
    a, b = a.truncate(k), b.truncate(k)
    return _bilinear(a, b, lambda x, y: np.einsum(spec, x, y))


def stack(jets: Sequence, axis: int = 0) -> Jet:
    """Stack jets along a new trailing-shape axis."""
    order = min(j.space.order for j in jets if isinstance(j, Jet))
    sp = next(j.space for j in jets if isinstance(j, Jet))
    sp = jet_space(sp.nvars, order)
    parts = [j.truncate(order) if isinstance(j, Jet) else Jet.constant(sp, j)
             for j in jets]
    vdim = max(p.c.ndim for p in parts) - 1
    padded = [_pad(p.c, vdim) for p in parts]
    shape = np.broadcast_shapes(*(c.shape for c in padded))
    axis = axis if axis < 0 else axis + 1
    return Jet(sp, np.stack([np.broadcast_to(c, shape) for c in padded],
                            axis=axis))


def as_jet(value, like: Jet) -> Jet:
    return value if isinstance(value, Jet) else Jet.constant(like.space, value)


# scalar functions by Taylor composition ---------------------------------

def _compose(u: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    """Return f(u) given f^(m)(u0) for m = 0..order."""
    sp = u.space
    delta = Jet(sp, u.c.copy())
    delta.c[0] = 0.0
    out = Jet.constant(sp, derivs[0])
    power = None
    for m in range(1, sp.order + 1):
        power = delta if power is None else power * delta
        out = out + power * (derivs[m] / math.factorial(m))
    return out


def _check_nonzero(u: Jet, what: str):
    if np.any(u.value == 0):
        raise DomainError(f"{what} at zero")


def reciprocal(u: Jet) -> Jet:
    _check_nonzero(u, "division")
    u0 = u.value
    derivs = [(-1) ** m * math.factorial(m) / u0 ** (m + 1)
              for m in range(u.space.order + 1)]
    return _compose(u, derivs)


def ipow(u: Jet, n: int) -> Jet:
    if n < 0:
        return reciprocal(ipow(u, -n))
    out = Jet.constant(u.space, np.ones(u.shape, dtype=complex))
    base = u
    while n:
        if n & 1:
            out = out * base
        n >>= 1
        if n:
            base = base * base
    return out


def rpow(u: Jet, p) -> Jet:
    _check_nonzero(u, "fractional power")
    u0 = u.value
    derivs, coef = [], 1.0
    for m in range(u.space.order + 1):
        derivs.append(coef * u0 ** (p - m))
        coef *= (p - m)
    return _compose(u, derivs)


def exp(u: Jet) -> Jet:
    e = np.exp(u.value)
    return _compose(u, [e] * (u.space.order + 1))


def log(u: Jet) -> Jet:
    _check_nonzero(u, "log")
    u0 = u.value
    derivs = [np.log(u0)] + [(-1) ** (m - 1) * math.factorial(m - 1) / u0 ** m
                             for m in range(1, u.space.order + 1)]
    return _compose(u, derivs)


def sqrt(u: Jet) -> Jet:
    _check_nonzero(u, "sqrt")
    return rpow(u, 0.5)


def sin(u: Jet) -> Jet:
    s, c = np.sin(u.value), np.cos(u.value)
    cyc = [s, c, -s, -c]
    return _compose(u, [cyc[m % 4] for m in range(u.space.order + 1)])


def cos(u: Jet) -> Jet:
    s, c = np.sin(u.value), np.cos(u.value)
    cyc = [c, -s, -c, s]
    return _compose(u, [cyc[m % 4] for m in range(u.space.order + 1)])


def sinh(u: Jet) -> Jet:
    s, c = np.sinh(u.value), np.cosh(u.value)
    return _compose(u, [s if m % 2 == 0 else c
                        for m in range(u.space.order + 1)])


def cosh(u: Jet) -> Jet:
    s, c = np.sinh(u.value), np.cosh(u.value)
    return _compose(u, [c if m % 2 == 0 else s
                        for m in range(u.space.order + 1)])


def inv(a: Jet) -> Jet:
    """Inverse of a jet of square matrices (last two axes)."""
    a0 = a.value
    if np.any(np.abs(np.linalg.det(a0)) == 0):
        raise DomainError("matrix inverse of a singular matrix")
    a0inv = np.linalg.inv(a0)
    delta = Jet(a.space, a.c.copy())
    delta.c[0] = 0.0
    x = -(delta @ a0inv)
    acc = Jet.constant(a.space, np.broadcast_to(np.eye(a0.shape[-1]), a0.shape))
    term = None
    for _ in range(a.space.order):
        term = x if term is None else term @ x
        acc = acc + term
    return a0inv @ acc


def det2(a: Jet) -> Jet:
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def det3(a: Jet) -> Jet:
    return (a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
            - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
            + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0]))
