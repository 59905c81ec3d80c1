"""Tensor-product quadrature with reproducible (compensated) summation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class QuadratureError(RuntimeError):
    """Raised when a refinement check shows the quadrature has not settled."""


@dataclass(frozen=True)
class Axis:
    """One quadrature direction: ``kind`` is "periodic" or "gauss"."""

    kind: str
    lo: float
    hi: float

    def rule(self, n: int):
        if self.kind == "periodic":
            h = (self.hi - self.lo) / n
            return self.lo + (np.arange(n) + 0.5) * h, np.full(n, h)
        if self.kind == "gauss":
            x, w = np.polynomial.legendre.leggauss(n)
            half = 0.5 * (self.hi - self.lo)
            return self.lo + half * (x + 1.0), half * w
        raise ValueError(f"unknown axis kind {self.kind!r}")


def fsum_complex(values) -> complex:
    """Compensated sum in C order (independent of how values were tiled)."""
    v = np.asarray(values, dtype=complex).ravel()
    return complex(math.fsum(v.real), math.fsum(v.imag))


def integrate(fn: Callable, axes: Sequence[Axis], n: int | Sequence[int],
              threads: int = 1) -> complex:
    """Integrate ``fn(*coords)`` over the box described by ``axes``.

    ``fn`` receives coordinate arrays of one tile (a slab in the first axis)
    and returns values of the same shape.  Tiles are evaluated in any order
    (optionally on threads) but summed in lexicographic grid order.
    """
    ns = [n] * len(axes) if np.isscalar(n) else list(n)
    rules = [ax.rule(k) for ax, k in zip(axes, ns)]
    rest = np.meshgrid(*[r[0] for r in rules[1:]], indexing="ij")
    wrest = np.ones_like(rest[0]) if rest else np.ones(())
    for k, r in enumerate(rules[1:]):
        shape = [1] * len(rules[1:])
        shape[k] = -1
        wrest = wrest * r[1].reshape(shape)
    x0, w0 = rules[0]

    def tile(i):
        coords = [np.full(wrest.shape, x0[i])] + [r for r in rest]
        return np.asarray(fn(*coords)) * (w0[i] * wrest)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(tile, range(len(x0))))
    else:
        parts = [tile(i) for i in range(len(x0))]
    return fsum_complex(np.stack(parts))


def integrate_refined(fn: Callable, axes: Sequence[Axis], n: int,
                      tol: float, threads: int = 1) -> tuple:
    """Integrate at ``n`` and at a coarser grid; raise if they disagree."""
    fine = integrate(fn, axes, n, threads)
    coarse = integrate(fn, axes, max(4, (2 * n) // 3), threads)
    if abs(fine - coarse) > tol:
        raise QuadratureError(
            f"grid refinement changed the integral by {abs(fine - coarse):.3e}"
            f" (> {tol:.1e}); increase the grid")
    return fine, abs(fine - coarse)
