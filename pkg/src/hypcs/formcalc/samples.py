"""Seeded random test cases for the form calculus: smooth connections,
invertible gauge maps, sample points and rotation fields with collar
extensions for the cocycle identity."""

import numpy as np

from ..exprcalc import jets
from .forms import SL2_BASIS, MatrixForm
from .gauge import GaugeMap, rotation_from_quaternion

__all__ = ["random_one_form", "random_gauge", "sample_points", "random_so3_field",
           "random_so3_connection"]



def random_one_form(rng, dim=3, size=2, nparams=0, traceless=False,
                    real=False, skew=False, scale=1.0):
    """Smooth 1-form with trigonometric and polynomial coefficients."""
    def mats():
        if traceless:
            co = rng.normal(size=(dim, 3)) + 1j * rng.normal(size=(dim, 3))
            m = np.einsum("ik,kab->iab", co, SL2_BASIS)
        else:
            m = rng.normal(size=(dim, size, size))
            if not real:
                m = m + 1j * rng.normal(size=(dim, size, size))
            if skew:
                m = m - np.swapaxes(m, 1, 2)
        return scale * m

    A, B, C = mats(), mats(), mats()
    nv = dim + nparams
    K = rng.normal(size=(dim, nv))
    P = rng.integers(0, nv, size=dim)

    def coeffs(c):
        comps = []
        for i in range(dim):
            s = jets.sin(sum(K[i, j] * c[j] for j in range(nv)))
            q = c[P[i]] * c[P[i]]
            comps.append(A[i] + s[..., None, None] * B[i] + q[..., None, None] * C[i])
        return jets.stack(comps, axis=-3)

    return MatrixForm(1, dim, size, coeffs, nparams=nparams)


def random_gauge(rng, dim=3, size=2, nparams=0, scale=0.4):
    """Invertible matrix field: identity plus a smooth perturbation."""
    B = scale * (rng.normal(size=(dim, size, size))
                 + 1j * rng.normal(size=(dim, size, size)))
    K = rng.normal(size=(dim, dim + nparams))

    def fn(c):
        out = np.eye(size)
        for i in range(dim):
            arg = sum(K[i, j] * c[j] for j in range(dim + nparams))
            out = jets.cos(arg)[..., None, None] * B[i] + out
        return out

    return GaugeMap(fn, dim, size, target="GL", nparams=nparams)


def sample_points(rng, dim, n=4, lo=-1.0, hi=1.0):
    return [rng.uniform(lo, hi, size=n) for _ in range(dim)]


def random_so3_field(rng, ext: bool, scale=0.8):
    """Rotation field on the unit 2-torus and a collar extension that is the
    identity on the far face."""
    K = rng.integers(1, 3, size=(3, 2))
    ph = rng.uniform(0, 2 * np.pi, size=3)
    amp = scale * rng.normal(size=3)

    def quat(c, chi):
        y1, y2 = c
        v = [amp[k] * chi * jets.sin(2 * np.pi * (K[k, 0] * y1 + K[k, 1] * y2) + ph[k])
             for k in range(3)]
        norm = jets.sqrt(1 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        return [1 / norm] + [vk / norm for vk in v]

    if ext:
        return GaugeMap(lambda c: rotation_from_quaternion(
            *quat(c[1:], (1 - c[0]) ** 2 * (1 + 2 * c[0]))), 3, 3)
    return GaugeMap(lambda c: rotation_from_quaternion(*quat(c, 1.0)), 2, 3)


def random_so3_connection(rng):
    """Skew 3x3 connection on the unit 2-torus."""
    A = rng.normal(size=(2, 3, 3))
    A = A - np.swapaxes(A, 1, 2)
    B = rng.normal(size=(2, 3, 3))
    B = B - np.swapaxes(B, 1, 2)

    def coeffs(c):
        s = jets.cos(2 * np.pi * (c[0] + 2 * c[1]))
        return jets.stack([A[i] + s[..., None, None] * B[i] for i in range(2)], axis=-3)

    return MatrixForm(1, 2, 3, coeffs)
