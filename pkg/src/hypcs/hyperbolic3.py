"""Upper half-space model of H^3: Moebius action, Killing fields, curl,
canonical lift and the complexified connection ``D = nabla + i T``.

Points are quaternions ``y1 + i y2 + y3 j``, stored as a pair
``(z, w) = (y1 + i y2, y3)``.  Tangent vectors are complex triples of
components in ``(d/dy1, d/dy2, d/dy3)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exprcalc import jets
from .exprcalc.jets import Jet

__all__ = [
    "Quaternion", "MoebiusMap", "H3Point", "VectorFieldH3",
    "mobius_act_h3", "hyperbolic_distance", "pushforward", "frame_of",
    "killing_field", "killing_vector", "curl_field", "curl_h3",
    "canonical_lift", "cross_product", "torsion_apply", "christoffel",
    "covariant_derivative", "complex_connection_apply",
    "killing_residual", "killing_pair_residual", "equivariance_residual",
    "sl2_element", "random_moebius", "rotation_about_j", "mobius_act_quaternion",
]


# quaternion arithmetic -------------------------------------------------------

def _conj(x):
    return x.conj() if isinstance(x, Jet) else np.conj(x)


@dataclass(frozen=True)
class Quaternion:
    """``z + w j`` with complex ``z, w`` (numbers, arrays or jets)."""

    z: object
    w: object = 0.0

    def __add__(self, other):
        other = _quat(other)
        return Quaternion(self.z + other.z, self.w + other.w)

    __radd__ = __add__

    def __sub__(self, other):
        other = _quat(other)
        return Quaternion(self.z - other.z, self.w - other.w)

    def __rsub__(self, other):
        return _quat(other) - self

    def __neg__(self):
        return Quaternion(-self.z, -self.w)

    def __mul__(self, other):
        # j z = conj(z) j and j j = -1
        other = _quat(other)
        return Quaternion(self.z * other.z - self.w * _conj(other.w),
                          self.z * other.w + self.w * _conj(other.z))

    def __rmul__(self, other):
        return _quat(other) * self

    def norm2(self):
        return self.z * _conj(self.z) + self.w * _conj(self.w)

    def inverse(self) -> "Quaternion":
        n = self.norm2()
        return Quaternion(_conj(self.z) / n, -self.w / n)

    def __truediv__(self, other):
        """Right division ``self * other^{-1}``."""
        return self * _quat(other).inverse()


def _quat(x) -> Quaternion:
    return x if isinstance(x, Quaternion) else Quaternion(x, 0.0)


# points and group elements ----------------------------------------------------

@dataclass(frozen=True)
class H3Point:
    """Point ``y1 + i y2 + y3 j`` of upper half-space (``y3 > 0``)."""

    y1: float
    y2: float
    y3: float

    def __post_init__(self):
        if not self.y3 > 0:
            raise ValueError("H3Point requires y3 > 0")

    @classmethod
    def j(cls) -> "H3Point":
        return cls(0.0, 0.0, 1.0)

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.y1, self.y2, self.y3])

    def quaternion(self) -> Quaternion:
        return Quaternion(complex(self.y1, self.y2), self.y3)


def _as_point(q) -> H3Point:
    if isinstance(q, H3Point):
        return q
    return H3Point(*(float(v) for v in q))


@dataclass(frozen=True, eq=False)
class MoebiusMap:
    """Element of PSL2(C) stored as a unit-determinant representative."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det == 0:
            raise ValueError("singular matrix is not a Moebius map")
        if abs(det - 1) > 1e-12:
            s = cmath.sqrt(det)
            for name in "abcd":
                object.__setattr__(self, name, complex(getattr(self, name)) / s)

    @classmethod
    def from_matrix(cls, m) -> "MoebiusMap":
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1, 0, 0, 1)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def trace(self) -> complex:
        return self.a + self.d

    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return MoebiusMap.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MoebiusMap):
            return NotImplemented
        return self.isclose(other, 1e-12)

    def isclose(self, other: "MoebiusMap", tol: float = 1e-10) -> bool:
        """Equality in PSL2(C), i.e. up to the sign of the representative."""
        m, n = self.matrix, other.matrix
        return bool(min(np.abs(m - n).max(), np.abs(m + n).max()) <= tol)

    def __hash__(self):
        return hash(tuple(np.round(self.matrix.ravel() * np.sign(
            self.a.real or self.b.real or 1.0), 10)))

    def act(self, z):
        """Action on the Riemann sphere (``inf`` is ``complex('inf')``)."""
        if np.isinf(z):
            return self.a / self.c if self.c != 0 else complex("inf")
        den = self.c * z + self.d
        if den == 0:
            return complex("inf")
        return (self.a * z + self.b) / den

    def adjoint(self, h: np.ndarray) -> np.ndarray:
        """``ad_gamma h = gamma h gamma^{-1}``."""
        return self.matrix @ np.asarray(h) @ self.inverse().matrix


def mobius_act_quaternion(g: MoebiusMap, q: Quaternion) -> Quaternion:
    """``(a q + b)(c q + d)^{-1}`` on quaternions (entries may be jets)."""
    return (g.a * q + g.b) / (g.c * q + g.d)


def mobius_act_h3(g: MoebiusMap, p) -> H3Point:
    """Isometric action of ``g`` on upper half-space."""
    r = mobius_act_quaternion(g, _as_point(p).quaternion())
    return H3Point(float(np.real(r.z)), float(np.imag(r.z)), float(np.real(r.w)))


def hyperbolic_distance(p, q) -> float:
    p, q = _as_point(p), _as_point(q)
    diff2 = float(np.sum((p.coords - q.coords) ** 2))
    return float(np.arccosh(1.0 + diff2 / (2.0 * p.y3 * q.y3)))


def pushforward(g: MoebiusMap, p) -> np.ndarray:
    """Jacobian ``g_*`` at ``p``; column ``k`` is the image of ``d/dy_k``."""
    y = Jet.seeds(_as_point(p).coords, 1)
    r = mobius_act_quaternion(g, Quaternion(y[0] + 1j * y[1], y[2]))
    comps = [r.z.real, r.z.imag, r.w.real]
    return np.array([[c.d(k).real for k in range(3)] for c in comps])


def frame_of(g: MoebiusMap) -> tuple:
    """``(g.j, g_*(d/dy1, d/dy2, d/dy3))``; frame vectors are columns."""
    return mobius_act_h3(g, H3Point.j()), pushforward(g, H3Point.j())


# vector fields -------------------------------------------------------------

@dataclass
class VectorFieldH3:
    """Complex vector field given by ``fn(y1, y2, y3) -> 3 jets``.

    ``depth`` is the number of derivatives ``fn`` consumes: it returns jets of
    order ``n - depth`` when fed coordinate jets of order ``n``.
    """

    fn: Callable
    depth: int = 0
    name: str = ""

    def jet(self, p, order: int = 1) -> Jet:
        coords = Jet.seeds(_as_point(p).coords, order + self.depth)
        return jets.stack(list(self.fn(*coords)))

    def __call__(self, p) -> np.ndarray:
        return self.jet(p, 0).value

    def __add__(self, other: "VectorFieldH3") -> "VectorFieldH3":
        return VectorFieldH3(lambda *y: _combine(self.fn(*y), other.fn(*y), 1, 1),
                             max(self.depth, other.depth))

    def __sub__(self, other: "VectorFieldH3") -> "VectorFieldH3":
        return VectorFieldH3(lambda *y: _combine(self.fn(*y), other.fn(*y), 1, -1),
                             max(self.depth, other.depth))

    def scale(self, s: complex) -> "VectorFieldH3":
        return VectorFieldH3(lambda *y: [s * c for c in self.fn(*y)], self.depth)

    __rmul__ = scale


def _combine(us, vs, a, b):
    order = min(_order(x) for x in list(us) + list(vs))
    return [a * _trunc(u, order) + b * _trunc(v, order) for u, v in zip(us, vs)]


def _order(x) -> int:
    return x.order if isinstance(x, Jet) else 10 ** 6


def _trunc(x, order):
    return x.truncate(order) if isinstance(x, Jet) else x


def sl2_element(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.shape != (2, 2) or abs(np.trace(h)) > 1e-12:
        raise ValueError("expected a traceless 2x2 matrix")
    return h


def killing_field(h) -> VectorFieldH3:
    """Killing field of ``h = [[a, b], [c, -a]]``: ``b + a q + q a - q c q``."""
    h = sl2_element(h)
    a, b, c = h[0, 0], h[0, 1], h[1, 0]

    def fn(y1, y2, y3):
        q = Quaternion(y1 + 1j * y2, y3 + 0j)
        k = b + a * q + q * a - q * c * q
        # the j-part is real for a tangent vector of H^3
        return [k.z.real, k.z.imag, k.w.real]

    return VectorFieldH3(fn, 0, "killing")


def killing_vector(h, p) -> np.ndarray:
    return killing_field(h)(p)


def curl_field(u: VectorFieldH3, metric: str = "hyperbolic") -> VectorFieldH3:
    """``curl u = (* d u^flat)^sharp`` for ``dy^2/y3^2`` (or the flat metric).

    For the conformal metric ``dy^2/y3^2`` this is ``y3^3 rot(u / y3^2)``
    with the Euclidean rotation ``rot`` and the orientation ``(y1, y2, y3)``.
    """
    if metric not in ("hyperbolic", "euclidean"):
        raise ValueError("metric must be 'hyperbolic' or 'euclidean'")

    def fn(y1, y2, y3):
        comps = list(u.fn(y1, y2, y3))
        if metric == "hyperbolic":
            w = 1 / (y3 * y3)
            comps = [c * w for c in comps]
        comps = [c if isinstance(c, Jet) else Jet.constant(y1.space, c) for c in comps]
        rot = [comps[2].diff(1) - comps[1].diff(2),
               comps[0].diff(2) - comps[2].diff(0),
               comps[1].diff(0) - comps[0].diff(1)]
        if metric == "hyperbolic":
            s = y3.truncate(rot[0].order) ** 3
            rot = [s * r for r in rot]
        return rot

    return VectorFieldH3(fn, u.depth + 1, "curl")


def curl_h3(u: VectorFieldH3, p, metric: str = "hyperbolic") -> np.ndarray:
    return curl_field(u, metric)(p)


def canonical_lift(u: VectorFieldH3) -> VectorFieldH3:
    """``s_u = u + (i/2) curl u``."""
    return u + curl_field(u).scale(0.5j)


# metric structure -----------------------------------------------------------

def cross_product(v, w, p) -> np.ndarray:
    """Vector product for ``dy^2/y3^2``: ``g(v x w, x) = vol_g(v, w, x)``."""
    return np.cross(np.asarray(v), np.asarray(w)) / _as_point(p).y3


def torsion_apply(v, w, p) -> np.ndarray:
    """``T_v w = -v x w``."""
    return -cross_product(v, w, p)


def christoffel(p) -> np.ndarray:
    """``Gamma[k, i, j]`` of ``dy^2/y3^2`` at ``p``."""
    dphi = np.array([0.0, 0.0, -1.0 / _as_point(p).y3])
    eye = np.eye(3)
    return (np.einsum("ki,j->kij", eye, dphi) + np.einsum("kj,i->kij", eye, dphi)
            - np.einsum("ij,k->kij", eye, dphi))


def covariant_derivative(u_dir, s: VectorFieldH3, p) -> np.ndarray:
    """Levi-Civita ``nabla_U s`` at ``p``."""
    u_dir = np.asarray(u_dir)
    j = s.jet(p, 1)
    directional = sum(u_dir[i] * j.d(i) for i in range(3))
    return directional + np.einsum("kij,i,j->k", christoffel(p), u_dir, j.value)


def complex_connection_apply(u_dir, s: VectorFieldH3, p) -> np.ndarray:
    """``D_U s = nabla_U s + i T_U s``."""
    return (covariant_derivative(u_dir, s, p)
            + 1j * torsion_apply(u_dir, s(p), p))


def _gradient_matrix(u: VectorFieldH3, p) -> np.ndarray:
    """``M[i, k] = (nabla_{e_i} u)^k`` in coordinate directions."""
    return np.stack([covariant_derivative(e, u, p) for e in np.eye(3)])


def killing_residual(u: VectorFieldH3, p) -> float:
    """Size of the symmetric part of ``g(nabla u, .)``."""
    m = _gradient_matrix(u, p) / _as_point(p).y3 ** 2
    return float(np.abs(m + m.T).max())


def killing_pair_residual(h, p, u_dir, curvature: float = -1.0) -> float:
    """Defects of ``nabla_U k = U x v`` and ``nabla_U v = eps U x k``
    with ``v = -curl(k)/2``."""
    k = killing_field(h)
    v = curl_field(k).scale(-0.5)
    r1 = covariant_derivative(u_dir, k, p) - cross_product(u_dir, v(p), p)
    r2 = covariant_derivative(u_dir, v, p) - curvature * cross_product(u_dir, k(p), p)
    return float(max(np.abs(r1).max(), np.abs(r2).max()))


def equivariance_residual(g: MoebiusMap, h, p) -> float:
    """``|Psi(g p, ad_g h) - g_* Psi(p, h)|`` with ``Psi(p, h) = s_{k_h}(p)``."""
    lhs = canonical_lift(killing_field(g.adjoint(h)))(mobius_act_h3(g, p))
    rhs = pushforward(g, p) @ canonical_lift(killing_field(h))(p)
    return float(np.abs(lhs - rhs).max())


def random_moebius(rng: np.random.Generator, scale: float = 1.0) -> MoebiusMap:
    """Random element near the identity (for tests and demos)."""
    m = np.eye(2) + scale * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / 2
    if abs(np.linalg.det(m)) < 1e-3:
        m = m + np.eye(2)
    return MoebiusMap.from_matrix(m)


def rotation_about_j(axis: Sequence[float], angle: float) -> MoebiusMap:
    """Element of SU(2), which fixes ``j``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    pauli = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])
    gen = np.tensordot(n, pauli, axes=1)
    return MoebiusMap.from_matrix(math.cos(angle / 2) * np.eye(2)
                                  - 1j * math.sin(angle / 2) * gen)
