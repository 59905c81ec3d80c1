"""Holomorphic differentials of a Schottky-uniformized surface and the
period matrix.

The normalized differentials are the coset series

    phi_k(z) = (1/2 pi i) sum_{gamma in Gamma/<L_k>}
               (1/(z - gamma B_k) - 1/(z - gamma A_k)) dz,

``A_k`` (attracting, inside ``C_-k``) and ``B_k`` (repelling, inside
``C_k``) the fixed points of ``L_k``.  Every non-identity term has both poles
in one nested disk, so ``oint_{C_j} phi_k = delta_jk`` with ``C_j``
oriented counterclockwise.  ``beta_j`` runs from ``C_-j`` to ``C_j``
(from ``p`` to ``L_j^{-1} p``), which makes ``Im tau`` positive definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schottky import SchottkyGroup, fixed_points


class TailError(ValueError):
    """Series truncation error above tolerance; ``needed`` is an estimated length."""

    def __init__(self, message: str, needed: int):
        super().__init__(message)
        self.needed = needed


class PathPlanningError(ValueError):
    """No admissible beta path was found."""


def _apply(mat: np.ndarray, z: np.ndarray) -> np.ndarray:
    return (mat[0, 0] * z + mat[0, 1]) / (mat[1, 0] * z + mat[1, 1])


@dataclass
class Differential:
    """Truncated coset series; ``poles_b``/``poles_a`` are ``gamma B_k``/``gamma A_k``."""

    group: SchottkyGroup
    index: int
    maxlen: int
    poles_b: np.ndarray
    poles_a: np.ndarray
    level: np.ndarray
    tail: float

    def __call__(self, z) -> np.ndarray:
        """Coefficient of ``dz`` at ``z`` (array)."""
        z = np.asarray(z, dtype=complex)[..., None]
        terms = 1 / (z - self.poles_b) - 1 / (z - self.poles_a)
        return terms.sum(axis=-1) / (2j * math.pi)

    def truncated(self, maxlen: int) -> "Differential":
        keep = self.level <= maxlen
        return Differential(self.group, self.index, maxlen, self.poles_b[keep],
                            self.poles_a[keep], self.level[keep], math.nan)

    def contour_integral(self, circle, n: int = 256) -> complex:
        """Counterclockwise integral over a circle (trapezoid rule, spectral for
        integrands analytic near the circle)."""
        theta = 2 * np.pi * np.arange(n) / n
        z = circle.center + circle.radius * np.exp(1j * theta)
        dz = 1j * circle.radius * np.exp(1j * theta) * (2 * np.pi / n)
        return complex(np.sum(self(z) * dz))

    def primitive_increment(self, path: np.ndarray) -> complex:
        """``int phi`` along a densely sampled path from the continuous logarithm
        of ``(z - gamma B)/(z - gamma A)`` (no quadrature)."""
        path = np.asarray(path, dtype=complex)[:, None]
        ratio = (path - self.poles_b) / (path - self.poles_a)
        arg = np.unwrap(np.angle(ratio), axis=0)
        mod = np.log(np.abs(ratio))
        total = (mod[-1] - mod[0]) + 1j * (arg[-1] - arg[0])
        return complex(total.sum() / (2j * math.pi))

    def invariance_defect(self, z) -> float:
        """``max |phi(L_j z) L_j'(z) - phi(z)|`` over generators and points."""
        z = np.asarray(z, dtype=complex)
        out = 0.0
        for gen in self.group.generators:
            m = np.asarray(gen.matrix)
            w = _apply(m, z)
            deriv = 1 / (m[1, 0] * z + m[1, 1]) ** 2
            out = max(out, float(np.abs(self(w) * deriv - self(z)).max()))
        return out

    def cauchy_riemann_residual(self, z, h: float = 1e-5) -> float:
        """``|d/d zbar|`` of the series coefficient by central differences."""
        z = np.asarray(z, dtype=complex)
        dx = (self(z + h) - self(z - h)) / (2 * h)
        dy = (self(z + 1j * h) - self(z - 1j * h)) / (2 * h)
        return float(np.abs(0.5 * (dx + 1j * dy)).max())


def _coset_levels(group: SchottkyGroup, k: int, maxlen: int) -> list:
    """Per word length ``n``: images of ``(B_k, A_k)`` under reduced words of
    length ``n`` not ending in ``L_k^{+-1}``, with their first letters."""
    a, b = fixed_points(group.generators[k])
    g2 = 2 * group.genus
    levels = [(np.array([b]), np.array([a]), np.array([-1]))]
    excluded = {k, k + group.genus}
    pb, pa, first = levels[0]
    for n in range(1, maxlen + 1):
        nb, na, nf = [], [], []
        for y in range(g2):
            if n == 1:
                if y in excluded:
                    continue
                mask = np.ones(1, bool)
            else:
                mask = first != group.inverse_letter(y)
            m = group.letter_matrix(y)
            nb.append(_apply(m, pb[mask]))
            na.append(_apply(m, pa[mask]))
            nf.append(np.full(int(mask.sum()), y))
        if not nb:          # genus 1: the only coset is the identity
            break
        pb, pa, first = np.concatenate(nb), np.concatenate(na), np.concatenate(nf)
        levels.append((pb, pa, first))
    return levels


def _level_size(group: SchottkyGroup, pb, pa, first) -> float:
    """Bound on the level's contribution on the closure of the fundamental
    domain: ``sum |P - Q| / (d_P d_Q)`` with ``d`` the distance to the
    boundary of the level-1 disk containing the poles."""
    if len(pb) == 0:
        return 0.0
    centers = np.array([group.target_disk(x).center for x in first])
    radii = np.array([group.target_disk(x).radius for x in first])
    dp = radii - np.abs(pb - centers)
    dq = radii - np.abs(pa - centers)
    return float(np.sum(np.abs(pb - pa) / (dp * dq)) / (2 * math.pi))


def poincare_differential(group: SchottkyGroup, k: int, maxlen: int = 5,
                          tol: float = 1e-8) -> Differential:
    """Normalized differential ``phi_k`` (``k`` from 0) truncated at word length ``maxlen``."""
    if not 0 <= k < group.genus:
        raise ValueError("differential index out of range")
    levels = _coset_levels(group, k, maxlen)
    sizes = [_level_size(group, *lv) for lv in levels[1:]] or [0.0]
    if group.genus == 1 or sizes[-1] == 0:
        tail = 0.0
    elif len(sizes) >= 2 and sizes[-2] > 0:
        ratio = sizes[-1] / sizes[-2]
        if ratio >= 1:
            raise TailError("series terms do not decay", maxlen + 1)
        tail = sizes[-1] * ratio / (1 - ratio)
    else:
        tail = sizes[-1]
    if tail > tol:
        ratio = sizes[-1] / sizes[-2] if len(sizes) >= 2 and sizes[-2] > 0 else 0.5
        needed = maxlen + max(1, math.ceil(math.log(tol / tail) / math.log(ratio)))
        raise TailError(f"tail {tail:.2e} above {tol:.0e} at maxlen {maxlen}; "
                        f"about {needed} needed", needed)
    pb = np.concatenate([lv[0] for lv in levels])
    pa = np.concatenate([lv[1] for lv in levels])
    lev = np.concatenate([np.full(len(lv[0]), n) for n, lv in enumerate(levels)])
    return Differential(group, k, maxlen, pb, pa, lev, tail)


# beta paths --------------------------------------------------------------------------------

@dataclass
class BetaPath:
    index: int
    vertices: list

    def sample(self, per_unit: int = 4000) -> np.ndarray:
        pts = []
        for p, q in zip(self.vertices[:-1], self.vertices[1:]):
            n = max(64, int(abs(q - p) * per_unit))
            pts.append(p + (q - p) * np.linspace(0, 1, n, endpoint=False))
        pts.append(np.array([self.vertices[-1]]))
        return np.concatenate(pts)

    def to_json_dict(self) -> dict:
        return {"index": self.index, "vertices": [[v.real, v.imag] for v in self.vertices]}


def _segment_hits(p: complex, q: complex, circle, margin: float) -> bool:
    """Whether the open segment ``(p, q)`` enters the closed disk enlarged by
    ``margin`` (endpoints on the circle itself are allowed)."""
    d = q - p
    s = np.linspace(0, 1, 401)[1:-1]
    pts = p + d * s
    inside = np.abs(pts - circle.center) < circle.radius * (1 - 1e-9) + margin
    return bool(inside.any())


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return ((b - a).conjugate() * (c - a)).imag
    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _route(p: complex, q: complex, circles: list, depth: int = 0) -> list:
    """Polyline from ``p`` to ``q`` around the disks: each blocking disk is
    passed through a waypoint pushed away from its center."""
    for c in circles:
        margin = 0.0
        if _segment_hits(p, q, c, margin):
            if depth > 6:
                raise PathPlanningError("beta path planner did not converge")
            d = q - p
            t = ((c.center - p) * d.conjugate()).real / abs(d) ** 2
            foot = p + t * d
            away = foot - c.center
            if abs(away) < 1e-12:
                away = 1j * d
            way = c.center + away / abs(away) * 1.5 * c.radius
            return _route(p, way, circles, depth + 1)[:-1] + _route(way, q, circles, depth + 1)
    return [p, q]


def plan_beta_paths(group: SchottkyGroup) -> list:
    """``beta_j`` from the point of ``C_-j`` facing ``C_j`` to its image under
    ``L_j^{-1}``; straight where possible, detoured around blocking disks.
    Paths of different handles must not cross."""
    circles = group.all_circles
    paths = []
    for j in range(group.genus):
        src, dst = group.circles[j]
        u = (src.center - dst.center) / abs(src.center - dst.center)
        p = dst.center + dst.radius * u
        inv = np.asarray(group.generators[j].inverse().matrix)
        q = complex(_apply(inv, np.array([p]))[0])
        path = BetaPath(j, _route(p, q, circles))
        for other in paths:
            for a1, a2 in zip(path.vertices[:-1], path.vertices[1:]):
                for b1, b2 in zip(other.vertices[:-1], other.vertices[1:]):
                    if _segments_cross(a1, a2, b1, b2):
                        raise PathPlanningError(
                            f"beta_{j + 1} crosses beta_{other.index + 1}: "
                            "the marking would not be canonical")
        paths.append(path)
    return paths


def _graded_rule(length: float, near: float, nodes: int = 16) -> tuple:
    """Composite Gauss-Legendre rule on ``[0, 1]`` refined geometrically
    towards both ends (singularities at distance ``~ near`` beyond them)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    h = max(near / length, 1e-6)
    breaks = [0.0]
    while breaks[-1] < 0.5:
        breaks.append(min(0.5, (breaks[-1] + h) * 2 if breaks[-1] else h))
    breaks = np.array(breaks)
    breaks = np.unique(np.concatenate([breaks, 1 - breaks]))
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        xs.append(0.5 * (b - a) * x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def path_integral(diff: Differential, path: BetaPath, nodes: int = 16) -> complex:
    near = min(c.radius for c in diff.group.all_circles)
    total = 0j
    for p, q in zip(path.vertices[:-1], path.vertices[1:]):
        s, w = _graded_rule(abs(q - p), near * 0.1, nodes)
        total += complex(np.sum(diff(p + (q - p) * s) * w) * (q - p))
    return total


# period matrix --------------------------------------------------------------------------

@dataclass
class PeriodMatrix:
    tau: np.ndarray
    sym_defect: float
    min_eig_im: float
    det_im_tau: float
    paths: list = field(default_factory=list)
    tau_by_primitive: np.ndarray | None = None
    tail: float = 0.0

    @property
    def route_defect(self) -> float:
        """Quadrature against continuous-logarithm periods."""
        if self.tau_by_primitive is None:
            return math.nan
        return float(np.abs(self.tau - self.tau_by_primitive).max())

    def diagonal_leading_terms(self, group: SchottkyGroup) -> np.ndarray:
        """``log q_k / (2 pi i)``."""
        from .schottky import multiplier
        return np.array([np.log(multiplier(g)) / (2j * math.pi) for g in group.generators])

    def to_json_dict(self) -> dict:
        return {"tau": [[[complex(v).real, complex(v).imag] for v in row] for row in self.tau],
                "sym_defect": self.sym_defect, "min_eig_im": self.min_eig_im,
                "det_im_tau": self.det_im_tau, "route_defect": self.route_defect,
                "tail": self.tail, "paths": [p.to_json_dict() for p in self.paths]}


def period_matrix(group: SchottkyGroup, maxlen: int = 5, tol: float = 1e-8,
                  nodes: int = 16) -> PeriodMatrix:
    """``tau_ij = int_{beta_j} phi_i`` by quadrature on the planned paths."""
    g = group.genus
    diffs = [poincare_differential(group, i, maxlen, tol) for i in range(g)]
    paths = plan_beta_paths(group)
    tau = np.array([[path_integral(diffs[i], paths[j], nodes) for j in range(g)]
                    for i in range(g)])
    tau_log = np.array([[diffs[i].primitive_increment(paths[j].sample()) for j in range(g)]
                        for i in range(g)])
    im = tau.imag
    sym = 0.5 * (im + im.T)
    return PeriodMatrix(tau, float(np.abs(tau - tau.T).max()),
                        float(np.linalg.eigvalsh(sym).min()), float(np.linalg.det(im)),
                        paths, tau_log, max(d.tail for d in diffs))
