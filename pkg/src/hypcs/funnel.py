"""Funnel and cusp model metrics, their frames and connection forms.

A funnel is ``g = (dx^2 + h(x)) / x^2`` on ``(0, x0] x patch`` with
``h(x) = h0((1 + x^2 A/2).,(1 + x^2 A/2).)``, ``h0 = e^{2 phi}|dz|^2`` and
``A = Id/2 + h0^{-1} k`` where ``k = Re(f dz^2)``.  Coordinates on the
3-patch are ``(x, y1, y2)`` in this (positive) order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exprcalc import compile_expr, jets
from .exprcalc.jets import Jet
from .specfile import Section, SpecError, parse_spec
from .formcalc import (MatrixForm, cs_form, curvature_form, exterior_d,
                       sup_norm, wedge)

__all__ = [
    "FramedMetric", "HyperbolicPatch", "QuadDiff", "FunnelData", "CuspPatch",
    "DEFAULT_PATCHES", "DEFAULT_QHDS", "default_funnels", "load_funnel_spec",
    "funnel_metric", "connection_forms", "sectional_curvature",
    "flatness_residual", "cs_decomposition_residual", "conformal_change_residual",
    "alpha_omega_curvature_residual", "tr_t_cubed_residual", "frame_evenness",
    "boundary_even_part", "cusp_forms", "fit_decay_exponent", "LEVI_CIVITA",
]


def _levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for (i, j, k), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                         (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps[i, j, k] = s
    return eps


LEVI_CIVITA = _levi_civita()


def _permute(j: Jet, axes: Sequence[int]) -> Jet:
    """Permute the last ``len(axes)`` value axes of a jet."""
    n = len(axes)
    lead = list(range(j.c.ndim - n))
    return Jet(j.space, np.transpose(j.c, lead + [len(lead) + a for a in axes]))


def _scalar_times(s: Jet, mat) -> Jet:
    """Scalar jet (with batch axes) times a constant matrix."""
    return s[..., None, None] * np.asarray(mat, dtype=complex)


# generic Levi-Civita data ------------------------------------------------------

class FramedMetric:
    """A metric on a 3-patch together with a frame.

    ``metric(coords)`` returns the 3x3 component jet and ``frame(coords)``
    the 3x3 jet whose columns are the frame vectors.  ``coords`` holds
    ``3 + nparams`` jets; only the first three are patch coordinates.
    """

    dim = 3

    def __init__(self, metric: Callable, frame: Callable, nparams: int = 0,
                 name: str = ""):
        self.metric = metric
        self.frame = frame
        self.nparams = nparams
        self.name = name

    # raw jets ---------------------------------------------------------
    def _seeds(self, point, order):
        return Jet.seeds([np.asarray(p, dtype=float) for p in point], order)

    def christoffel_jet(self, coords) -> Jet:
        """``Gam[c, a, b] = Gamma^a_{cb}``, one order below ``coords``."""
        g = self.metric(coords)
        dg = jets.stack([g.diff(c) for c in range(3)], axis=-3)   # [c, d, b]
        first = (dg + _permute(dg, (2, 1, 0)) - _permute(dg, (1, 0, 2))) * 0.5
        ginv = jets.inv(g.truncate(dg.order))
        return jets.einsum("...ad,...cdb->...cab", ginv, first)

    def _connection_jet(self, point, order) -> Jet:
        coords = self._seeds(point, order + 1)
        g = self.metric(coords)
        e = self.frame(coords)
        gam = self.christoffel_jet(coords)
        de = jets.stack([e.diff(c) for c in range(3)], axis=-3)   # [c, b, j]
        e0 = e.truncate(order)
        cov = de + jets.einsum("...cbd,...dj->...cbj", gam, e0)
        dual = e0.T @ g.truncate(order)                          # rows: coframe
        return jets.einsum("...ib,...cbj->...cij", dual, cov)

    def _coframe_jet(self, point, order) -> Jet:
        coords = self._seeds(point, order)
        e = self.frame(coords)
        return e.T @ self.metric(coords)                          # [k, c]

    # forms --------------------------------------------------------------
    def connection_form(self) -> MatrixForm:
        """``omega_ij(Y) = g(nabla_Y S_j, S_i)``."""
        return MatrixForm(1, 3, 3, nparams=self.nparams,
                          jet_fn=self._connection_jet, name="omega")

    def torsion_form(self) -> MatrixForm:
        """Matrix of ``T_Y = -Y x .`` in the frame: ``T_12 = S^3`` etc."""
        def jet_fn(point, order):
            cof = self._coframe_jet(point, order)
            rows = []
            for c in range(3):
                acc = None
                for k in range(3):
                    t = _scalar_times(cof[..., k, c], LEVI_CIVITA[:, :, k])
                    acc = t if acc is None else acc + t
                rows.append(acc)
            return jets.stack(rows, axis=-3)
        return MatrixForm(1, 3, 3, nparams=self.nparams, jet_fn=jet_fn, name="T")

    def volume_form(self) -> MatrixForm:
        def jet_fn(point, order):
            g = self.metric(self._seeds(point, order))
            return jets.sqrt(jets.det3(g))[..., None, None, None]
        return MatrixForm(3, 3, 1, nparams=self.nparams, jet_fn=jet_fn, name="dvol")

    def alpha_form(self, log_factor: Callable) -> MatrixForm:
        """``alpha_ij(Y) = g(Y,S_i) S_j(a) - g(Y,S_j) S_i(a)`` for ``a = log_factor``."""
        def jet_fn(point, order):
            coords = self._seeds(point, order + 1)
            a = log_factor(coords)
            da = jets.stack([a.diff(c) for c in range(3)], axis=-1)
            e = self.frame(coords).truncate(order)
            ge = self.metric(coords).truncate(order) @ e         # [c, i]
            sa = jets.einsum("...c,...cj->...j", da, e)          # S_j(a)
            m = jets.einsum("...ci,...j->...cij", ge, sa)
            return m - _permute(m, (0, 2, 1))
        return MatrixForm(1, 3, 3, nparams=self.nparams, jet_fn=jet_fn, name="alpha")

    # curvature (independent of the frame) ----------------------------------
    def riemann(self, point) -> np.ndarray:
        """``R[a, b, c, d] = R^a_{bcd}`` so that ``R(X,Y)Z = R^a_{bcd} Z^b X^c Y^d``."""
        coords = self._seeds(point, 2)
        gam = self.christoffel_jet(coords)                        # order 1
        g0 = gam.value                                            # [c, a, b]
        dgam = np.stack([gam.d(e) for e in range(3)], axis=-4)    # [e, c, a, b]
        # d_c Gamma^a_{db} - d_d Gamma^a_{cb}
        term = np.einsum("...cdab->...abcd", dgam)
        r = term - np.swapaxes(term, -1, -2)
        # Gamma^a_{ce} Gamma^e_{db}: contract e
        quad = np.einsum("...cae,...deb->...abcd", g0, g0)
        return r + quad - np.swapaxes(quad, -1, -2)

    def metric_values(self, point) -> np.ndarray:
        return self.metric(self._seeds(point, 0)).value.real

    def sectional_curvature(self, point, u, v) -> np.ndarray:
        u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        r = self.riemann(point).real
        g = self.metric_values(point)
        ruvv = np.einsum("...abcd,...b,...c,...d->...a", r, v, u, v)
        num = np.einsum("...a,...ab,...b->...", ruvv, g, u)
        guu = np.einsum("...a,...ab,...b->...", u, g, u)
        gvv = np.einsum("...a,...ab,...b->...", v, g, v)
        guv = np.einsum("...a,...ab,...b->...", u, g, v)
        den = guu * gvv - guv ** 2
        if np.any(np.abs(den) < 1e-14 * (guu * gvv)):
            raise ValueError("degenerate plane")
        return num / den


# boundary data -------------------------------------------------------------

@dataclass(frozen=True)
class HyperbolicPatch:
    """Rectangle in ``(y1, y2)`` with conformal factor ``phi``."""

    phi: str
    y1_range: tuple = (0.0, 1.0)
    y2_range: tuple = (1.0, 2.0)
    periodic: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "_phi", compile_expr(self.phi, ["y1", "y2"]))

    def conformal_factor(self, y1, y2):
        out = self._phi(y1, y2)
        if isinstance(out, Jet):
            return out
        return Jet.constant(y1.space, np.broadcast_to(out, y1.shape)) \
            if isinstance(y1, Jet) else out

    def boundary_metric(self, y1, y2) -> Jet:
        e2 = jets.exp(self.conformal_factor(y1, y2) * 2)
        return _scalar_times(e2, np.eye(2))

    def gauss_curvature(self, y1, y2) -> np.ndarray:
        y = Jet.seeds([np.asarray(y1, float), np.asarray(y2, float)], 2)
        phi = self.conformal_factor(*y)
        lap = phi.d(0, 0) + phi.d(1, 1)
        return (-np.exp(-2 * phi.value) * lap).real

    def sample(self, rng: np.random.Generator, n: int) -> tuple:
        y1 = rng.uniform(*self.y1_range, size=n)
        y2 = rng.uniform(*self.y2_range, size=n)
        return y1, y2

    @property
    def area_box(self) -> float:
        return (self.y1_range[1] - self.y1_range[0]) * (self.y2_range[1] - self.y2_range[0])


@dataclass(frozen=True)
class QuadDiff:
    """Quadratic differential ``scale * f(z) dz^2`` with ``z = y1 + i y2``.

    The induced real tensor is ``k = Re(f dz^2) = u dy1^2 - u dy2^2 - 2 v dy1 dy2``
    with ``u = Re f`` and ``v = Im f``.
    """

    f: str = "0"
    scale: complex = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "_f", compile_expr(self.f, ["z"]))

    def value(self, y1, y2):
        z = y1 + 1j * y2
        out = self._f(z)
        if not isinstance(out, Jet) and isinstance(y1, Jet):
            out = Jet.constant(y1.space, np.broadcast_to(out, y1.shape))
        return out * self.scale

    def tensor(self, y1, y2) -> Jet:
        """Components of ``k`` in ``(dy1, dy2)``."""
        f = self.value(y1, y2)
        u, v = f.real, f.imag
        return jets.stack([jets.stack([u, -v], axis=-1),
                           jets.stack([-v, -u], axis=-1)], axis=-2)

    def rotated(self) -> "QuadDiff":
        """``J k``: multiplication of the differential by ``-i``."""
        return QuadDiff(self.f, self.scale * -1j, self.name + "_J")

    def cauchy_riemann_residual(self, y1, y2) -> float:
        y = Jet.seeds([np.asarray(y1, float), np.asarray(y2, float)], 1)
        f = self.value(*y)
        return float(np.abs(f.d(0) * 1j - f.d(1)).max())


def _christoffel_2d(h: Jet) -> Jet:
    dh = jets.stack([h.diff(c) for c in range(2)], axis=-3)
    first = (dh + _permute(dh, (2, 1, 0)) - _permute(dh, (1, 0, 2))) * 0.5
    return jets.einsum("...ad,...cdb->...cab", jets.inv(h.truncate(dh.order)), first)


def tt_residuals(patch: HyperbolicPatch, qd: QuadDiff, y1, y2) -> tuple:
    """``(|Tr_h0 k|, |div_h0 k|)`` maxima at the sample points."""
    y = Jet.seeds([np.asarray(y1, float), np.asarray(y2, float)], 1)
    h = patch.boundary_metric(*y)
    k = qd.tensor(*y)
    gam = _christoffel_2d(h)                                     # [c, a, b]
    dk = jets.stack([k.diff(c) for c in range(2)], axis=-3)      # [c, a, b]
    k0 = k.truncate(0)
    # (nabla_c k)_{ab} = d_c k_ab - Gam^e_{ca} k_eb - Gam^e_{cb} k_ae
    nab = dk - jets.einsum("...cea,...eb->...cab", gam, k0) \
        - jets.einsum("...ceb,...ae->...cab", gam, k0)
    hinv = jets.inv(h.truncate(0)).value
    div = np.einsum("...ca,...cab->...b", hinv, nab.value)
    tr = np.einsum("...ab,...ab->...", hinv, k0.value)
    return float(np.abs(tr).max()), float(np.abs(div).max())


# funnels -------------------------------------------------------------------

@dataclass
class FunnelData:
    """Boundary data of a funnel.  ``identity_part`` other than 1/2, or a
    patch that is not hyperbolic, is only accepted with ``sanity=True``."""

    patch: HyperbolicPatch
    qd: QuadDiff = field(default_factory=QuadDiff)
    x0: float = 0.5
    identity_part: float = 0.5
    sanity: bool = False
    name: str = ""

    def __post_init__(self):
        if self.x0 <= 0:
            raise ValueError("cutoff x0 must be positive")
        rng = np.random.default_rng(12345)
        y1, y2 = self.patch.sample(rng, 64)
        if not self.sanity:
            if self.identity_part != 0.5:
                raise ValueError("admissible funnels have A = Id/2 + h0^{-1} k")
            if np.abs(self.patch.gauss_curvature(y1, y2) + 1).max() > 1e-8:
                raise ValueError("boundary metric is not hyperbolic")
            if self.qd.cauchy_riemann_residual(y1, y2) > 1e-8:
                raise ValueError("quadratic differential is not holomorphic")
        ys = Jet.seeds([y1, y2], 0)
        eig = np.linalg.eigvalsh(self.endomorphism(*ys).value.real)
        if np.min(1 + self.x0 ** 2 * eig / 2) <= 0:
            raise ValueError("1 + x^2 A/2 degenerates before the cutoff")

    # boundary tensors ------------------------------------------------------
    def endomorphism(self, y1, y2) -> Jet:
        """``A`` with ``h0(A., .) = h2 = k + identity_part * h0``."""
        e2 = jets.exp(self.patch.conformal_factor(y1, y2) * -2)
        k = self.qd.tensor(y1, y2)
        return _scalar_times(e2 * 0 + self.identity_part, np.eye(2)) \
            + k * e2[..., None, None]

    def h_of_x(self, x, y1, y2) -> Jet:
        h0 = self.patch.boundary_metric(y1, y2)
        p = _scalar_times(x * 0 + 1, np.eye(2)) \
            + self.endomorphism(y1, y2) * (x * x * 0.5)[..., None, None]
        return p.T @ h0 @ p

    def compact_metric(self, coords) -> Jet:
        """``x^2 g = dx^2 + h(x)``."""
        x, y1, y2 = coords[:3]
        h = self.h_of_x(x, y1, y2)
        one, zero = x * 0 + 1, x * 0
        return jets.stack([jets.stack([one, zero, zero], axis=-1),
                           jets.stack([zero, h[..., 0, 0], h[..., 0, 1]], axis=-1),
                           jets.stack([zero, h[..., 1, 0], h[..., 1, 1]], axis=-1)],
                          axis=-2)

    def metric(self, coords) -> Jet:
        x = coords[0]
        return self.compact_metric(coords) * jets.reciprocal(x * x)[..., None, None]

    def compact_frame(self, coords) -> Jet:
        """Gram-Schmidt of ``(d_x, d_y1, d_y2)`` for ``x^2 g``."""
        x, y1, y2 = coords[:3]
        h = self.h_of_x(x, y1, y2)
        h11, h12, h22 = h[..., 0, 0], h[..., 0, 1], h[..., 1, 1]
        n1 = jets.reciprocal(jets.sqrt(h11))
        n2 = jets.reciprocal(jets.sqrt(h22 - h12 * h12 / h11))
        one, zero = x * 0 + 1, x * 0
        return jets.stack([jets.stack([one, zero, zero], axis=-1),
                           jets.stack([zero, n1, -h12 / h11 * n2], axis=-1),
                           jets.stack([zero, zero, n2], axis=-1)], axis=-2)

    def frame(self, coords) -> Jet:
        return self.compact_frame(coords) * coords[0][..., None, None]

    def framed(self) -> FramedMetric:
        return FramedMetric(self.metric, self.frame, name="g")

    def compact_framed(self) -> FramedMetric:
        return FramedMetric(self.compact_metric, self.compact_frame, name="g_hat")

    def sample(self, rng: np.random.Generator, n: int, x_range=None) -> list:
        lo, hi = x_range or (0.05, self.x0)
        y1, y2 = self.patch.sample(rng, n)
        return [rng.uniform(lo, hi, size=n), y1, y2]


@dataclass
class ConnectionForms:
    omega: MatrixForm
    torsion: MatrixForm
    alpha: MatrixForm
    omega_hat: MatrixForm
    dvol: MatrixForm


def connection_forms(funnel: FunnelData) -> ConnectionForms:
    """``omega, T, alpha, omega_hat`` in the Gram-Schmidt frame."""
    g, ghat = funnel.framed(), funnel.compact_framed()
    return ConnectionForms(
        omega=g.connection_form(), torsion=g.torsion_form(),
        alpha=g.alpha_form(lambda c: jets.log(c[0])),
        omega_hat=ghat.connection_form(), dvol=g.volume_form())


def funnel_metric(funnel: FunnelData, x, y1, y2) -> np.ndarray:
    """Components of ``g`` in ``(x, y1, y2)``."""
    if np.any(np.asarray(x) <= 0):
        raise ValueError("x must be positive")
    coords = Jet.seeds([np.asarray(v, float) for v in (x, y1, y2)], 0)
    return funnel.metric(coords).value.real


def sectional_curvature(funnel_or_metric, point, u, v) -> np.ndarray:
    fm = funnel_or_metric.framed() if isinstance(funnel_or_metric, FunnelData) \
        else funnel_or_metric
    return fm.sectional_curvature(point, u, v)


# pointwise identities ----------------------------------------------------------

def flatness_residual(funnel: FunnelData, point) -> float:
    """Max of ``|d omega + omega^2 - T^2|`` and ``|dT + T^omega + omega^T|``."""
    f = connection_forms(funnel)
    om, t = f.omega, f.torsion
    real = exterior_d(om) + wedge(om, om) - wedge(t, t)
    imag = exterior_d(t) + wedge(t, om) + wedge(om, t)
    return max(sup_norm(real, point), sup_norm(imag, point))


def complex_curvature_residual(funnel: FunnelData, point) -> float:
    """``|d(omega + iT) + (omega + iT)^2|``."""
    f = connection_forms(funnel)
    return sup_norm(curvature_form(f.omega + f.torsion * 1j), point)


def cs_decomposition_residual(funnel: FunnelData, point) -> float:
    """``cs(omega + iT) - 8i dvol - i d Tr(T ^ omega) - cs(omega)``."""
    f = connection_forms(funnel)
    lhs = cs_form(f.omega + f.torsion * 1j)
    rhs = f.dvol * 8j + exterior_d(wedge(f.torsion, f.omega).trace()) * 1j \
        + cs_form(f.omega)
    return sup_norm(lhs - rhs, point)


def tr_t_cubed_residual(funnel_or_metric, point) -> float:
    fm = funnel_or_metric.framed() if isinstance(funnel_or_metric, FunnelData) \
        else funnel_or_metric
    t = fm.torsion_form()
    return sup_norm(wedge(wedge(t, t), t).trace() - fm.volume_form() * 6.0, point)


def conformal_change_residual(funnel: FunnelData, point) -> float:
    """``cs(g_hat, S_hat) - cs(g, S) - d Tr(alpha ^ omega)``."""
    f = connection_forms(funnel)
    diff = cs_form(f.omega_hat) - cs_form(f.omega) \
        - exterior_d(wedge(f.alpha, f.omega).trace())
    return sup_norm(diff, point)


def alpha_omega_curvature_residual(funnel: FunnelData, point) -> float:
    """``|Tr(alpha ^ Omega)|``."""
    f = connection_forms(funnel)
    return sup_norm(wedge(f.alpha, curvature_form(f.omega)).trace(), point)


def frame_evenness(funnel: FunnelData, y1, y2) -> float:
    """``max |d_x S_hat|`` at ``x = 0``."""
    coords = Jet.seeds([np.zeros_like(np.asarray(y1, float)), y1, y2], 1)
    return float(np.abs(funnel.compact_frame(coords).d(0)).max())


def boundary_even_part(funnel: FunnelData, eps: float, y1, y2) -> float:
    """Even part in ``x`` of ``Tr(alpha ^ omega)(d_y1, d_y2)`` at ``|x| = eps``."""
    f = connection_forms(funnel)
    form = wedge(f.alpha, f.omega).trace()
    # the (y1, y2) component is the last one in the ordering of 2-combinations
    vals = []
    for x in (eps, -eps):
        pt = [np.full_like(np.asarray(y1, float), x), y1, y2]
        vals.append(form(pt)[..., 2, 0, 0])
    return float(np.abs((vals[0] + vals[1]) / 2).max())


# cusps ------------------------------------------------------------------------

@dataclass(frozen=True)
class CuspPatch:
    """Cusp ``(dy^2 + h)/y^2`` over a flat torus, ``y = e^t``.

    The compact frame is ``R(y1, y2) (d_y, e1, e2)`` with ``e`` orthonormal
    for ``h`` and ``R`` a rotation field on the torus (constant in ``y``).
    """

    h: tuple = ((1.0, 0.0), (0.0, 1.0))
    twist: float = 0.4
    name: str = ""

    def __post_init__(self):
        hm = np.asarray(self.h, dtype=float)
        if hm.shape != (2, 2) or np.abs(hm - hm.T).max() > 0 \
                or np.linalg.eigvalsh(hm).min() <= 0:
            raise ValueError("torus metric must be symmetric positive definite")

    def compact_metric(self, coords) -> Jet:
        y = coords[0]
        m = np.zeros((3, 3))
        m[0, 0] = 1.0
        m[1:, 1:] = np.asarray(self.h)
        return _scalar_times(y * 0 + 1, m)

    def metric(self, coords) -> Jet:
        y = coords[0]
        return self.compact_metric(coords) * jets.reciprocal(y * y)[..., None, None]

    def rotation(self, y1, y2) -> Jet:
        b1 = jets.sin(y1 * (2 * math.pi)) * self.twist
        b2 = jets.cos(y2 * (2 * math.pi)) * self.twist
        c1, s1, c2, s2 = jets.cos(b1), jets.sin(b1), jets.cos(b2), jets.sin(b2)
        one, zero = y1 * 0 + 1, y1 * 0
        rx = jets.stack([jets.stack([one, zero, zero], axis=-1),
                         jets.stack([zero, c1, -s1], axis=-1),
                         jets.stack([zero, s1, c1], axis=-1)], axis=-2)
        rz = jets.stack([jets.stack([c2, -s2, zero], axis=-1),
                         jets.stack([s2, c2, zero], axis=-1),
                         jets.stack([zero, zero, one], axis=-1)], axis=-2)
        return rz @ rx

    def compact_frame(self, coords) -> Jet:
        hm = np.asarray(self.h)
        base = np.zeros((3, 3))
        base[0, 0] = 1.0
        e1 = np.array([1.0, 0.0]) / math.sqrt(hm[0, 0])
        e2 = np.array([-hm[0, 1] / hm[0, 0], 1.0])
        e2 = e2 / math.sqrt(e2 @ hm @ e2)
        base[1:, 1], base[1:, 2] = e1, e2
        return base @ self.rotation(coords[1], coords[2])

    def frame(self, coords) -> Jet:
        return self.compact_frame(coords) * coords[0][..., None, None]


def cusp_forms(cusp: CuspPatch, ys, y1, y2) -> dict:
    """Sup norms (over the torus samples) of ``cs(g_hat, S_hat)``,
    ``cs(g, S)`` and ``Tr(alpha_hat ^ omega_hat)`` at each ``y``."""
    g = FramedMetric(cusp.metric, cusp.frame)
    ghat = FramedMetric(cusp.compact_metric, cusp.compact_frame)
    om, omh = g.connection_form(), ghat.connection_form()
    cs_hat, cs_g = cs_form(omh), cs_form(om)
    # with g = y^{-2} g_hat the roles are reversed: omega = omega_hat + alpha_hat
    boundary = wedge(om - omh, omh).trace()
    y1, y2 = np.asarray(y1, float), np.asarray(y2, float)
    out = {"y": np.asarray(ys, float), "cs_hat": [], "cs": [], "tr_alpha_omega": []}
    for y in out["y"]:
        pt = [np.full_like(y1, y), y1, y2]
        out["cs_hat"].append(sup_norm(cs_hat, pt))
        out["cs"].append(sup_norm(cs_g, pt))
        out["tr_alpha_omega"].append(sup_norm(boundary, pt))
    return {k: np.asarray(v) for k, v in out.items()}


def fit_decay_exponent(ys, values) -> float:
    """Least-squares slope of ``log values`` against ``log y``."""
    slope, _ = np.polyfit(np.log(ys), np.log(values), 1)
    return float(slope)


# defaults and spec files -----------------------------------------------------------

DEFAULT_PATCHES = {
    "halfplane": HyperbolicPatch("-log(y2)", (0.0, 1.0), (1.0, 2.0), False, "halfplane"),
    "halfplane_periodic": HyperbolicPatch("-log(y2)", (0.0, 1.0), (1.0, 2.0), True,
                                          "halfplane_periodic"),
    "disk": HyperbolicPatch("log(2/(1-y1^2-y2^2))", (-0.5, 0.5), (-0.5, 0.5), False,
                            "disk"),
    "band": HyperbolicPatch("-log(cos(y2))", (0.0, 1.0), (-0.6, 0.6), True, "band"),
}

DEFAULT_QHDS = {
    "zero": QuadDiff("0", 1.0, "zero"),
    "constant": QuadDiff("1", 0.3, "constant"),
    "linear": QuadDiff("z", 0.3, "linear"),
    "exponential": QuadDiff("exp(2*pi*i*z)", 0.3, "exponential"),
    "quadratic": QuadDiff("z^2", 0.2, "quadratic"),
}


def default_funnels(x0: float = 0.5) -> list:
    """The 20 admissible funnels (every default QHD on every default patch)."""
    return [FunnelData(p, q, x0, name=f"{pn}/{qn}")
            for pn, p in DEFAULT_PATCHES.items() for qn, q in DEFAULT_QHDS.items()]


def read_spec_source(source: str) -> str:
    """Return spec text: ``source`` itself if it looks like text, else the file contents."""
    if "\n" in source or "[" in source:
        return source
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def _boolean(section, key: str, default: bool) -> bool:
    raw = section.get(key)
    if raw is None:
        return default
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise SpecError(f"{key} is not a boolean", section.offsets[key])


def _expression(section, key: str, default: str, variables: list) -> str:
    raw = section.get(key, default)
    try:
        compile_expr(raw, variables)
    except Exception as exc:  # parse errors of any flavour become spec errors
        base = section.offsets.get(key, section.offset)
        inner = getattr(exc, "offset", None)
        message = str(exc).rsplit(" at byte offset", 1)[0]
        where = base + inner if isinstance(inner, int) else base
        raise SpecError(f"{key}: {message}", where) from None
    return raw


def load_funnel_spec(source: str) -> tuple:
    """Parse a funnel spec (file path or text) into ``(FunnelData, grid)``.

    Sections: ``[patch]`` (phi, y1, y2, periodic), ``[qhd]`` (f, scale) and
    ``[funnel]`` (x0, grid).  Errors are :class:`SpecError` with a byte offset.
    """
    sections = parse_spec(read_spec_source(source))
    if "patch" not in sections:
        raise SpecError("funnel spec needs a [patch] section", 0)
    p = sections["patch"]
    box = {}
    for key, default in (("y1", "0, 1"), ("y2", "1, 2")):
        vals = p.numbers(key) if key in p.values else [float(v) for v in default.split(",")]
        if len(vals) != 2 or not vals[0] < vals[1]:
            raise SpecError(f"{key} must be an increasing pair", p.offsets.get(key, p.offset))
        box[key] = tuple(vals)
    patch = HyperbolicPatch(_expression(p, "phi", "-log(y2)", ["y1", "y2"]), box["y1"], box["y2"],
                            _boolean(p, "periodic", False), p.get("name", "patch"))
    q = sections.get("qhd") or Section("qhd", 0)
    qd = QuadDiff(_expression(q, "f", "0", ["z"]), q.number("scale", 1.0, complex))
    fsec = sections.get("funnel") or Section("funnel", 0)
    grid = fsec.number("grid", 16, int)
    if grid < 2:
        raise SpecError("grid must be at least 2", fsec.offsets["grid"])
    try:
        funnel = FunnelData(patch, qd, fsec.number("x0", 0.5), name=p.get("name", ""))
    except ValueError as exc:
        raise SpecError(f"inadmissible funnel: {exc}", fsec.offset) from None
    return funnel, grid
