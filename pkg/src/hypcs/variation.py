"""One- and two-parameter families of funnels and the first variation of the
Chern-Simons invariant, the renormalized volume and the fiber curvature.

A :class:`FunnelFamily` moves the boundary data by a pullback
``h0^t = psi_t^* h0`` with ``psi_t = id + t V`` together with
``k^t = psi_t^* Re((f + t f_dot) dz^2)``.  Every slice is then exactly
hyperbolic with a TT tensor ``k^t`` and ``Tr A^t = 1``, so the slices are
admissible by construction.  ``h0_dot = L_V h0`` and the fiber direction
``f_dot`` are the two independent inputs.

Boundary densities are 2-forms on ``{x = eps}`` evaluated on
``(d_y1, d_y2)`` and divided by the ``h0`` area density; their finite parts
are taken point by point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .exprcalc import jets
from .exprcalc.jets import Jet
from .exprcalc.parser import compile_expr
from .formcalc.forms import MatrixForm, curvature_form, wedge
from .formcalc.quadrature import Axis
from .funnel import (DEFAULT_PATCHES, FramedMetric, FunnelData, HyperbolicPatch,
                     QuadDiff, _expression, _permute, _scalar_times, read_spec_source,
                     tt_residuals)
from .renorm import _log_gauss, fp_extract
from .specfile import SpecError, parse_spec

J_MATRIX = np.array([[0.0, -1.0], [1.0, 0.0]])

# Displacements V with L_V h0 = Re(dz^2) (TT) for the default patches.
TT_DISPLACEMENTS = {
    "halfplane": ("-(y1^3-3*y1*y2^2)/12", "-(y1^2+y2^2)*y2/4"),
    "band": ("y1/2", "-sin(2*y2)/4"),
    "disk": ("re(((y1-i*y2) - (y1+i*y2)*(y1-i*y2)^2 + (y1+i*y2)^2*(y1-i*y2)^3/3)/8"
             " - (y1+i*y2)^3/24)",
             "im(((y1-i*y2) - (y1+i*y2)*(y1-i*y2)^2 + (y1+i*y2)^2*(y1-i*y2)^3/3)/8"
             " - (y1+i*y2)^3/24)"),
}
TT_DISPLACEMENTS["halfplane_periodic"] = TT_DISPLACEMENTS["halfplane"]


# jet helpers -----------------------------------------------------------------------

def restrict_last_variable(jet: Jet) -> Jet:
    """Restriction of a jet to the hyperplane where its last variable is 0."""
    sp = jet.space
    sub = jets.jet_space(sp.nvars - 1, sp.order)
    keep = [sp.index[m + (0,)] for m in sub.monomials]
    return Jet(sub, jet.c[keep])


def _embed_t_independent(jet: Jet, space) -> Jet:
    """Inverse of :func:`restrict_last_variable` (constant in the new variable)."""
    c = np.zeros((space.size,) + jet.c.shape[1:], dtype=complex)
    for m, i in space.index.items():
        if m[-1] == 0:
            c[i] = jet.c[jet.space.index[m[:-1]]]
    return Jet(space, c)


def christoffel_nd(g: Jet) -> Jet:
    """``Gam[c, a, b] = Gamma^a_{cb}`` for an ``n x n`` metric jet in ``n`` variables."""
    n = g.shape[-1]
    dg = jets.stack([g.diff(c) for c in range(n)], axis=-3)                 # [c, d, b]
    first = (dg + _permute(dg, (2, 1, 0)) - _permute(dg, (1, 0, 2))) * 0.5
    ginv = jets.inv(g.truncate(dg.order))
    return jets.einsum("...ad,...cdb->...cab", ginv, first)


def riemann_nd(g: Jet) -> np.ndarray:
    """``R[a, b, c, d] = R^a_{bcd}`` (so ``R(X,Y)Z = R^a_{bcd} Z^b X^c Y^d``)
    from a metric jet of order at least 2."""
    n = g.shape[-1]
    gam = christoffel_nd(g.truncate(2))
    g0 = gam.value
    dgam = np.stack([gam.d(e) for e in range(n)], axis=-4)                 # [e, c, a, b]
    term = np.einsum("...cdab->...abcd", dgam)
    r = term - np.swapaxes(term, -1, -2)
    quad = np.einsum("...cae,...deb->...abcd", g0, g0)
    return r + quad - np.swapaxes(quad, -1, -2)


# patches and Weil-Petersson pairing -------------------------------------------------

def patch_rule(patch: HyperbolicPatch, n: int = 8) -> tuple:
    """Flattened ``(y1, y2, weights)`` on a patch (periodic midpoint in y1 when
    the patch is periodic, Gauss-Legendre otherwise)."""
    ax1 = Axis("periodic" if patch.periodic else "gauss", *patch.y1_range)
    ax2 = Axis("gauss", *patch.y2_range)
    (x1, w1), (x2, w2) = ax1.rule(n), ax2.rule(n)
    y1, y2 = np.meshgrid(x1, x2, indexing="ij")
    return y1.ravel(), y2.ravel(), np.outer(w1, w2).ravel()


def _area_density(patch: HyperbolicPatch, y1, y2) -> np.ndarray:
    phi = patch.conformal_factor(*Jet.seeds([np.asarray(y1, float),
                                             np.asarray(y2, float)], 0))
    return np.exp(2 * phi.value.real)


@dataclass(frozen=True)
class WPVector:
    """TT tensor ``Re(f dz^2)`` on a patch, checked against ``h0``."""

    patch: HyperbolicPatch
    qd: QuadDiff
    tol: float = 1e-7

    def __post_init__(self):
        rng = np.random.default_rng(7)
        y1, y2 = self.patch.sample(rng, 16)
        tr, div = tt_residuals(self.patch, self.qd, y1, y2)
        if max(tr, div) > self.tol:
            raise ValueError(f"not a TT tensor (trace {tr:.1e}, divergence {div:.1e})")

    def components(self, y1, y2) -> tuple:
        """``(u, v)`` with ``k = u dy1^2 - u dy2^2 - 2 v dy1 dy2``."""
        f = self.qd.value(*Jet.seeds([np.asarray(y1, float), np.asarray(y2, float)], 0))
        return f.value.real, f.value.imag

    def tensor(self, y1, y2) -> np.ndarray:
        u, v = self.components(y1, y2)
        return np.stack([np.stack([u, -v], -1), np.stack([-v, -u], -1)], -2)


def j_action(k: WPVector) -> WPVector:
    """``J k``: ``(u, v) -> (v, -u)``, i.e. ``f -> -i f``."""
    return WPVector(k.patch, k.qd.rotated(), k.tol)


def wp_pairing(k: WPVector, h: WPVector, grid: int = 16) -> float:
    """``int <k, h>_{h0} dvol_{h0} = int 2 e^{-2 phi} (u_k u_h + v_k v_h) dy``."""
    if k.patch != h.patch:
        raise ValueError("WP vectors live on different patches")
    y1, y2, w = patch_rule(k.patch, grid)
    uk, vk = k.components(y1, y2)
    uh, vh = h.components(y1, y2)
    return float(np.sum(w * 2 * (uk * uh + vk * vh) / _area_density(k.patch, y1, y2)))


# one-parameter families -------------------------------------------------------------

def _reseed(coords: Sequence[Jet], extra: int = 1) -> list:
    """Fresh seed jets at the same point, ``extra`` orders higher."""
    return Jet.seeds([c.value.real for c in coords], coords[0].order + extra)


@dataclass(frozen=True)
class FunnelFamily:
    """Funnels ``t -> (psi_t^* h0, psi_t^* Re((f + t f_dot) dz^2))``.

    ``displacement`` holds two expressions in ``y1, y2`` (the field ``V``);
    ``qd_dot`` is the fiber direction ``f_dot``.  ``h0_dot``, when given,
    declares ``L_V h0 = Re(h0_dot dz^2)`` (a TT direction); it is checked
    against the jets at construction.
    """

    patch: HyperbolicPatch
    qd: QuadDiff = field(default_factory=QuadDiff)
    qd_dot: QuadDiff = field(default_factory=QuadDiff)
    displacement: tuple = ("0", "0")
    h0_dot: QuadDiff | None = None
    x0: float = 0.5
    name: str = ""

    def __post_init__(self):
        if len(self.displacement) != 2:
            raise ValueError("displacement needs two components")
        object.__setattr__(self, "_v", tuple(compile_expr(e, ["y1", "y2"])
                                             for e in self.displacement))
        object.__setattr__(self, "base", FunnelData(self.patch, self.qd, self.x0))
        rng = np.random.default_rng(11)
        y1, y2 = self.patch.sample(rng, 16)
        if self.h0_dot is not None:
            got = self.boundary_derivatives(y1, y2)
            want = WPVector(self.patch, self.h0_dot).tensor(y1, y2)
            if np.abs(got["h0"] @ got["H0_dot"] - want).max() > 1e-8:
                raise ValueError("declared h0_dot does not match L_V h0")
        for t in (-0.1, 0.1):     # admissibility of nearby slices
            eig = np.linalg.eigvals(self.endomorphism_values(y1, y2, t)).real
            if np.min(1 + self.x0 ** 2 * eig / 2) <= 0:
                raise ValueError("1 + x^2 A^t/2 degenerates before the cutoff")

    @property
    def is_constant(self) -> bool:
        return self.displacement == ("0", "0") and self.qd_dot.f == "0"

    # boundary data --------------------------------------------------------------
    def _field(self, y1: Jet, y2: Jet) -> list:
        out = []
        for fn in self._v:
            v = fn(y1, y2)
            if not isinstance(v, Jet):
                v = Jet.constant(y1.space, np.broadcast_to(v, y1.shape))
            out.append(v.real)
        return out

    def boundary_data(self, y1: Jet, y2: Jet, t, y_vars: tuple = (1, 2)) -> tuple:
        """``(h0^t, k^t)`` as jets one order below the seeds ``y1, y2``.

        ``y_vars`` are the variable indices of ``y1, y2`` in their jet space;
        ``t`` is a seed jet or a float.
        """
        v1, v2 = self._field(y1, y2)
        p1, p2 = y1 + v1 * t, y2 + v2 * t
        dpsi = jets.stack([jets.stack([p.diff(b) for b in y_vars], axis=-1)
                           for p in (p1, p2)], axis=-2)
        order = dpsi.order
        q1, q2 = p1.truncate(order), p2.truncate(order)
        tt = t.truncate(order) if isinstance(t, Jet) else t
        h0 = self.patch.boundary_metric(q1, q2)
        k = self.qd.tensor(q1, q2)
        if self.qd_dot.f != "0":
            kd = self.qd_dot.tensor(q1, q2)
            k = k + (kd * tt[..., None, None] if isinstance(tt, Jet) else kd * tt)
        return dpsi.T @ h0 @ dpsi, dpsi.T @ k @ dpsi

    def endomorphism_values(self, y1, y2, t: float = 0.0) -> np.ndarray:
        s1, s2 = Jet.seeds([np.asarray(y1, float), np.asarray(y2, float)], 1)
        h0, k = self.boundary_data(s1, s2, t, (0, 1))
        return 0.5 * np.eye(2) + np.linalg.solve(h0.value.real, k.value.real)

    def compact_metric(self, coords: Sequence[Jet], t: float | None = None) -> Jet:
        """``x^2 g^t = dx^2 + h^t(x)``.  ``coords`` are seeds ``(x, y1, y2, t)``,
        or ``(x, y1, y2)`` with a fixed ``t``."""
        seeds = _reseed(coords)
        tt = seeds[3] if t is None else t
        h0, k = self.boundary_data(seeds[1], seeds[2], tt)
        a = _scalar_times(h0[..., 0, 0] * 0 + 0.5, np.eye(2)) + jets.inv(h0) @ k
        x = coords[0]
        p = _scalar_times(x * 0 + 1, np.eye(2)) + a * (x * x * 0.5)[..., None, None]
        h = p.T @ h0 @ p
        one, zero = x * 0 + 1, x * 0
        return jets.stack([jets.stack([one, zero, zero], axis=-1),
                           jets.stack([zero, h[..., 0, 0], h[..., 0, 1]], axis=-1),
                           jets.stack([zero, h[..., 1, 0], h[..., 1, 1]], axis=-1)],
                          axis=-2)

    def metric(self, coords: Sequence[Jet], t: float | None = None) -> Jet:
        return self.compact_metric(coords, t) * jets.reciprocal(coords[0] ** 2)[..., None, None]

    # tensors at t = 0 -------------------------------------------------------------
    def boundary_derivatives(self, y1, y2) -> dict:
        """Values of ``h0``, ``H0_dot = h0^{-1} h0_dot``, ``K = h0^{-1} k``,
        ``A = Id/2 + K`` and ``A_dot`` at plain points."""
        y1, y2 = np.asarray(y1, float), np.asarray(y2, float)
        s1, s2, st = Jet.seeds([y1, y2, np.zeros_like(y1)], 2)
        h0, k = self.boundary_data(s1, s2, st, (0, 1))
        kend = jets.inv(h0) @ k
        h0v = h0.value.real
        kmat = kend.value.real
        return {"h0": h0v, "H0_dot": np.linalg.solve(h0v, h0.d(2).real), "K": kmat,
                "A": kmat + 0.5 * np.eye(2), "A_dot": kend.d(2).real}

    # frames -------------------------------------------------------------------------
    def framed(self) -> FramedMetric:
        """``g^t`` with the t-parallel frame (first order in ``t``)."""
        return FramedMetric(self.metric, lambda c: transported_frame_jet(self, c, True),
                            nparams=1, name="g^t")

    def compact_framed(self) -> FramedMetric:
        return FramedMetric(self.compact_metric,
                            lambda c: transported_frame_jet(self, c, False),
                            nparams=1, name="g_hat^t")

    def slice_framed(self, t: float) -> FramedMetric:
        """The metric ``g^t`` of one slice (the frame is the Gram-Schmidt frame
        of ``g^t`` and is only used for volume forms)."""
        def metric(c):
            return self.metric(c, t)

        def frame(c):
            g = self.compact_metric(c, t)
            h11, h12, h22 = g[..., 1, 1], g[..., 1, 2], g[..., 2, 2]
            n1 = jets.reciprocal(jets.sqrt(h11))
            n2 = jets.reciprocal(jets.sqrt(h22 - h12 * h12 / h11))
            one, zero = c[0] * 0 + 1, c[0] * 0
            e = jets.stack([jets.stack([one, zero, zero], axis=-1),
                            jets.stack([zero, n1, -h12 / h11 * n2], axis=-1),
                            jets.stack([zero, zero, n2], axis=-1)], axis=-2)
            return e * c[0][..., None, None]
        return FramedMetric(metric, frame, name=f"g^{t}")


def transported_frame_jet(fam: FunnelFamily, coords: Sequence[Jet],
                          scale_x: bool = True) -> Jet:
    """``S^t = S^0 - (1/2) g0^{-1} (g^t - g^0) S^0``: the t-parallel frame of
    ``G = dt^2 + g^t`` through first order in ``t`` (exact for first
    t-derivatives at ``t = 0``)."""
    gt = fam.compact_metric(coords)
    sp = gt.space
    g0 = _embed_t_independent(restrict_last_variable(gt), sp)
    s0 = _embed_t_independent(restrict_last_variable(fam.base.compact_frame(coords[:3])), sp)
    frame = s0 - jets.inv(g0) @ (gt - g0) @ s0 * 0.5
    return frame * coords[0][..., None, None] if scale_x else frame


# t-transport by RK4 ---------------------------------------------------------------------

def _slice_jets(fam: FunnelFamily, point: Sequence, t: float, order: int,
                hat: bool) -> tuple:
    """``(g, d_t g)`` at fixed ``t`` as spatial jets of the given order."""
    pts = [np.asarray(p, float) for p in point]
    seeds = Jet.seeds(pts + [np.full_like(pts[0], t)], order + 1)
    g = fam.compact_metric(seeds)
    if not hat:
        g = g * jets.reciprocal(seeds[0] ** 2)[..., None, None]
    # shift the t variable so that the restriction happens at parameter t
    return restrict_last_variable(g.truncate(order)), restrict_last_variable(g.diff(3))


@dataclass
class FrameTransport:
    """Frames ``S^t`` on a uniform t-grid at fixed spatial points."""

    family: FunnelFamily
    point: list
    ts: np.ndarray
    frames: list
    hat: bool

    def values(self) -> np.ndarray:
        return np.stack([f.value for f in self.frames])

    def rate(self, k: int) -> np.ndarray:
        g, gdot = _slice_jets(self.family, self.point, self.ts[k], 0, self.hat)
        return -0.5 * np.linalg.solve(g.value, gdot.value @ self.frames[k].value)

    def ode_residual(self) -> float:
        """Fourth-order central difference of ``S^t`` against ``-(1/2) g^{-1} g_dot S``."""
        s, h = self.values(), self.ts[1] - self.ts[0]
        out = 0.0
        for k in range(2, len(self.ts) - 2):
            fd = (s[k - 2] - 8 * s[k - 1] + 8 * s[k + 1] - s[k + 2]) / (12 * h)
            out = max(out, float(np.abs(fd - self.rate(k)).max()))
        return out

    def orthonormality_defect(self) -> float:
        out = 0.0
        for t, f in zip(self.ts, self.frames):
            g, _ = _slice_jets(self.family, self.point, t, 0, self.hat)
            s = f.value
            out = max(out, float(np.abs(s.swapaxes(-1, -2) @ g.value @ s - np.eye(3)).max()))
        return out


def transport_frame(fam: FunnelFamily, point: Sequence, t_end: float,
                    step: float = 1e-3, hat: bool = False,
                    spatial_order: int = 0) -> FrameTransport:
    """Solve ``d_t S = -(1/2) g^{-1} (d_t g) S`` (``nabla^G_{d_t} S = 0``) with
    classical RK4 from the Gram-Schmidt frame at ``t = 0``.  Frames are
    spatial jets of ``spatial_order``; no re-orthonormalization is applied."""
    nsteps = int(round(abs(t_end) / step))
    if nsteps == 0 or not math.isclose(nsteps * step, abs(t_end), rel_tol=1e-9):
        raise ValueError("t_end must be a nonzero multiple of the step")
    h = math.copysign(step, t_end)
    pts = [np.asarray(p, float) for p in point]
    seeds = Jet.seeds(pts, spatial_order)
    s = fam.base.compact_frame(seeds) if hat else fam.base.frame(seeds)

    def rhs(t, frame):
        g, gdot = _slice_jets(fam, pts, t, spatial_order, hat)
        return jets.inv(g) @ gdot @ frame * -0.5

    ts, frames = [0.0], [s]
    for n in range(nsteps):
        t = n * h
        k1 = rhs(t, s)
        k2 = rhs(t + h / 2, s + k1 * (h / 2))
        k3 = rhs(t + h / 2, s + k2 * (h / 2))
        k4 = rhs(t + h, s + k3 * h)
        s = s + (k1 + k2 * 2 + k3 * 2 + k4) * (h / 6)
        if not np.all(np.isfinite(s.value)):
            raise FloatingPointError("RK4 step produced non-finite frame")
        ts.append(t + h)
        frames.append(s)
    return FrameTransport(fam, pts, np.array(ts), frames, hat)


def compatibility_defect(fam: FunnelFamily, point: Sequence, t_end: float,
                         step: float = 1e-3) -> float:
    """``|S^t - x S_hat^t|`` with ``S`` and ``S_hat`` transported separately
    for ``g`` and ``g_hat = x^2 g``."""
    a = transport_frame(fam, point, t_end, step).values()
    b = transport_frame(fam, point, t_end, step, hat=True).values()
    x = np.asarray(point[0], float)[..., None, None]
    return float(np.abs(a - x * b).max())


def _connection_values(fam: FunnelFamily, point, t: float, frame: Jet) -> np.ndarray:
    """``omega[c, i, j]`` of ``g^t`` in a frame given as an order-1 spatial jet."""
    g, _ = _slice_jets(fam, point, t, 1, hat=False)
    gam = christoffel_nd(g).value                                    # [c, a, b]
    s = frame.value
    ds = np.stack([frame.d(c) for c in range(3)], axis=-3)           # [c, b, j]
    cov = ds + np.einsum("...cbd,...dj->...cbj", gam, s)
    dual = s.swapaxes(-1, -2) @ g.value
    return np.einsum("...ib,...cbj->...cij", dual, cov)


def omega_dot_by_transport(fam: FunnelFamily, point: Sequence, delta: float = 0.02,
                           step: float = 1e-3) -> np.ndarray:
    """``d_t omega`` at ``t = 0`` from RK4-transported frames at ``t = +-delta,
    +-delta/2`` (Richardson-extrapolated central differences)."""
    def omega_at(t):
        tr = transport_frame(fam, point, t, step, spatial_order=1)
        return _connection_values(fam, tr.point, t, tr.frames[-1])
    d1 = (omega_at(delta / 2) - omega_at(-delta / 2)) / delta
    d2 = (omega_at(delta) - omega_at(-delta)) / (2 * delta)
    return (4 * d1 - d2) / 3


def omega_dot_by_jets(fam: FunnelFamily, point: Sequence) -> np.ndarray:
    pts = [np.asarray(p, float) for p in point]
    om = fam.framed().connection_form().param_derivative(0)
    return om(pts + [np.zeros_like(pts[0])])


# boundary densities -------------------------------------------------------------------

def boundary_eps(n: int = 14) -> np.ndarray:
    """Cutoffs for pointwise boundary finite parts (even expansions)."""
    return np.geomspace(0.01, 0.1, n)


def boundary_density_samples(form: MatrixForm, patch: HyperbolicPatch, eps,
                             y1, y2) -> np.ndarray:
    """``form(d_y1, d_y2) / e^{2 phi}`` on ``{x = eps}``; shape ``(len(eps), npts)``."""
    eps = np.asarray(eps, float)
    n = len(y1)
    pts = [np.repeat(eps, n), np.tile(y1, len(eps)), np.tile(y2, len(eps))]
    pts += [np.zeros_like(pts[0])] * form.nparams
    vals = form(pts)[..., 2, 0, 0].reshape(len(eps), n)
    return vals / _area_density(patch, y1, y2)


def pointwise_finite_parts(form: MatrixForm, patch: HyperbolicPatch, y1, y2,
                           eps=None, tol: float = 1e-8) -> tuple:
    """``(finite parts, eps^-2 coefficients)`` of a boundary density per point.

    The expansions are even in ``eps`` without logarithms (the funnel metric
    and frame are even in ``x``); the fit raises :class:`FitError` otherwise.
    """
    eps = boundary_eps() if eps is None else np.asarray(eps, float)
    vals = boundary_density_samples(form, patch, eps, y1, y2)
    fits = [fp_extract(eps, vals[:, i], 2, with_log=False, n_positive=5, tol=tol,
                       step=2) for i in range(vals.shape[1])]
    return (np.array([f.c0 for f in fits]), np.array([f.poles[0] for f in fits]))


@dataclass
class IdentityCheck:
    """One verified identity: computed value, reference value, residual, tolerance."""

    name: str
    value: complex
    expected: complex
    tol: float
    note: str = ""

    @property
    def residual(self) -> float:
        return float(abs(self.value - self.expected))

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def to_json_dict(self) -> dict:
        def enc(z):
            z = complex(z)
            return z.real if z.imag == 0 else [z.real, z.imag]
        return {"identity": self.name, "value": enc(self.value),
                "expected": enc(self.expected), "residual": self.residual,
                "tol": self.tol, "passed": self.passed, "note": self.note}


def _dot(form: MatrixForm) -> MatrixForm:
    return form.param_derivative(0)


@dataclass
class VariationForms:
    omega: MatrixForm
    torsion: MatrixForm
    alpha: MatrixForm
    omega_hat: MatrixForm


def variation_forms(fam: FunnelFamily) -> VariationForms:
    g, gh = fam.framed(), fam.compact_framed()
    return VariationForms(omega=g.connection_form(), torsion=g.torsion_form(),
                          alpha=g.alpha_form(lambda c: jets.log(c[0])),
                          omega_hat=gh.connection_form())


def boundary_variation_forms(fam: FunnelFamily) -> dict:
    """The boundary 2-forms of the first variation of ``cs(omega + iT)``."""
    f = variation_forms(fam)
    theta = f.omega + f.torsion * 1j
    return {
        "T^T_dot": wedge(f.torsion, _dot(f.torsion)).trace(),
        "alpha_dot^alpha": wedge(_dot(f.alpha), f.alpha).trace(),
        "omega_hat_dot^alpha+alpha_dot^omega_hat":
            (wedge(_dot(f.omega_hat), f.alpha) + wedge(_dot(f.alpha), f.omega_hat)).trace(),
        "omega_hat_dot^alpha": wedge(_dot(f.omega_hat), f.alpha).trace(),
        "alpha^omega_hat": wedge(f.alpha, f.omega_hat).trace(),
        "omega_dot^T": wedge(_dot(f.omega), f.torsion).trace(),
        "T_dot^omega": wedge(_dot(f.torsion), f.omega).trace(),
        "omega_hat_dot^omega_hat": wedge(_dot(f.omega_hat), f.omega_hat).trace(),
        "theta_dot^theta": wedge(_dot(theta), theta).trace(),
    }


def _tr(m: np.ndarray) -> np.ndarray:
    return np.trace(m, axis1=-2, axis2=-1)


@dataclass
class VariationDensities:
    """Pointwise finite parts of the boundary variation terms on a patch grid.

    ``fp[name]`` and ``pole[name]`` hold per-point finite parts and
    ``eps^-2`` coefficients; ``reference`` holds the boundary tensor
    expressions ``Tr(J H0_dot A)``, ``Tr(H0_dot)``, ``Tr(A_dot)``,
    ``Tr(A) Tr(H0_dot)`` and ``Tr(H0_dot A)`` at the same points.
    """

    family: FunnelFamily
    y1: np.ndarray
    y2: np.ndarray
    weights: np.ndarray
    fp: dict
    pole: dict
    alpha_dot_alpha_max: float
    reference: dict

    def mean(self, values) -> complex:
        """Average per unit ``h0``-area of a per-point density."""
        a = self.weights * _area_density(self.family.patch, self.y1, self.y2)
        return complex(np.sum(a * np.asarray(values)) / np.sum(a))

    def checks(self, tol_fp: float = 1e-6, tol_exact: float = 1e-9,
               tol_split: float = 1e-5) -> list:
        """Pointwise identities; each value is the max residual over the grid."""
        ref, fp, pole = self.reference, self.fp, self.pole
        two_j = 2 * ref["Tr(J H0_dot A)"]
        x0_coeff = ref["Tr(A_dot)"] - 0.5 * ref["Tr(A) Tr(H0_dot)"] + ref["Tr(H0_dot A)"]
        mixed = fp["omega_hat_dot^alpha+alpha_dot^omega_hat"]

        def sup(v):
            return float(np.abs(v).max())
        return [
            IdentityCheck("tr_T_wedge_T_dot_finite_part", sup(fp["T^T_dot"]), 0, tol_fp),
            IdentityCheck("tr_alpha_dot_wedge_alpha_vanishes", self.alpha_dot_alpha_max, 0,
                          tol_exact, "sup over all cutoffs and points"),
            IdentityCheck("mixed_alpha_term_finite_part", sup(mixed - two_j), 0, tol_split,
                          "against the reference value 2 Tr(J H0_dot A)"),
            IdentityCheck("mixed_alpha_term_in_split", sup(mixed + two_j), 0, tol_split,
                          "the term enters with a minus sign since omega = omega_hat - alpha"),
            IdentityCheck("mixed_alpha_term_halves", sup(mixed - 2 * fp["omega_hat_dot^alpha"]),
                          0, tol_split),
            IdentityCheck("tr_alpha_wedge_omega_hat_finite_part", sup(fp["alpha^omega_hat"]),
                          0, tol_fp),
            IdentityCheck("reduction_T_dot_omega_equals_omega_dot_T",
                          sup(fp["T_dot^omega"] - fp["omega_dot^T"]), 0, tol_split),
            IdentityCheck("omega_dot_T_leading_coefficient",
                          sup(pole["omega_dot^T"] + ref["Tr(H0_dot)"]), 0, tol_fp,
                          "coefficient of x^-2 against -Tr(H0_dot)"),
            IdentityCheck("omega_dot_T_constant_coefficient", sup(fp["omega_dot^T"] - x0_coeff),
                          0, tol_split),
        ]


def variation_term_densities(fam: FunnelFamily, grid: int = 5,
                             eps=None) -> VariationDensities:
    """Pointwise finite parts of every boundary term of the first variation."""
    y1, y2, w = patch_rule(fam.patch, grid)
    forms = boundary_variation_forms(fam)
    eps = boundary_eps() if eps is None else np.asarray(eps, float)
    fp, pole = {}, {}
    alpha_max = 0.0
    for name, form in forms.items():
        if name == "alpha_dot^alpha":
            vals = boundary_density_samples(form, fam.patch, eps, y1, y2)
            alpha_max = float(np.abs(vals).max())
            continue
        fp[name], pole[name] = pointwise_finite_parts(form, fam.patch, y1, y2, eps)
    d = fam.boundary_derivatives(y1, y2)
    h, a, ad = d["H0_dot"], d["A"], d["A_dot"]
    reference = {"Tr(J H0_dot A)": _tr(J_MATRIX @ h @ a), "Tr(H0_dot)": _tr(h),
                 "Tr(A_dot)": _tr(ad), "Tr(A) Tr(H0_dot)": _tr(a) * _tr(h),
                 "Tr(H0_dot A)": _tr(h @ a), "Tr(H0_dot K)": _tr(h @ d["K"]),
                 "Tr(J H0_dot K)": _tr(J_MATRIX @ h @ d["K"])}
    return VariationDensities(fam, y1, y2, w, fp, pole, alpha_max, reference)


def bulk_curvature_term(fam: FunnelFamily, npts: int = 8, seed: int = 0) -> float:
    """``sup |Tr(theta_dot ^ Omega^theta)|`` at random interior points (zero
    for variations through hyperbolic metrics)."""
    f = variation_forms(fam)
    theta = f.omega + f.torsion * 1j
    form = wedge(_dot(theta), curvature_form(theta)).trace()
    rng = np.random.default_rng(seed)
    y1, y2 = fam.patch.sample(rng, npts)
    x = rng.uniform(0.05, fam.x0, npts)
    return float(np.abs(form([x, y1, y2, np.zeros(npts)])).max())


def gauss_bonnet_variation(fam: FunnelFamily, grid: int = 16) -> float:
    """``int_patch (Tr A_dot + (1/2) Tr A Tr H0_dot) dvol_h0`` per unit area."""
    y1, y2, w = patch_rule(fam.patch, grid)
    d = fam.boundary_derivatives(y1, y2)
    dens = _tr(d["A_dot"]) + 0.5 * _tr(d["A"]) * _tr(d["H0_dot"])
    a = w * _area_density(fam.patch, y1, y2)
    return float(np.sum(a * dens) / np.sum(a))


# Weil-Petersson terms of the variation ------------------------------------------------

def _tt_direction(fam: FunnelFamily) -> WPVector | None:
    if fam.h0_dot is not None:
        return WPVector(fam.patch, fam.h0_dot)
    if fam.displacement == ("0", "0"):
        return None
    raise ValueError("the WP terms need a declared TT h0_dot (or no displacement)")


def _patch_area(patch: HyperbolicPatch, grid: int = 16) -> float:
    y1, y2, w = patch_rule(patch, grid)
    return float(np.sum(w * _area_density(patch, y1, y2)))


def wp_terms(fam: FunnelFamily, grid: int = 16) -> tuple:
    """``(<h0_dot, h2>, <J h0_dot, h2>)`` per unit area via :func:`wp_pairing`
    (``<h0_dot, h0/2> = 0`` for TT ``h0_dot``)."""
    hd = _tt_direction(fam)
    if hd is None:
        return 0.0, 0.0
    k = WPVector(fam.patch, fam.qd)
    area = _patch_area(fam.patch, grid)
    return wp_pairing(hd, k, grid) / area, wp_pairing(j_action(hd), k, grid) / area


@dataclass
class CsVariation:
    """First variation of the PSL2(C) Chern-Simons invariant per unit area."""

    lhs: complex
    rhs: complex
    connection_term: complex
    wp: float
    wp_j: float

    @property
    def residual(self) -> float:
        return float(abs(self.lhs - self.rhs))

    def parallel_transport_defect(self) -> complex:
        """``2 pi i (lhs - connection term) + (1/4pi) <(Id - iJ) h0_dot, h2>``."""
        return 2j * math.pi * (self.lhs - self.connection_term) \
            + (self.wp - 1j * self.wp_j) / (4 * math.pi)

    def liouville_coefficient(self) -> complex | None:
        """The ``c`` with ``2 pi i (lhs - connection term) + c mu^{1,0} = 0``
        for ``mu^{1,0}(h0_dot) = (1/2) <(Id - iJ) h0_dot, h2>``."""
        mu = 0.5 * (self.wp - 1j * self.wp_j)
        if abs(mu) < 1e-12:
            return None
        return -2j * math.pi * (self.lhs - self.connection_term) / mu


def cs_variation_density(fam: FunnelFamily, grid: int = 5, eps=None,
                         dens: VariationDensities | None = None) -> CsVariation:
    """``d_t CS`` per unit area from the boundary term
    ``(1/16 pi^2) FP Tr(theta_dot ^ theta)`` against
    ``(1/16 pi^2)[FP Tr(omega_hat_dot ^ omega_hat) + 2i <h0_dot,h2> + 2 <J h0_dot,h2>]``."""
    if dens is None:
        dens = variation_term_densities(fam, grid, eps)
    c = 1 / (16 * math.pi ** 2)
    conn = c * dens.mean(dens.fp["omega_hat_dot^omega_hat"])
    wp, wp_j = wp_terms(fam)
    lhs = c * dens.mean(dens.fp["theta_dot^theta"])
    return CsVariation(lhs=lhs, rhs=conn + c * (2j * wp + 2 * wp_j),
                       connection_term=conn, wp=wp, wp_j=wp_j)


# renormalized volume ----------------------------------------------------------------------

def _segment_rule(eps: np.ndarray, x0: float, per_segment: int = 10) -> tuple:
    """Gauss nodes in ``log x`` on ``[eps_0, eps_1], ..., [eps_last, x0]``.

    Returns ``(x, weights, segment index)``; the integral over ``[eps_i, x0]``
    is the sum over segments ``>= i``.
    """
    edges = np.append(np.sort(eps), x0)
    xs, ws, seg = [], [], []
    for i in range(len(edges) - 1):
        x, w = _log_gauss(edges[i], edges[i + 1], per_segment)
        xs.append(x)
        ws.append(w)
        seg.append(np.full(per_segment, i))
    return np.concatenate(xs), np.concatenate(ws), np.concatenate(seg)


def _cumulative(values_per_node: np.ndarray, w: np.ndarray, seg: np.ndarray,
                nseg: int) -> np.ndarray:
    per_seg = np.bincount(seg, weights=values_per_node * w, minlength=nseg)
    return np.cumsum(per_seg[::-1])[::-1]


def truncated_volumes(fam: FunnelFamily, t: float, eps, y1, y2, w,
                      per_segment: int = 10) -> np.ndarray:
    """``int_{eps < x < x0} dvol_{g^t}`` for each ``eps`` (sorted ascending)."""
    eps = np.sort(np.asarray(eps, float))
    xs, wx, seg = _segment_rule(eps, fam.x0, per_segment)
    n = len(y1)
    dvol = fam.slice_framed(t).volume_form()
    vals = dvol([np.repeat(xs, n), np.tile(y1, len(xs)), np.tile(y2, len(xs))])
    per_x = (vals[..., 0, 0, 0].real.reshape(len(xs), n) * w).sum(axis=1)
    return _cumulative(per_x, wx, seg, len(eps))


def side_flux(beta: MatrixForm, patch: HyperbolicPatch, eps, x0: float,
              n: int = 8, per_segment: int = 10) -> np.ndarray:
    """``int_{eps < x < x0} int_patch (d_y2 beta_{x y1} - d_y1 beta_{x y2}) dy dx``
    for each ``eps`` (ascending), computed on the side faces of the patch."""
    eps = np.sort(np.asarray(eps, float))
    xs, wx, seg = _segment_rule(eps, x0, per_segment)
    ax1 = Axis("periodic" if patch.periodic else "gauss", *patch.y1_range)
    ax2 = Axis("gauss", *patch.y2_range)
    (u1, w1), (u2, w2) = ax1.rule(n), ax2.rule(n)
    m = len(xs)

    def comp(y1, y2, k):
        k_pts = len(y1)
        pts = [np.repeat(xs, k_pts), np.tile(y1, m), np.tile(y2, m)]
        pts += [np.zeros(m * k_pts)] * beta.nparams
        return beta(pts)[..., k, 0, 0].real.reshape(m, k_pts)

    lo2, hi2 = patch.y2_range
    total = ((comp(u1, np.full(n, hi2), 0) - comp(u1, np.full(n, lo2), 0)) * w1).sum(axis=1)
    if not patch.periodic:
        lo1, hi1 = patch.y1_range
        total -= ((comp(np.full(n, hi1), u2, 1) - comp(np.full(n, lo1), u2, 1)) * w2).sum(axis=1)
    return _cumulative(total, wx, seg, len(eps))


@dataclass
class VolumeVariation:
    lhs: float
    rhs: float
    derivative: float
    compensation: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def volr_variation_density(fam: FunnelFamily, grid: int = 8, step: float = 1e-4,
                           eps=None) -> VolumeVariation:
    """``(d_t FP Vol(eps < x < x0) + compensation, -(1/4) <h0_dot, h2>)`` per unit area.

    The derivative is a Richardson-extrapolated central difference over the
    exact slices.  The compensation ``-(1/4)[Tr(omega_dot ^ T)(x0) + FP int L]``
    (``L`` the tangential part of ``d Tr(omega_dot ^ T)``, integrated on the
    side faces) removes the cutoff dependence, using
    ``d_t dvol = (1/4) d Tr(omega_dot ^ T)``.
    """
    eps = np.geomspace(0.02, 0.2, 12) if eps is None else np.sort(np.asarray(eps, float))
    y1, y2, w = patch_rule(fam.patch, grid)
    area = float(np.sum(w * _area_density(fam.patch, y1, y2)))
    if fam.is_constant:
        return VolumeVariation(0.0, 0.0, 0.0, 0.0)

    def fp_volume(t):
        vals = truncated_volumes(fam, t, eps, y1, y2, w) / area
        return fp_extract(eps, vals, 2, with_log=True, n_positive=3, tol=1e-10,
                          step=2).c0.real
    f = {t: fp_volume(t) for t in (-2 * step, -step, step, 2 * step)}
    d1 = (f[step] - f[-step]) / (2 * step)
    d2 = (f[2 * step] - f[-2 * step]) / (4 * step)
    deriv = (4 * d1 - d2) / 3
    v = variation_forms(fam)
    beta = wedge(_dot(v.omega), v.torsion).trace()
    n = len(y1)
    far = beta([np.full(n, fam.x0), y1, y2, np.zeros(n)])[..., 2, 0, 0]
    far = float(np.sum(far.real * w)) / area
    flux = side_flux(beta, fam.patch, eps, fam.x0, grid) / area
    flux_fp = fp_extract(eps, flux, 2, with_log=True, n_positive=3, tol=1e-9,
                         step=2).c0.real
    comp = -0.25 * (far + flux_fp)
    wp, _ = wp_terms(fam)
    return VolumeVariation(lhs=deriv + comp, rhs=-0.25 * wp, derivative=deriv,
                           compensation=comp)


def volume_form_variation_defect(fam: FunnelFamily, npts: int = 8, seed: int = 0) -> float:
    """``sup |d_t dvol - (1/4) d Tr(omega_dot ^ T)|`` at random interior points."""
    from .formcalc.forms import exterior_d
    v = variation_forms(fam)
    beta = wedge(_dot(v.omega), v.torsion).trace()
    lhs = _dot(fam.framed().volume_form())
    rhs = exterior_d(beta) * 0.25
    rng = np.random.default_rng(seed)
    y1, y2 = fam.patch.sample(rng, npts)
    pt = [rng.uniform(0.05, fam.x0, npts), y1, y2, np.zeros(npts)]
    return float(np.abs(lhs(pt) - rhs(pt)).max())


# expansion of E(J Y~, Z~) ---------------------------------------------------------------

def _four_metric(fam: FunnelFamily, coords: Sequence[Jet]) -> Jet:
    """``G = g^t + dt^2`` in ``(x, y1, y2, t)``."""
    g = fam.metric(coords)
    t = coords[3]
    one, zero = t * 0 + 1, t * 0
    rows = [jets.stack([g[..., a, 0], g[..., a, 1], g[..., a, 2], zero], axis=-1)
            for a in range(3)]
    rows.append(jets.stack([zero, zero, zero, one], axis=-1))
    return jets.stack(rows, axis=-2)


def e_tensor_expansion(fam: FunnelFamily, y1: float, y2: float,
                       xs=None) -> dict:
    """Coefficients of ``x^-2`` and ``x^0`` of ``E(J Y~, Z~)`` for ``Y, Z`` in
    ``{d_y1, d_y2}``, with ``E(Y,Z) = sum_j <R^G(Y x S_j, S_j) d_t, Z>`` and
    ``Y~ = (1 + x^2 A/2)^{-1} Y``, next to the boundary-tensor prediction
    ``x^-2 h0_dot(Y,Z) - (1/2)(h0(A_dot Y,Z) + h0(Y,A_dot Z)) - h0_dot(AY,Z)``."""
    xs = np.geomspace(0.02, 0.12, 12) if xs is None else np.asarray(xs, float)
    n = len(xs)
    pts = [xs, np.full(n, y1), np.full(n, y2), np.zeros(n)]
    seeds = Jet.seeds(pts, 2)
    gj = _four_metric(fam, seeds)
    r = riemann_nd(gj).real                                   # [a, b, c, d]
    big = gj.value.real
    g3 = big[:, :3, :3]
    s = transported_frame_jet(fam, Jet.seeds(pts, 0)).value.real    # [., c, j]
    vol = np.sqrt(np.linalg.det(g3))
    eps3 = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps3[i, j, k], eps3[j, i, k] = 1, -1
    ginv = np.linalg.inv(g3)

    def cross(u, v):
        return np.einsum("nab,n,bcd,nc,nd->na", ginv, vol, eps3, u, v)

    def embed(v3):
        return np.concatenate([v3, np.zeros((n, 1))], axis=1)

    dt = np.zeros((n, 4))
    dt[:, 3] = 1.0

    def e_val(yv, zv):
        out = np.zeros(n)
        for j in range(3):
            sj = s[:, :, j]
            rv = np.einsum("nabcd,nb,nc,nd->na", r, dt, embed(cross(yv, sj)), embed(sj))
            out += np.einsum("na,nab,nb->n", rv, big, embed(zv))
        return out

    d = fam.boundary_derivatives(np.array([y1]), np.array([y2]))
    a, ad, h0 = d["A"][0], d["A_dot"][0], d["h0"][0]
    hdot = h0 @ d["H0_dot"][0]
    xdx = np.zeros((n, 3))
    xdx[:, 0] = xs
    result = {}
    for iy in range(2):
        for iz in range(2):
            ey, ez = np.eye(2)[iy], np.eye(2)[iz]
            p = np.eye(2) + (xs ** 2 / 2)[:, None, None] * a
            yt = np.linalg.solve(p, np.broadcast_to(ey, (n, 2))[..., None])[..., 0]
            zt = np.linalg.solve(p, np.broadcast_to(ez, (n, 2))[..., None])[..., 0]
            yt3 = np.concatenate([np.zeros((n, 1)), yt], 1)
            zt3 = np.concatenate([np.zeros((n, 1)), zt], 1)
            jy = cross(xdx, yt3)
            vals = e_val(jy, zt3)
            fit = fp_extract(xs, vals, 2, with_log=False, n_positive=4, tol=1e-6, step=2)
            pred0 = -0.5 * (h0 @ ad)[iz, iy] - 0.5 * (h0 @ ad)[iy, iz] \
                - (hdot @ a)[iz, iy]
            result[(iy, iz)] = {"x^-2": float(fit.poles[0].real), "x^0": float(fit.c0.real),
                                "pred x^-2": float(hdot[iy, iz]), "pred x^0": float(pred0)}
    return result


def e_expansion_residual(fam: FunnelFamily, y1: float, y2: float) -> float:
    res = e_tensor_expansion(fam, y1, y2)
    return max(max(abs(v["x^-2"] - v["pred x^-2"]), abs(v["x^0"] - v["pred x^0"]))
               for v in res.values())


# two-parameter surface families --------------------------------------------------------

@dataclass(frozen=True)
class TwoParamSurfaceFamily:
    """``h^{s,t} = h0 + s Re(f_s dz^2) + t Re(f_t dz^2)`` on a patch."""

    patch: HyperbolicPatch
    qd_s: QuadDiff
    qd_t: QuadDiff
    name: str = ""

    def metric4(self, coords: Sequence[Jet]) -> Jet:
        """``ds^2 + dt^2 + h^{s,t}`` in ``(s, t, y1, y2)``."""
        s, t, y1, y2 = coords
        h = self.patch.boundary_metric(y1, y2) + self.qd_s.tensor(y1, y2) * s[..., None, None] \
            + self.qd_t.tensor(y1, y2) * t[..., None, None]
        one, zero = s * 0 + 1, s * 0
        return jets.stack([jets.stack([one, zero, zero, zero], axis=-1),
                           jets.stack([zero, one, zero, zero], axis=-1),
                           jets.stack([zero, zero, h[..., 0, 0], h[..., 0, 1]], axis=-1),
                           jets.stack([zero, zero, h[..., 1, 0], h[..., 1, 1]], axis=-1)],
                          axis=-2)

    def derivatives(self, y1, y2) -> tuple:
        """``(H^s_dot, H^t_dot, h0)`` values."""
        ys = Jet.seeds([np.asarray(y1, float), np.asarray(y2, float)], 0)
        h0 = self.patch.boundary_metric(*ys).value.real
        hs = np.linalg.solve(h0, self.qd_s.tensor(*ys).value.real)
        ht = np.linalg.solve(h0, self.qd_t.tensor(*ys).value.real)
        return hs, ht, h0


def vertical_curvature(fam2: TwoParamSurfaceFamily, y1, y2, order: int = 3) -> np.ndarray:
    """Curvature of the connection induced on the vertical (surface) bundle:
    ``RV[a, b] = d_a Gam_b - d_b Gam_a + [Gam_a, Gam_b]`` with
    ``(Gam_a)^k_j = Gamma^k_{aj}`` for ``j, k`` vertical, at ``s = t = 0``."""
    if order < 2:
        raise ValueError("the vertical curvature needs jets of order >= 2")
    y1, y2 = np.asarray(y1, float), np.asarray(y2, float)
    z = np.zeros_like(y1)
    gj = fam2.metric4(Jet.seeds([z, z, y1, y2], order))
    gam = christoffel_nd(gj.truncate(2))                       # [c, a, b] order 1
    sub = Jet(gam.space, gam.c[..., 2:, 2:])                   # vertical block
    g0 = sub.value                                               # [a, k, j]
    dg = np.stack([sub.d(e) for e in range(4)], axis=-4)         # [e, a, k, j]
    out = dg - np.swapaxes(dg, -4, -3)                           # d_a Gam_b - d_b Gam_a
    comm = np.einsum("...akm,...bmj->...abkj", g0, g0)
    return out + comm - np.swapaxes(comm, -4, -3)


def fiber_curvature_check(fam2: TwoParamSurfaceFamily, y1, y2) -> dict:
    """Residuals (max over points) of the four fiber-curvature identities."""
    rv = vertical_curvature(fam2, y1, y2).real
    hs, ht, h0 = fam2.derivatives(y1, y2)
    comm = hs @ ht - ht @ hs
    r_st = rv[..., 0, 1, :, :]
    # sectional curvature of the slice through (d_y1, d_y2)
    r12 = rv[..., 2, 3, :, :]
    e2 = h0[..., 0, 0]
    sec = np.einsum("...ab,...b->...a", r12, np.broadcast_to([0.0, 1.0], r12.shape[:-1]))
    sec = np.einsum("...a,...ab,...b->...", sec, h0, np.broadcast_to([1.0, 0.0], sec.shape))
    sec = sec / (e2 * e2)
    r_tj = rv[..., 1, 2:, :, :]
    # Tr(R ^ R)(d_s, d_t, X1, X2) with X_j = e^{-phi} d_yj
    idx = [0, 1, 2, 3]
    total = 0.0
    for (p, q), sign in [((0, 1), 1), ((0, 2), -1), ((0, 3), 1), ((1, 2), 1),
                         ((1, 3), -1), ((2, 3), 1)]:
        rest = [i for i in idx if i not in (p, q)]
        total = total + sign * _tr(rv[..., p, q, :, :] @ rv[..., rest[0], rest[1], :, :])
    trr = total / e2
    expected = -_tr(J_MATRIX @ hs @ ht)
    return {
        "commutator": float(np.abs(r_st + 0.25 * comm).max()),
        "sectional": float(np.abs(sec + 1).max()),
        "tt_horizontal": float(np.abs(r_tj).max()),
        "trace_identity": float(np.abs(trr - expected).max()),
        "trace_value": trr,
    }


FIBER_BASIS = ("1", "z", "z^2", "exp(2*pi*i*z)")


def random_surface_families(n: int = 10, seed: int = 0) -> list:
    """Random two-parameter families on the default patches."""
    rng = np.random.default_rng(seed)
    names = list(DEFAULT_PATCHES)
    out = []
    for k in range(n):
        patch = DEFAULT_PATCHES[names[k % len(names)]]

        def rand_qd():
            terms = []
            for b in FIBER_BASIS:
                c = complex(*np.round(rng.normal(scale=0.3, size=2), 6))
                terms.append(f"({c.real}+({c.imag})*i)*({b})")
            return QuadDiff(" + ".join(terms), 1.0)
        out.append(TwoParamSurfaceFamily(patch, rand_qd(), rand_qd(), f"{patch.name}/{k}"))
    return out


# standard one-parameter families -------------------------------------------------------

def tt_family(patch_name: str, qd: QuadDiff | None = None, scale: float = 1.0,
              qd_dot: QuadDiff | None = None, x0: float = 0.5) -> FunnelFamily:
    """Family with ``h0_dot = scale * Re(dz^2)`` on a default patch.

    The TT displacements are not periodic in ``y1``, so periodic patches are
    replaced by the same rectangle with a Gauss rule in ``y1``.
    """
    v = TT_DISPLACEMENTS[patch_name]
    disp = tuple(f"({scale})*({e})" for e in v)
    patch = DEFAULT_PATCHES[patch_name]
    if patch.periodic:
        patch = replace(patch, periodic=False, name=patch.name + "_strip")
    return FunnelFamily(patch, qd or QuadDiff(), qd_dot or QuadDiff(), disp,
                        QuadDiff("1", scale), x0, f"tt/{patch_name}")


def default_families() -> dict:
    """The shipped one-parameter families used by the checks and the CLI."""
    from .funnel import DEFAULT_QHDS
    hp = DEFAULT_PATCHES["halfplane"]
    return {
        "constant": FunnelFamily(hp, DEFAULT_QHDS["linear"], name="constant"),
        "fiber": FunnelFamily(hp, DEFAULT_QHDS["linear"], QuadDiff("z^2", 0.1),
                              name="fiber"),
        "tt_fuchsian": tt_family("halfplane", scale=0.3),
        "tt_halfplane": tt_family("halfplane", DEFAULT_QHDS["linear"], 0.3),
        "tt_same_as_h2": tt_family("halfplane", DEFAULT_QHDS["constant"], 0.3),
        "tt_band": tt_family("band", DEFAULT_QHDS["linear"], 0.2),
        "tt_disk": tt_family("disk", QuadDiff("1+z", 0.2), 0.3, QuadDiff("z", 0.1)),
        "mixed": tt_family("halfplane", DEFAULT_QHDS["linear"], 0.2, QuadDiff("1", 0.1)),
        "killing": FunnelFamily(hp, displacement=("0.3*(y1^2-y2^2)", "0.6*y1*y2"),
                                name="killing"),
        "zero_flux": FunnelFamily(DEFAULT_PATCHES["band"], DEFAULT_QHDS["linear"],
                                  displacement=("0.05*sin(2*pi*y1)",
                                                "0.1*(0.36-y2^2)*cos(2*pi*y1)"),
                                  name="zero_flux"),
    }


def load_family_spec(source: str) -> FunnelFamily:
    """Parse a ``[family]`` spec (file path or text).

    Keys: ``patch`` (a default patch name), ``f`` and ``f_dot`` (expressions
    in ``z``), ``x0``, ``name`` and either ``tt_scale`` (the shipped TT
    displacement with ``h0_dot = tt_scale * Re(dz^2)``) or ``v1, v2``
    (displacement in ``y1, y2``) with an optional declared ``h0_dot`` (in ``z``).
    Errors are :class:`SpecError` with a byte offset.
    """
    sections = parse_spec(read_spec_source(source))
    if "family" not in sections:
        raise SpecError("family spec needs a [family] section", 0)
    sec = sections["family"]
    patch_name = sec.get("patch", "halfplane")
    if patch_name not in DEFAULT_PATCHES:
        raise SpecError(f"unknown patch {patch_name!r} (choose from "
                        f"{', '.join(DEFAULT_PATCHES)})", sec.offsets.get("patch", sec.offset))
    qd = QuadDiff(_expression(sec, "f", "0", ["z"]))
    qd_dot = QuadDiff(_expression(sec, "f_dot", "0", ["z"]))
    x0 = sec.number("x0", 0.5)
    name = sec.get("name", "family")
    try:
        if "tt_scale" in sec.values:
            if patch_name not in TT_DISPLACEMENTS:
                raise SpecError(f"no TT displacement for patch {patch_name!r}",
                                sec.offsets["patch"])
            fam = tt_family(patch_name, qd, sec.number("tt_scale"), qd_dot, x0)
            return replace(fam, name=name)
        disp = (_expression(sec, "v1", "0", ["y1", "y2"]),
                _expression(sec, "v2", "0", ["y1", "y2"]))
        h0_dot = QuadDiff(_expression(sec, "h0_dot", "0", ["z"])) \
            if "h0_dot" in sec.values else None
        return FunnelFamily(DEFAULT_PATCHES[patch_name], qd, qd_dot, disp, h0_dot, x0, name)
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"inadmissible family: {exc}", sec.offset) from None
