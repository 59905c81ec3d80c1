"""Gauge maps, the gauge-transformation law and the WZW degree integral."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..exprcalc import jets
from ..exprcalc.jets import Jet
from .forms import (MatrixForm, assemble, cs_form, exterior_d, sup_norm,
                    wedge)
from .quadrature import Axis, integrate, integrate_refined


@dataclass
class GaugeMap:
    """Matrix-valued function on a patch with a declared target group.

    ``fn(coords)`` receives coordinate jets and returns a jet with trailing
    shape ``(n, n)``.  ``target`` is "SO(3)" or "PSL2C" (an SL2 lift).
    """

    fn: Callable
    dim: int
    size: int
    target: str = "SO(3)"
    nparams: int = 0
    name: str = ""
    _form: MatrixForm | None = field(default=None, repr=False)

    def as_form(self) -> MatrixForm:
        if self._form is None:
            fn = self.fn
            self._form = MatrixForm(
                0, self.dim, self.size,
                lambda c: _as_jet(fn(c), c)[..., None, :, :],
                nparams=self.nparams)
        return self._form

    def __call__(self, point: Sequence) -> np.ndarray:
        return self.as_form()(point)[..., 0, :, :]

    def group_residual(self, point: Sequence) -> float:
        """Orthogonality (SO(3)) or unit-determinant (PSL2C) defect."""
        m = self(point)
        if self.target == "SO(3)":
            eye = np.eye(self.size)
            orth = np.abs(np.swapaxes(m, -1, -2) @ m - eye).max()
            return float(max(orth, np.abs(np.linalg.det(m) - 1).max()))
        return float(np.abs(np.linalg.det(m) - 1).max())


def _as_jet(value, coords) -> Jet:
    if isinstance(value, Jet):
        return value
    value = np.asarray(value, dtype=complex)
    shape = coords[0].shape
    return Jet.constant(coords[0].space, np.broadcast_to(value, shape + value.shape[-2:]))


def maurer_cartan(a: GaugeMap) -> MatrixForm:
    """``a^{-1} da``."""
    form = a.as_form()
    return wedge(form.inverse(), exterior_d(form))


def gauge_transform(theta: MatrixForm, a: GaugeMap) -> MatrixForm:
    """``a^{-1} theta a + a^{-1} da``."""
    if theta.size != a.size:
        raise ValueError("matrix sizes of connection and gauge map differ")
    form = a.as_form()
    ainv = form.inverse()
    return wedge(wedge(ainv, theta), form) + wedge(ainv, exterior_d(form))


def wznw_form(a: GaugeMap) -> MatrixForm:
    """``Tr(-1/3 (a^{-1} da)^3)``."""
    mc = maurer_cartan(a)
    return wedge(wedge(mc, mc), mc).trace() * (-1.0 / 3.0)


def gauge_cs_residual(theta: MatrixForm, a: GaugeMap, point: Sequence) -> float:
    """Pointwise defect of the transformation law of the Chern-Simons form.

    ``cs(g) - cs(theta) - d Tr(theta ^ da a^{-1}) + 1/3 Tr((a^{-1}da)^3)``.
    """
    form = a.as_form()
    gamma = gauge_transform(theta, a)
    da_ainv = wedge(exterior_d(form), form.inverse())
    rhs = cs_form(theta) + exterior_d(wedge(theta, da_ainv).trace()) \
        + wznw_form(a)
    return sup_norm(cs_form(gamma) - rhs, point)


# closed patches and shipped maps ------------------------------------------

@dataclass(frozen=True)
class ClosedPatch:
    """Chart of a closed 3-manifold: quadrature axes plus orientation sign."""

    axes: tuple
    orientation: int = 1
    name: str = ""


TORUS3 = ClosedPatch((Axis("periodic", 0.0, 1.0),) * 3, 1, "3-torus")
# Hopf chart of S^3: (eta, xi1, xi2) -> (cos eta e^{i xi1}, sin eta e^{i xi2}).
# The orientation sign is fixed so that the double cover S^3 -> SO(3) has
# WZW value -2 (equivalently, degree +2).
SPHERE3 = ClosedPatch((Axis("gauss", 0.0, math.pi / 2),
                       Axis("periodic", 0.0, 2 * math.pi),
                       Axis("periodic", 0.0, 2 * math.pi)), 1, "3-sphere")


def rotation_from_quaternion(w, x, y, z):
    """3x3 rotation matrix of a unit quaternion (entries may be jets)."""
    return assemble([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def su2_from_quaternion(w, x, y, z):
    """2x2 unitary matrix ``w + x I + y J + z K`` in the SU(2) model."""
    i = 1j
    return assemble([[w + i * x, y + i * z], [-y + i * z, w - i * x]])


def hopf_quaternion(eta, xi1, xi2):
    """Unit quaternion ``(cos eta e^{i xi1}, sin eta e^{i xi2})``."""
    ce, se = jets.cos(eta), jets.sin(eta)
    return (ce * jets.cos(xi1), ce * jets.sin(xi1),
            se * jets.cos(xi2), se * jets.sin(xi2))


def _smoothstep(u: Jet) -> Jet:
    """C^3 step: 0 at u=0, 1 for u >= 1."""
    s = u ** 4 * (35 - 84 * u + 70 * u * u - 20 * u ** 3)
    mask = np.asarray(u.value.real >= 1.0)
    if mask.any():
        s = s.copy()
        s.c[:, mask] = 0.0
        s.c[0][mask] = 1.0
    return s


TORUS_CENTER = (0.5 + 0.0131, 0.5 + 0.0071, 0.5 + 0.0113)
TORUS_RADIUS = 0.38


def hedgehog_quaternion(coords, k: int, center=TORUS_CENTER,
                        radius: float = TORUS_RADIUS):
    """Unit quaternion field equal to 1 outside a ball, winding ``k`` times
    over SU(2) inside it (rotation angle ``k*pi`` at the centre)."""
    d = [c - c0 for c, c0 in zip(coords, center)]
    r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
    s = _smoothstep(r2 / radius ** 2)
    f = (1 - s) * (k * math.pi)
    r = jets.sqrt(r2)
    sin_over_r = jets.sin(f) / r
    return (jets.cos(f), sin_over_r * d[0], sin_over_r * d[1], sin_over_r * d[2])


def builtin_map(name: str) -> tuple:
    """Return ``(GaugeMap, ClosedPatch)`` for a shipped test map.

    Names: "const", "quaternion_cover", "torus_winding(k)".
    """
    name = name.strip()
    if name == "const":
        return GaugeMap(lambda c: np.eye(3), 3, 3, name=name), TORUS3
    if name == "quaternion_cover":
        return GaugeMap(lambda c: rotation_from_quaternion(*hopf_quaternion(*c)),
                        3, 3, name=name), SPHERE3
    m = re.fullmatch(r"torus_winding\(\s*(-?\d+)\s*\)", name)
    if m:
        k = int(m.group(1))
        return GaugeMap(lambda c: rotation_from_quaternion(*hedgehog_quaternion(c, k)),
                        3, 3, name=name), TORUS3
    raise ValueError(f"unknown built-in gauge map {name!r}")


def wznw_degree(a: GaugeMap | str, patch: ClosedPatch | None = None,
                grid: int = 48, tol: float = 1e-3, threads: int = 1) -> float:
    """``(1/16 pi^2) * integral of Tr(-1/3 (a^{-1}da)^3)`` over a closed patch.

    Raises :class:`QuadratureError` if a coarser grid disagrees by more than
    ``tol``.
    """
    if isinstance(a, str):
        a, default = builtin_map(a)
        patch = patch or default
    if patch is None:
        raise ValueError("a closed patch is required for a custom map")
    integrand = wznw_form(a)

    def fn(*coords):
        return integrand(coords)[..., 0, 0, 0]

    value, _ = integrate_refined(fn, patch.axes, grid, tol * 16 * math.pi ** 2,
                                 threads)
    return float((patch.orientation * value / (16 * math.pi ** 2)).real)


def so3_normalization(grid: int = 32) -> float:
    """``-1/(4 pi^2) * integral over K of Tr(-1/3 w^3)`` with the sl2-valued
    Maurer-Cartan form, computed on unit quaternions (a double cover of K)."""
    a = GaugeMap(lambda c: su2_from_quaternion(*hopf_quaternion(*c)), 3, 2,
                 target="PSL2C")
    integrand = wznw_form(a)

    def fn(*coords):
        return integrand(coords)[..., 0, 0, 0]

    total = SPHERE3.orientation * integrate(fn, SPHERE3.axes, grid)
    return float((-(total / 2) / (4 * math.pi ** 2)).real)


# cocycle --------------------------------------------------------------------

BOUNDARY_AXES = (Axis("periodic", 0.0, 1.0), Axis("periodic", 0.0, 1.0))
COLLAR_AXES = (Axis("gauss", 0.0, 1.0),) + BOUNDARY_AXES


def cocycle_value(omega_hat: MatrixForm, a: GaugeMap, a_ext: GaugeMap,
                  grid: int = 48, check_tol: float = 1e-8) -> complex:
    """``exp(2 pi i [ (1/16pi^2) int_M Tr(w ^ da a^{-1})
    + (1/48pi^2) int_X Tr((A^{-1}dA)^3) ])``.

    ``M`` is the unit torus in (y1, y2), ``X = [0,1] x M`` with coordinates
    (x, y1, y2) and boundary ``M = {x = 0}``; ``a_ext`` must restrict to
    ``a`` at ``x = 0`` and be constant at ``x = 1``.
    """
    ys = np.meshgrid(*(ax.rule(8)[0] for ax in BOUNDARY_AXES), indexing="ij")
    zero, one = np.zeros_like(ys[0]), np.ones_like(ys[0])
    if np.abs(a_ext([zero, *ys]) - a(ys)).max() > check_tol:
        raise ValueError("extension does not restrict to the boundary map")
    far = a_ext([one, *ys])
    if np.abs(far - far[:1, :1]).max() > check_tol:
        raise ValueError("extension is not constant on the far face")

    form = a.as_form()
    boundary = wedge(omega_hat, wedge(exterior_d(form), form.inverse())).trace()
    bulk = wznw_form(a_ext)

    b_int = integrate(lambda *c: boundary(c)[..., 0, 0, 0], BOUNDARY_AXES, grid)
    x_int = integrate(lambda *c: bulk(c)[..., 0, 0, 0], COLLAR_AXES, grid)
    # Tr((A^{-1}dA)^3) = -3 * Tr(-1/3 (A^{-1}dA)^3)
    exponent = b_int / (16 * math.pi ** 2) - 3 * x_int / (48 * math.pi ** 2)
    return complex(np.exp(2j * math.pi * exponent))


def rotate_connection(omega_hat: MatrixForm, a: GaugeMap) -> MatrixForm:
    """Connection form of the rotated frame ``S a``."""
    return gauge_transform(omega_hat, a)


def product_map(a: GaugeMap, b: GaugeMap) -> GaugeMap:
    if (a.dim, a.size) != (b.dim, b.size):
        raise ValueError("incompatible gauge maps")
    return GaugeMap(lambda c: _as_jet(a.fn(c), c) @ _as_jet(b.fn(c), c),
                    a.dim, a.size, a.target, a.nparams)
