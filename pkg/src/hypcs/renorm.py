"""Finite parts of cutoff integrals and per-area densities on funnels.

Boundary forms are evaluated on ``(d_y1, d_y2)`` at ``x = eps``, i.e. with the
orientation of ``M``; with this orientation Stokes' formula on
``{x > eps}`` reads ``int d(beta) = -int_{x=eps} beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict, replace
from typing import Sequence

import numpy as np

from .exprcalc.jets import Jet
from .formcalc import Axis, MatrixForm, cs_form, exterior_d, wedge
from .funnel import FunnelData, connection_forms

__all__ = [
    "FitError", "AsymptoticExpansion", "fp_extract", "patch_grid",
    "volume_samples", "volr_funnel_density", "volr_closed_form",
    "boundary_samples", "fp_boundary_density", "cs_psl_density",
    "DensityReport", "density_report", "EULER_DENSITY", "BOUNDARY_FORMS",
]

# Euler characteristic per unit h0-area of a hyperbolic surface (Gauss-Bonnet)
EULER_DENSITY = -1.0 / (2.0 * math.pi)


class FitError(RuntimeError):
    """Raised when a finite-part fit is ill-conditioned or unstable."""


@dataclass
class AsymptoticExpansion:
    """``I(eps) ~ sum_j poles[j] eps^{-(k-j)} + c_log log eps + c0 + ...``."""

    poles: np.ndarray
    c_log: complex
    c0: complex
    positive: np.ndarray
    residual: float
    condition: float
    stability: float

    @property
    def finite_part(self) -> complex:
        return self.c0


def _pole_powers(pole_order: int, step: int) -> list:
    return list(range(pole_order, 0, -step))


def _design(eps: np.ndarray, pole_order: int, with_log: bool, n_positive: int,
            step: int = 1):
    cols = [eps ** (-j) for j in _pole_powers(pole_order, step)]
    if with_log:
        cols.append(np.log(eps))
    cols.append(np.ones_like(eps))
    cols += [eps ** (step * j) for j in range(1, n_positive + 1)]
    return np.stack(cols, axis=1)


def _solve(eps, values, pole_order, with_log, n_positive, step=1):
    a = _design(eps, pole_order, with_log, n_positive, step)
    scale = np.abs(a).max(axis=0)
    coef, *_ = np.linalg.lstsq(a / scale, values, rcond=None)
    coef = coef / scale
    cond = float(np.linalg.cond(a / scale))
    resid = float(np.abs(a @ coef - values).max())
    return coef, cond, resid


def fp_extract(eps: Sequence[float], values: Sequence[complex], pole_order: int,
               with_log: bool = False, n_positive: int = 2,
               tol: float = 1e-8, max_condition: float = 1e12,
               step: int = 1) -> AsymptoticExpansion:
    """Finite part (coefficient of ``eps^0``) by a least-squares fit.

    The model has poles up to ``eps^{-pole_order}``, an optional ``log eps``
    term and ``n_positive`` positive powers; ``step=2`` keeps only even
    powers (expansions of even functions of ``eps``).  The fit is repeated on the
    smaller half of the window; a change above ``10 * tol`` raises
    :class:`FitError`.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=complex)
    if step not in (1, 2):
        raise ValueError("step must be 1 or 2")
    npoles = len(_pole_powers(pole_order, step))
    ncoef = npoles + int(with_log) + 1 + n_positive
    if len(eps) < max(pole_order + 3, ncoef + 1):
        raise FitError("not enough samples for the requested model")
    if np.any(eps <= 0):
        raise FitError("cutoffs must be positive")
    coef, cond, resid = _solve(eps, values, pole_order, with_log, n_positive, step)
    if cond > max_condition:
        raise FitError(f"ill-conditioned fit (condition number {cond:.2e})")
    order = np.argsort(eps)
    half = order[: max(ncoef + 1, len(eps) // 2 + 1)]
    half_coef, _, _ = _solve(eps[half], values[half], pole_order, with_log,
                             n_positive, step)
    k0 = npoles + int(with_log)
    stability = float(abs(half_coef[k0] - coef[k0]))
    if stability > 10 * tol * max(1.0, abs(coef[k0])):
        raise FitError(f"finite part not stable under window halving ({stability:.2e})")
    return AsymptoticExpansion(
        poles=coef[:npoles], c_log=complex(coef[npoles]) if with_log else 0j,
        c0=complex(coef[k0]), positive=coef[k0 + 1:], residual=resid,
        condition=cond, stability=stability)


# quadrature on patches ------------------------------------------------------------

def patch_grid(funnel: FunnelData, n: int = 8) -> tuple:
    """Flattened ``(y1, y2, weights)``; periodic patches use the midpoint rule in y1."""
    p = funnel.patch
    ax1 = Axis("periodic" if p.periodic else "gauss", *p.y1_range)
    ax2 = Axis("gauss", *p.y2_range)
    (x1, w1), (x2, w2) = ax1.rule(n), ax2.rule(n)
    y1, y2 = np.meshgrid(x1, x2, indexing="ij")
    return y1.ravel(), y2.ravel(), np.outer(w1, w2).ravel()


def _h0_area(funnel: FunnelData, y1, y2, w) -> float:
    phi = funnel.patch.conformal_factor(*Jet.seeds([y1, y2], 0)).value.real
    return float(np.sum(w * np.exp(2 * phi)))


def _log_gauss(eps: float, x0: float, n: int):
    """Gauss-Legendre nodes for ``int_eps^x0 dx`` in the variable ``log x``."""
    u, wu = Axis("gauss", math.log(eps), math.log(x0)).rule(n)
    x = np.exp(u)
    return x, wu * x


def _fiber_integral(form: MatrixForm, funnel: FunnelData, eps: float, x0: float,
                    y1, y2, w, nx: int) -> complex:
    """``int_patch int_eps^x0 (top coefficient) dx dy``; parameter
    coordinates of the form, if any, are set to 0."""
    x, wx = _log_gauss(eps, x0, nx)
    xx = np.repeat(x, len(y1))
    pts = [xx, np.tile(y1, nx), np.tile(y2, nx)] + [np.zeros_like(xx)] * form.nparams
    vals = form(pts)[..., 0, 0, 0]
    weights = np.repeat(wx, len(y1)) * np.tile(w, nx)
    return complex(np.sum(vals * weights))


# renormalized volume ------------------------------------------------------------------

def default_eps(lo: float = 0.02, hi: float = 0.2, n: int = 12) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def volume_samples(funnel: FunnelData, eps, grid: int = 8, nx: int = 48) -> np.ndarray:
    """``int_{eps < x < x0} dvol_g`` per unit h0-area, one value per ``eps``."""
    y1, y2, w = patch_grid(funnel, grid)
    area = _h0_area(funnel, y1, y2, w)
    dvol = funnel.framed().volume_form()
    return np.array([_fiber_integral(dvol, funnel, e, funnel.x0, y1, y2, w, nx).real
                     for e in eps]) / area


def volr_funnel_density(funnel: FunnelData, eps=None, grid: int = 8,
                        nx: int = 48) -> tuple:
    """``(FP, log coefficient, expansion)`` of the cutoff volume per unit area.

    The log coefficient is that of ``log(1/eps)``, i.e. the ``x^{-1}``
    coefficient of the volume density, equal to ``Tr(A)/2``.
    """
    eps = default_eps() if eps is None else np.asarray(eps, float)
    vals = volume_samples(funnel, eps, grid, nx)
    fit = fp_extract(eps, vals, 2, with_log=True, n_positive=2, tol=1e-9)
    return fit.c0.real, -fit.c_log.real, fit


def volr_closed_form(x0: float, trace_a: float = 1.0, det_a: float = 0.25) -> float:
    """FP of ``int_eps^x0 x^{-3} (1 + x^2 trA/2 + x^4 detA/4) dx``."""
    return -0.5 / x0 ** 2 + 0.5 * trace_a * math.log(x0) + det_a * x0 ** 2 / 8


# boundary finite parts ----------------------------------------------------------------

def _boundary_forms(funnel: FunnelData) -> dict:
    f = connection_forms(funnel)
    return {
        "T^omega": wedge(f.torsion, f.omega).trace(),
        "alpha^omega": wedge(f.alpha, f.omega).trace(),
        "T^omega_hat": wedge(f.torsion, f.omega_hat).trace(),
        "T^alpha": wedge(f.torsion, f.alpha).trace(),
    }


BOUNDARY_FORMS = ("T^omega", "alpha^omega", "T^omega_hat", "T^alpha")


def boundary_samples(funnel: FunnelData, which: str, eps, grid: int = 8) -> np.ndarray:
    """``int_{x=eps} form(d_y1, d_y2) dy`` per unit h0-area."""
    forms = _boundary_forms(funnel)
    if which not in forms:
        raise ValueError(f"unknown boundary form {which!r}; choose from {BOUNDARY_FORMS}")
    y1, y2, w = patch_grid(funnel, grid)
    area = _h0_area(funnel, y1, y2, w)
    out = []
    for e in eps:
        vals = forms[which]([np.full_like(y1, e), y1, y2])[..., 2, 0, 0]
        out.append(np.sum(vals * w) / area)
    return np.array(out)


def fp_boundary_density(funnel: FunnelData, which: str, eps=None,
                        grid: int = 8) -> AsymptoticExpansion:
    """Finite part of a boundary 2-form on ``{x = eps}`` per unit h0-area."""
    eps = default_eps() if eps is None else np.asarray(eps, float)
    vals = boundary_samples(funnel, which, eps, grid)
    return fp_extract(eps, vals, 2, with_log=True, n_positive=3, tol=1e-7)


# PSL2(C) Chern-Simons assembly ---------------------------------------------------------

def _tangential_part(beta: MatrixForm) -> MatrixForm:
    """``d beta`` minus its ``d_x beta_{12}`` part (the y-divergence of the
    ``dx``-components), as a 3-form."""
    full = exterior_d(beta)

    def jet_fn(point, order):
        j = beta.jet(point, order + 1)
        return full.jet(point, order) - j.diff(0)[..., 2:3, :, :]
    return MatrixForm(3, 3, 1, nparams=beta.nparams, jet_fn=jet_fn)


def cs_psl_density(funnel: FunnelData, cutoffs: Sequence[float] = (0.3, 0.5, 0.8),
                   eps=None, grid: int = 6, nx: int = 40) -> dict:
    """Cutoff-independent PSL2(C) boundary term per unit h0-area.

    For each ``x0`` the complex form ``cs(theta, S) = cs(omega + iT)/4`` is
    integrated over ``eps < x < x0``; removing ``2i dvol``, ``cs(omega)/4``,
    the tangential part of ``(i/4) d Tr(T ^ omega)`` and the far face
    ``(i/4) Tr(T ^ omega)|_{x0}`` leaves ``-(i/4) FP Tr(T ^ omega)|_{eps}``,
    which must not depend on ``x0``.  The total is multiplied by
    ``-1/(4 pi^2)`` and compared with ``c * chi`` per unit area.
    """
    eps = default_eps(0.03, 0.2, 10) if eps is None else np.asarray(eps, float)
    replace(funnel, x0=max(cutoffs))     # raises if the metric degenerates before x0
    y1, y2, w = patch_grid(funnel, grid)
    area = _h0_area(funnel, y1, y2, w)
    f = connection_forms(funnel)
    beta = wedge(f.torsion, f.omega).trace()
    integrand = cs_form(f.omega + f.torsion * 1j) * 0.25 - f.dvol * 2j \
        - cs_form(f.omega) * 0.25 - _tangential_part(beta) * 0.25j
    totals, rows = [], []
    for x0 in cutoffs:
        vals = np.array([_fiber_integral(integrand, funnel, e, x0, y1, y2, w, nx)
                         for e in eps]) / area
        far = np.sum(beta([np.full_like(y1, x0), y1, y2])[..., 2, 0, 0] * w) / area
        fit = fp_extract(eps, vals, 2, with_log=True, n_positive=3, tol=1e-6)
        remainder = fit.c0 - 0.25j * far
        total = -remainder / (4 * math.pi ** 2)
        totals.append(total)
        rows.append({"x0": float(x0), "fp": complex(fit.c0), "far_face": complex(far),
                     "total": complex(total)})
    totals = np.array(totals)
    coefficient = complex(np.mean(totals) / EULER_DENSITY)
    candidates = {"i/2pi": 1j / (2 * math.pi),
                  "i/4pi": 1j / (4 * math.pi),
                  "0 (no Euler term)": 0j}
    match = min(candidates, key=lambda k: abs(candidates[k] - coefficient))
    return {
        "cutoffs": [float(c) for c in cutoffs], "rows": rows,
        "totals": [complex(t) for t in totals],
        "spread": float(np.abs(totals - totals.mean()).max()),
        "chi_coefficient": coefficient, "matches": match,
        "candidates": candidates,
    }


# reports ----------------------------------------------------------------------------

@dataclass
class DensityReport:
    volr_density: float
    log_coeff: float
    fp_boundary: dict
    cutoffs: list
    spread: float
    chi_coefficient: complex
    chi_match: str
    x0: float
    grid: int
    orientation: str = "boundary forms on (d_y1, d_y2); int_X d(beta) = -int_M beta"
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["chi_coefficient"] = [self.chi_coefficient.real, self.chi_coefficient.imag]
        return d


def density_report(funnel: FunnelData, grid: int = 8,
                   cutoffs: Sequence[float] = (0.3, 0.5, 0.8)) -> DensityReport:
    vol, logc, _ = volr_funnel_density(funnel, grid=grid)
    fps = {name: fp_boundary_density(funnel, name, grid=grid).c0.real
           for name in BOUNDARY_FORMS}
    psl = cs_psl_density(funnel, cutoffs, grid=max(4, grid // 2 + 2))
    return DensityReport(volr_density=vol, log_coeff=logc, fp_boundary=fps,
                         cutoffs=list(psl["cutoffs"]), spread=psl["spread"],
                         chi_coefficient=psl["chi_coefficient"],
                         chi_match=psl["matches"], x0=funnel.x0, grid=grid)
