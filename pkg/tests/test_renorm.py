import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcs.exprcalc.jets import Jet
from hypcs.formcalc import wedge
from hypcs.funnel import DEFAULT_PATCHES, DEFAULT_QHDS, FunnelData, connection_forms
from hypcs.renorm import (
    BOUNDARY_FORMS, FitError, cs_psl_density, density_report, fp_boundary_density,
    fp_extract, patch_grid, volr_closed_form, volr_funnel_density)

EPS = np.geomspace(0.02, 0.2, 12)


# finite-part extraction --------------------------------------------------------

@pytest.mark.parametrize("fn, order, with_log, expected", [
    (lambda e: 1 / e - 1, 1, False, -1.0),
    (lambda e: -np.log(e), 0, True, 0.0),
    (lambda e: 3 / e ** 2 + 2 / e + 0.5 * np.log(e) + 7 + e ** 2, 2, True, 7.0),
])
def test_fp_extract_synthetic(fn, order, with_log, expected):
    fit = fp_extract(EPS, fn(EPS), order, with_log=with_log, n_positive=2)
    assert abs(fit.c0 - expected) <= 1e-10


def test_fp_extract_fuchsian_volume_integrand():
    """int_eps^1 x^-3 (1 + x^2/4)^2 dx in closed form; FP = -15/32."""
    def antiderivative(x):
        return -0.5 / x ** 2 + 0.5 * np.log(x) + x ** 2 / 32

    vals = antiderivative(1.0) - antiderivative(EPS)
    fit = fp_extract(EPS, vals, 2, with_log=True)
    assert abs(fit.c0 + 15 / 32) <= 1e-10
    assert abs(fit.c_log + 0.5) <= 1e-10


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=30, deadline=None)
def test_fp_extract_recovers_coefficients(a, b, c, d):
    vals = a / EPS ** 2 + b * np.log(EPS) + c + d * EPS
    fit = fp_extract(EPS, vals, 2, with_log=True, n_positive=2)
    assert abs(fit.c0 - c) <= 1e-8 and abs(fit.c_log - b) <= 1e-8
    assert abs(fit.poles[0] - a) <= 1e-8


def test_fp_extract_errors():
    with pytest.raises(FitError):
        fp_extract(EPS[:3], EPS[:3], 2, with_log=True)
    with pytest.raises(FitError):
        fp_extract(-EPS, EPS, 1)
    with pytest.raises(FitError):   # missing log term: unstable finite part
        fp_extract(EPS, np.log(EPS) * 100, 1, n_positive=1, tol=1e-10)


# renormalized volume -------------------------------------------------------------

@pytest.mark.parametrize("x0", [1.0, 0.5, 0.8])
def test_volr_fuchsian(x0):
    f = FunnelData(DEFAULT_PATCHES["halfplane"], x0=x0)
    fp, logc, _ = volr_funnel_density(f)
    assert abs(fp - volr_closed_form(x0)) <= 1e-8
    assert abs(logc - 0.5) <= 1e-8


def test_volr_value_at_one():
    assert volr_closed_form(1.0) == -15 / 32


@pytest.mark.parametrize("patch", ["disk", "band"])
def test_volr_with_quadratic_differential(patch):
    """det(1 + x^2 A/2) oracle: FP density = closed form with per-point det A."""
    f = FunnelData(DEFAULT_PATCHES[patch], DEFAULT_QHDS["linear"], x0=0.5)
    fp, logc, _ = volr_funnel_density(f)
    y1, y2, w = patch_grid(f, 8)
    ys = Jet.seeds([y1, y2], 0)
    det_a = np.linalg.det(f.endomorphism(*ys).value).real
    area_density = np.exp(2 * f.patch.conformal_factor(*ys).value.real)
    mean_det = np.sum(w * area_density * det_a) / np.sum(w * area_density)
    assert abs(fp - volr_closed_form(0.5, 1.0, mean_det)) <= 1e-8
    assert abs(logc - 0.5) <= 1e-8


# boundary finite parts ------------------------------------------------------------

def test_boundary_forms_fuchsian_closed_form():
    """Hand computation on the Fuchsian half-plane funnel, c = 1 + x^2/4."""
    f = connection_forms(FunnelData(DEFAULT_PATCHES["halfplane"], x0=1.0))
    x, y1, y2 = 0.3, 0.2, 1.3
    c = 1 + x * x / 4
    pt = [np.array([x]), np.array([y1]), np.array([y2])]
    t_alpha = wedge(f.torsion, f.alpha).trace()(pt)[0, 2, 0, 0]
    t_omega_hat = wedge(f.torsion, f.omega_hat).trace()(pt)[0, 2, 0, 0]
    assert abs(t_alpha + 4 * c * c / (x * y2) ** 2) <= 1e-10
    assert abs(t_omega_hat + 2 * c / y2 ** 2) <= 1e-10


# Frozen values (see ledger): T^alpha and T^omega_hat both give -2 Tr A,
# so T^omega = T^omega_hat - T^alpha has finite part 0.
EXPECTED_FP = {"T^alpha": -2.0, "T^omega_hat": -2.0, "T^omega": 0.0, "alpha^omega": 0.0}


@pytest.mark.parametrize("patch", ["halfplane", "disk", "band"])
@pytest.mark.parametrize("qhd", ["zero", "linear", "exponential"])
@pytest.mark.parametrize("which", BOUNDARY_FORMS)
def test_fp_boundary_density(patch, qhd, which):
    f = FunnelData(DEFAULT_PATCHES[patch], DEFAULT_QHDS[qhd])
    fit = fp_boundary_density(f, which, grid=6)
    assert abs(fit.c0 - EXPECTED_FP[which]) <= 1e-5


def test_fp_boundary_linear_relation():
    f = FunnelData(DEFAULT_PATCHES["disk"], DEFAULT_QHDS["quadratic"])
    vals = {w: fp_boundary_density(f, w, grid=6).c0 for w in BOUNDARY_FORMS}
    assert abs(vals["T^omega"] - (vals["T^omega_hat"] - vals["T^alpha"])) <= 1e-9


def test_fp_boundary_unknown_form():
    f = FunnelData(DEFAULT_PATCHES["halfplane"])
    with pytest.raises(ValueError):
        fp_boundary_density(f, "omega^omega")


# PSL assembly ----------------------------------------------------------------------

@pytest.mark.parametrize("patch, qhd", [("halfplane", "linear"), ("band", "linear")])
def test_cs_psl_cutoff_independence(patch, qhd):
    r = cs_psl_density(FunnelData(DEFAULT_PATCHES[patch], DEFAULT_QHDS[qhd]))
    assert r["spread"] <= 1e-5
    assert abs(r["chi_coefficient"]) <= 1e-6
    assert r["matches"] == "0 (no Euler term)"
    assert set(r["candidates"]) >= {"i/2pi", "i/4pi"}


def test_cs_psl_rejects_inadmissible_cutoff():
    f = FunnelData(DEFAULT_PATCHES["band"], DEFAULT_QHDS["exponential"])
    with pytest.raises(ValueError):
        cs_psl_density(f, cutoffs=(0.3, 0.8))


def test_density_report_json():
    import json
    rep = density_report(FunnelData(DEFAULT_PATCHES["halfplane"], x0=1.0), grid=4)
    d = json.loads(json.dumps(rep.to_json_dict()))
    assert abs(d["volr_density"] + 15 / 32) <= 1e-8
    assert abs(d["log_coeff"] - 0.5) <= 1e-8
    assert set(d["fp_boundary"]) == set(BOUNDARY_FORMS)
    assert math.isclose(d["x0"], 1.0)
