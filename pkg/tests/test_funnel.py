import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcs.exprcalc.jets import Jet
from hypcs.formcalc import sup_norm
from hypcs.funnel import (
    DEFAULT_PATCHES, DEFAULT_QHDS, CuspPatch, FunnelData, HyperbolicPatch,
    QuadDiff, alpha_omega_curvature_residual, boundary_even_part,
    complex_curvature_residual, conformal_change_residual, connection_forms,
    cs_decomposition_residual, cusp_forms, default_funnels, fit_decay_exponent,
    flatness_residual, frame_evenness, funnel_metric, load_funnel_spec,
    sectional_curvature, tr_t_cubed_residual, tt_residuals)

FUNNELS = default_funnels()
IDS = [f.name for f in FUNNELS]


def h3_model():
    """Upper half-space itself: flat boundary patch with A = 0 (sanity mode)."""
    return FunnelData(HyperbolicPatch("0", (0, 1), (0, 1)), QuadDiff("0"),
                      identity_part=0.0, sanity=True)


def sample(funnel, seed, n=12):
    rng = np.random.default_rng(seed)
    return funnel.sample(rng, n), rng.normal(size=(n, 3)), rng.normal(size=(n, 3))


# boundary data ----------------------------------------------------------------

@pytest.mark.parametrize("name", list(DEFAULT_PATCHES))
def test_patches_are_hyperbolic(name):
    patch = DEFAULT_PATCHES[name]
    y1, y2 = patch.sample(np.random.default_rng(0), 50)
    assert np.abs(patch.gauss_curvature(y1, y2) + 1).max() <= 1e-8


@pytest.mark.parametrize("pname", list(DEFAULT_PATCHES))
@pytest.mark.parametrize("qname", list(DEFAULT_QHDS))
def test_qhd_tensors_are_transverse_traceless(pname, qname):
    patch, qd = DEFAULT_PATCHES[pname], DEFAULT_QHDS[qname]
    y1, y2 = patch.sample(np.random.default_rng(1), 20)
    assert qd.cauchy_riemann_residual(y1, y2) <= 1e-8
    tr, div = tt_residuals(patch, qd, y1, y2)
    assert tr <= 1e-12 and div <= 1e-7


def test_non_holomorphic_differential_detected():
    patch = DEFAULT_PATCHES["halfplane"]
    y1, y2 = patch.sample(np.random.default_rng(2), 10)
    assert QuadDiff("conj(z)").cauchy_riemann_residual(y1, y2) > 0.5
    _, div = tt_residuals(patch, QuadDiff("conj(z)", 0.3), y1, y2)
    assert div > 1e-3
    with pytest.raises(ValueError):
        FunnelData(patch, QuadDiff("conj(z)", 0.3))


def test_quad_diff_components_and_rotation():
    qd = QuadDiff("z", 2.0)
    y = Jet.seeds([np.array(0.3), np.array(0.5)], 0)
    k = qd.tensor(*y).value.real
    f = 2.0 * complex(0.3, 0.5)
    assert np.allclose(k, [[f.real, -f.imag], [-f.imag, -f.real]])
    jk = qd.rotated().tensor(*y).value.real
    # J k = v dy1^2 - v dy2^2 + 2 u dy1 dy2
    assert np.allclose(jk, [[f.imag, f.real], [f.real, -f.imag]])
    jjk = qd.rotated().rotated().tensor(*y).value.real
    assert np.allclose(jjk, -k)


def test_admissibility_enforced():
    patch = DEFAULT_PATCHES["halfplane"]
    with pytest.raises(ValueError):
        FunnelData(patch, identity_part=0.45)
    with pytest.raises(ValueError):
        FunnelData(HyperbolicPatch("0"), QuadDiff("0"))
    with pytest.raises(ValueError):
        FunnelData(patch, QuadDiff("1", 200.0))
    with pytest.raises(ValueError):
        FunnelData(patch, x0=0.0)


def test_endomorphism_trace_and_symmetry():
    for funnel in FUNNELS:
        y1, y2 = funnel.patch.sample(np.random.default_rng(3), 10)
        a = funnel.endomorphism(*Jet.seeds([y1, y2], 0)).value.real
        assert np.allclose(np.trace(a, axis1=-2, axis2=-1), 1.0, atol=1e-12)
        assert np.allclose(a, np.swapaxes(a, -1, -2), atol=1e-12)


# metric ------------------------------------------------------------------------

def test_fuchsian_metric_closed_form():
    funnel = FunnelData(DEFAULT_PATCHES["halfplane"])
    x, y1, y2 = 0.37, 0.4, 1.3
    g = funnel_metric(funnel, x, y1, y2)
    h0 = np.eye(2) / y2 ** 2
    assert np.isclose(g[0, 0], 1 / x ** 2)
    assert np.allclose(g[1:, 1:], (1 + x ** 2 / 4) ** 2 * h0 / x ** 2)
    assert np.allclose(g[0, 1:], 0)


@pytest.mark.parametrize("funnel", FUNNELS[:10], ids=IDS[:10])
def test_determinant_oracle_and_boundary_limit(funnel):
    rng = np.random.default_rng(4)
    x, y1, y2 = funnel.sample(rng, 6)
    g = funnel_metric(funnel, x, y1, y2)
    ys = Jet.seeds([y1, y2], 0)
    h0 = funnel.patch.boundary_metric(*ys).value.real
    a = funnel.endomorphism(*ys).value.real
    p = np.eye(2) + x[:, None, None] ** 2 * a / 2
    expected = np.linalg.det(h0) * np.linalg.det(p) ** 2
    assert np.allclose(np.linalg.det(g[:, 1:, 1:] * x[:, None, None] ** 2), expected)
    small = funnel_metric(funnel, np.full(6, 1e-6), y1, y2)
    assert np.allclose(small[:, 1:, 1:] * 1e-12, h0, rtol=1e-9)


def test_metric_rejects_nonpositive_x():
    with pytest.raises(ValueError):
        funnel_metric(FUNNELS[0], 0.0, 0.5, 1.5)


# curvature and structure equations -----------------------------------------------

def test_h3_model_sectional_curvature():
    pt, u, v = sample(h3_model(), 5)
    assert np.allclose(sectional_curvature(h3_model(), pt, u, v), -1.0, atol=1e-12)


@pytest.mark.parametrize("funnel", FUNNELS, ids=IDS)
def test_sectional_curvature_minus_one(funnel):
    pt, u, v = sample(funnel, 6, n=50)
    assert np.abs(sectional_curvature(funnel, pt, u, v) + 1).max() <= 1e-7


@pytest.mark.parametrize("funnel", FUNNELS, ids=IDS)
def test_flatness_and_cs_identities(funnel):
    pt, _, _ = sample(funnel, 7)
    assert flatness_residual(funnel, pt) <= 1e-7
    assert complex_curvature_residual(funnel, pt) <= 1e-7
    assert cs_decomposition_residual(funnel, pt) <= 1e-7
    assert tr_t_cubed_residual(funnel, pt) <= 1e-9
    assert conformal_change_residual(funnel, pt) <= 1e-7
    assert alpha_omega_curvature_residual(funnel, pt) <= 1e-9


def test_inadmissible_endomorphism_negative_control():
    bad = FunnelData(DEFAULT_PATCHES["halfplane"], DEFAULT_QHDS["linear"],
                     identity_part=0.45, sanity=True)
    pt, u, v = sample(bad, 8, n=40)
    assert np.abs(sectional_curvature(bad, pt, u, v) + 1).max() > 1e-3
    assert flatness_residual(bad, pt) > 1e-3


def test_degenerate_plane_rejected():
    pt, u, _ = sample(FUNNELS[0], 9, n=3)
    with pytest.raises(ValueError):
        sectional_curvature(FUNNELS[0], pt, u, 2 * u)


def test_real_part_of_cs():
    """Re cs(omega + iT) = cs(omega) for the real forms omega, T."""
    funnel = FUNNELS[2]
    pt, _, _ = sample(funnel, 10)
    from hypcs.formcalc import cs_form
    f = connection_forms(funnel)
    full = cs_form(f.omega + f.torsion * 1j)(pt)
    assert np.allclose(full.real, cs_form(f.omega)(pt).real, atol=1e-8)


# frames and connection forms ----------------------------------------------------

def test_h3_torsion_is_dual_coframe():
    pt = [np.array([0.3]), np.array([0.2]), np.array([0.5])]
    t = connection_forms(h3_model()).torsion(pt)[0].real   # [c, i, j]
    coframe = np.eye(3) / 0.3                               # S^k = dy_k / x
    assert np.allclose(t[:, 0, 1], coframe[2])
    assert np.allclose(t[:, 1, 2], coframe[0])
    assert np.allclose(t[:, 2, 0], coframe[1])


@pytest.mark.parametrize("funnel", FUNNELS[::3], ids=IDS[::3])
def test_forms_skew_and_hat_decomposition(funnel):
    pt, _, _ = sample(funnel, 11)
    f = connection_forms(funnel)
    for form in (f.omega, f.torsion, f.alpha, f.omega_hat):
        v = form(pt)
        assert np.abs(v + np.swapaxes(v, -1, -2)).max() <= 1e-9
    assert sup_norm(f.omega_hat - f.omega - f.alpha, pt) <= 1e-9


def test_fuchsian_alpha_direct_evaluation():
    """alpha(d_y1) for the Fuchsian funnel from the defining formula."""
    funnel = FunnelData(DEFAULT_PATCHES["halfplane"])
    x, y1, y2 = 0.3, 0.2, 1.4
    alpha = connection_forms(funnel).alpha([np.array([x]), np.array([y1]), np.array([y2])])[0]
    # S_1 = x d_x so S_1(log x) = 1; S_2, S_3 tangent to M.  g(d_y1, S_2) is
    # |d_y1|_g = (1 + x^2/4) / (x y2), g(d_y1, S_1) = g(d_y1, S_3) = 0.
    expected = np.zeros((3, 3))
    expected[1, 0] = (1 + x ** 2 / 4) / (x * y2)
    expected[0, 1] = -expected[1, 0]
    assert np.allclose(alpha[1].real, expected)


@pytest.mark.parametrize("funnel", FUNNELS[::4], ids=IDS[::4])
def test_frames_even_and_boundary_integrand_odd(funnel):
    y1, y2 = funnel.patch.sample(np.random.default_rng(12), 6)
    assert frame_evenness(funnel, y1, y2) <= 1e-12
    for eps in (0.2, 0.05):
        assert boundary_even_part(funnel, eps, y1, y2) <= 1e-6 * eps ** 2


def test_gram_schmidt_frame_is_orthonormal():
    funnel = FUNNELS[7]
    pt, _, _ = sample(funnel, 13)
    coords = Jet.seeds(pt, 0)
    e = funnel.frame(coords).value.real
    g = funnel.metric(coords).value.real
    gram = np.swapaxes(e, -1, -2) @ g @ e
    assert np.allclose(gram, np.eye(3), atol=1e-10)
    assert np.all(np.linalg.det(e) > 0)


# cusps ---------------------------------------------------------------------------

@pytest.mark.parametrize("h", [((1.0, 0.0), (0.0, 1.0)), ((1.0, 0.3), (0.3, 2.0))])
def test_cusp_forms(h):
    rng = np.random.default_rng(14)
    ys = np.geomspace(10, 1000, 7)
    out = cusp_forms(CuspPatch(h), ys, *rng.uniform(0, 1, size=(2, 6)))
    assert out["cs_hat"].max() <= 1e-10
    assert abs(fit_decay_exponent(ys, out["cs"]) + 2) <= 0.05
    assert abs(fit_decay_exponent(ys, out["tr_alpha_omega"]) + 1) <= 0.05


def test_cusp_rejects_bad_metric():
    with pytest.raises(ValueError):
        CuspPatch(((1.0, 0.0), (0.0, -1.0)))


@given(st.floats(-3, -0.5), st.floats(0.1, 5))
@settings(max_examples=20, deadline=None)
def test_decay_fit_recovers_power(power, amplitude):
    ys = np.geomspace(10, 1000, 9)
    assert abs(fit_decay_exponent(ys, amplitude * ys ** power) - power) <= 1e-9


# spec files -----------------------------------------------------------------------

SPEC = """
[patch]
phi = -log(y2)
y1 = 0, 1
y2 = 1, 2
periodic = true
[qhd]
f = exp(2*pi*i*z)
scale = 0.1
[funnel]
x0 = 0.4
grid = 12
"""


def test_spec_file_roundtrip(tmp_path):
    funnel, grid = load_funnel_spec(SPEC)
    assert grid == 12 and funnel.x0 == 0.4 and funnel.patch.periodic
    path = tmp_path / "funnel.ini"
    path.write_text(SPEC)
    funnel2, _ = load_funnel_spec(str(path))
    pt, _, _ = sample(funnel2, 15)
    assert flatness_residual(funnel2, pt) <= 1e-7


def test_spec_file_errors():
    with pytest.raises(ValueError):
        load_funnel_spec("[qhd]\nf = z\n")
    with pytest.raises(Exception):
        load_funnel_spec("[patch]\nphi = -log(\n")
