import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcs.formcalc import SL2_BASIS
from hypcs.hyperbolic3 import (
    H3Point, MoebiusMap, VectorFieldH3, canonical_lift, complex_connection_apply,
    covariant_derivative, cross_product, curl_field, curl_h3, equivariance_residual,
    frame_of, hyperbolic_distance, killing_field, killing_pair_residual,
    killing_residual, killing_vector, mobius_act_h3, pushforward, random_moebius,
    rotation_about_j, torsion_apply)

J = H3Point.j()


def random_sl2(rng):
    h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h[1, 1] = -h[0, 0]
    return h


def random_point(rng):
    return H3Point(rng.normal(), rng.normal(), rng.uniform(0.3, 2.5))


def closed_form_action(g, p):
    """Independent oracle: explicit formula for (a q + b)(c q + d)^{-1}."""
    z, t = complex(p.y1, p.y2), p.y3
    a, b, c, d = g.a, g.b, g.c, g.d
    den = abs(c * z + d) ** 2 + abs(c) ** 2 * t ** 2
    w = ((a * z + b) * np.conj(c * z + d) + a * np.conj(c) * t ** 2) / den
    return np.array([w.real, w.imag, t / den])


# group action ------------------------------------------------------------

@pytest.mark.parametrize("g, expected", [
    (MoebiusMap.identity(), (0, 0, 1)),
    (MoebiusMap(1, 1, 0, 1), (1, 0, 1)),
    (MoebiusMap(math.sqrt(2), 0, 0, 1 / math.sqrt(2)), (0, 0, 2)),
])
def test_action_examples(g, expected):
    assert np.allclose(mobius_act_h3(g, J).coords, expected, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_action_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    g, p = random_moebius(rng), random_point(rng)
    q = mobius_act_h3(g, p)
    assert q.y3 > 0
    assert np.allclose(q.coords, closed_form_action(g, p), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_isometry_and_multiplicativity(seed):
    rng = np.random.default_rng(100 + seed)
    g1, g2 = random_moebius(rng), random_moebius(rng)
    p, q = random_point(rng), random_point(rng)
    d0 = hyperbolic_distance(p, q)
    d1 = hyperbolic_distance(mobius_act_h3(g1, p), mobius_act_h3(g1, q))
    assert abs(d0 - d1) <= 1e-10
    lhs = mobius_act_h3(g1 @ g2, p).coords
    rhs = mobius_act_h3(g1, mobius_act_h3(g2, p)).coords
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_moebius_sign_and_normalisation():
    g = MoebiusMap(2, 0, 0, 2)
    assert abs(g.det() - 1) <= 1e-12
    assert g == MoebiusMap.identity()
    assert MoebiusMap(-1, 0, 0, -1) == MoebiusMap.identity()
    assert MoebiusMap(1, 1, 0, 1) != MoebiusMap(1, -1, 0, 1)
    with pytest.raises(ValueError):
        MoebiusMap(1, 1, 1, 1)


@pytest.mark.parametrize("seed", range(5))
def test_composition_associative(seed):
    rng = np.random.default_rng(200 + seed)
    a, b, c = (random_moebius(rng) for _ in range(3))
    assert ((a @ b) @ c).isclose(a @ (b @ c))
    assert (a @ a.inverse()).isclose(MoebiusMap.identity())


def test_h3point_rejects_boundary():
    with pytest.raises(ValueError):
        H3Point(0, 0, 0)


# frames -----------------------------------------------------------------------

def finite_difference_jacobian(g, p, step=1e-6):
    cols = []
    for k in range(3):
        e = np.eye(3)[k] * step
        plus = closed_form_action(g, H3Point(*(p.coords + e)))
        minus = closed_form_action(g, H3Point(*(p.coords - e)))
        cols.append((plus - minus) / (2 * step))
    return np.stack(cols, axis=1)


@pytest.mark.parametrize("seed", range(5))
def test_pushforward_matches_finite_differences(seed):
    rng = np.random.default_rng(300 + seed)
    g, p = random_moebius(rng), random_point(rng)
    assert np.allclose(pushforward(g, p), finite_difference_jacobian(g, p), atol=1e-7)


def test_frame_examples():
    point, frame = frame_of(MoebiusMap.identity())
    assert point == J and np.allclose(frame, np.eye(3))
    point, frame = frame_of(MoebiusMap(math.sqrt(2), 0, 0, 1 / math.sqrt(2)))
    assert np.allclose(point.coords, (0, 0, 2))
    assert np.allclose(frame, 2 * np.eye(3))


@pytest.mark.parametrize("seed", range(8))
def test_frames_orthonormal_and_right_equivariant(seed):
    rng = np.random.default_rng(400 + seed)
    g = random_moebius(rng)
    rho = rotation_about_j(rng.normal(size=3), rng.uniform(0, 2 * math.pi))
    point, frame = frame_of(g)
    gram = frame.T @ frame / point.y3 ** 2
    assert np.allclose(gram, np.eye(3), atol=1e-10)
    fixed, rotation = frame_of(rho)
    assert np.allclose(fixed.coords, (0, 0, 1), atol=1e-12)
    assert np.allclose(rotation.T @ rotation, np.eye(3), atol=1e-10)
    assert abs(np.linalg.det(rotation) - 1) < 1e-10
    point2, frame2 = frame_of(g @ rho)
    assert np.allclose(point2.coords, point.coords, atol=1e-10)
    assert np.allclose(frame2, frame @ rotation, atol=1e-10)


# Killing fields ------------------------------------------------------------

@pytest.mark.parametrize("k", range(3))
def test_basis_killing_fields_at_j(k):
    assert np.allclose(killing_vector(SL2_BASIS[k], J), 2 * np.eye(3)[k], atol=1e-14)
    assert np.allclose(killing_vector(1j * SL2_BASIS[k], J), 0, atol=1e-14)


def test_killing_field_rejects_trace():
    with pytest.raises(ValueError):
        killing_field(np.eye(2))


def test_killing_field_is_flow_derivative():
    """kappa_h(q) = d/dt exp(t h).q at t = 0 (finite-difference oracle)."""
    rng = np.random.default_rng(7)
    h, p = random_sl2(rng), random_point(rng)
    t = 1e-6

    def flow(s):
        m = np.eye(2) + s * h + (s * h) @ (s * h) / 2
        return closed_form_action(MoebiusMap.from_matrix(m), p)

    fd = (flow(t) - flow(-t)) / (2 * t)
    assert np.allclose(killing_vector(h, p), fd, atol=1e-7)


CASES = list(range(20))


@pytest.mark.parametrize("seed", CASES)
def test_killing_identities_random(seed):
    rng = np.random.default_rng(500 + seed)
    h, p, u = random_sl2(rng), random_point(rng), rng.normal(size=3)
    kappa = killing_field(h)
    assert killing_residual(kappa, p) <= 1e-8
    assert np.abs(-0.5 * curl_h3(kappa, p) - killing_vector(1j * h, p)).max() <= 1e-8
    lift = canonical_lift(kappa)(p)
    assert np.allclose(lift, kappa(p) - 1j * killing_vector(1j * h, p), atol=1e-8)
    assert np.allclose(canonical_lift(killing_field(1j * h))(p), 1j * lift, atol=1e-8)
    assert killing_pair_residual(h, p, u) <= 1e-8
    assert np.abs(complex_connection_apply(u, canonical_lift(kappa), p)).max() <= 1e-8
    assert equivariance_residual(random_moebius(rng), h, p) <= 1e-8


def test_killing_pair_wrong_curvature_fails():
    rng = np.random.default_rng(1)
    h, p, u = random_sl2(rng), random_point(rng), rng.normal(size=3)
    assert killing_pair_residual(h, p, u, curvature=+1.0) > 1e-3


# curl, lift and connection ----------------------------------------------------

def polynomial_field():
    return VectorFieldH3(lambda y1, y2, y3: [y1 * y2, y3 * y3 + y1, y2 * y3 * y1])


def test_curl_flat_mode_constant_field():
    const = VectorFieldH3(lambda y1, y2, y3: [0 * y1 + 1.5, 0 * y1 - 2.0, 0 * y1 + 0.25])
    assert np.allclose(curl_h3(const, (0.3, -0.2, 0.9), metric="euclidean"), 0)
    with pytest.raises(ValueError):
        curl_field(const, metric="spherical")


@pytest.mark.parametrize("seed", range(4))
def test_curl_against_finite_differences(seed):
    rng = np.random.default_rng(600 + seed)
    p = random_point(rng).coords
    u = polynomial_field()
    step = 1e-5

    def flat(x):
        return u(x) / x[2] ** 2

    grad = np.stack([(flat(p + step * e) - flat(p - step * e)) / (2 * step)
                     for e in np.eye(3)])      # grad[i, j] = d_i u_j
    rot = np.array([grad[1, 2] - grad[2, 1], grad[2, 0] - grad[0, 2],
                    grad[0, 1] - grad[1, 0]])
    assert np.allclose(curl_h3(u, p), p[2] ** 3 * rot, atol=1e-6)


def test_lift_is_linear_and_zero_on_zero():
    rng = np.random.default_rng(3)
    p = random_point(rng)
    zero = VectorFieldH3(lambda y1, y2, y3: [0 * y1, 0 * y1, 0 * y1])
    assert np.allclose(canonical_lift(zero)(p), 0)
    h1, h2 = random_sl2(rng), random_sl2(rng)
    combo = canonical_lift(killing_field(h1).scale(2.0) + killing_field(h2))(p)
    parts = 2 * canonical_lift(killing_field(h1))(p) + canonical_lift(killing_field(h2))(p)
    assert np.allclose(combo, parts, atol=1e-12)


def test_connection_negative_control():
    rng = np.random.default_rng(11)
    p, u = random_point(rng), rng.normal(size=3)
    s = canonical_lift(polynomial_field())
    assert np.abs(complex_connection_apply(u, s, p)).max() > 1e-3
    assert killing_residual(polynomial_field(), p) > 1e-3


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.floats(0.2, 3))
@settings(max_examples=30, deadline=None)
def test_cross_product_metric_properties(vals, y3):
    v, w = np.array(vals[:3]), np.array(vals[3:])
    p = H3Point(0.1, -0.4, y3)
    c = cross_product(v, w, p)
    g = np.eye(3) / y3 ** 2
    assert abs(c @ g @ v) <= 1e-9 * (1 + np.abs(c).max() * np.abs(v).max())
    assert abs(c @ g @ w) <= 1e-9 * (1 + np.abs(c).max() * np.abs(w).max())
    assert np.allclose(torsion_apply(v, w, p), -c)
    e = np.eye(3) * y3    # orthonormal frame at p
    assert np.allclose(cross_product(e[0], e[1], p), e[2])


def test_covariant_derivative_of_coordinate_field():
    """nabla_{d3} d3 = -d3 / y3 for dy^2 / y3^2 (closed form)."""
    d3 = VectorFieldH3(lambda y1, y2, y3: [0 * y1, 0 * y1, 0 * y1 + 1.0])
    p = H3Point(0.2, 0.1, 1.7)
    assert np.allclose(covariant_derivative([0, 0, 1], d3, p), [0, 0, -1 / 1.7])
    assert np.allclose(covariant_derivative([1, 0, 0], d3, p), [-1 / 1.7, 0, 0])
