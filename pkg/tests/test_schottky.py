import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcs.hyperbolic3 import MoebiusMap
from hypcs.schottky import (
    Circle, SchottkyError, SchottkyGroup, apollonius_circle, build_group, circle_pairing,
    cyclic_group, cyclically_reduced_count, decode_word, encode_word, far_separated_group,
    fixed_points, group_spec_from_text, holomorphy_residual, limit_set_dimension,
    loxodromic_from_fixed_points, mobius_image_of_disk, multiplier, multiplier_from_trace,
    nested_disk_radii, primitive_class_count, primitive_classes, reduced_words, word_string,
    zograf_f)
from hypcs.specfile import SpecError

from free_group_oracle import all_reduced, brute_primitive_classes

FAR = far_separated_group()


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_class_enumeration_matches_brute_force(n):
    brute = brute_primitive_classes(2, n)
    ours = [c for c in primitive_classes(FAR, n) if c.length == n]
    assert len(ours) == len(brute) == primitive_class_count(2, n)
    covered = [next(i for i, orb in enumerate(brute) if c.letters in orb) for c in ours]
    assert sorted(covered) == list(range(len(brute)))


@pytest.mark.parametrize("n, expected", [(1, 4), (2, 4), (3, 8), (4, 18)])
def test_primitive_class_counts_genus_two(n, expected):
    assert primitive_class_count(2, n) == expected


@pytest.mark.parametrize("g", [1, 2, 3])
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_cyclically_reduced_count_by_enumeration(g, n):
    brute = sum(1 for w in all_reduced(g, n) if w[0] != (w[-1] + g) % (2 * g))
    assert cyclically_reduced_count(g, n) == brute


@pytest.mark.parametrize("g, n", [(1, 3), (2, 3), (3, 2), (2, 5)])
def test_reduced_words_are_sorted_and_complete(g, n):
    bits = max(1, (2 * g - 1).bit_length())
    codes = list(reduced_words(g, n))
    assert codes == sorted(codes)
    assert sorted(decode_word(c, n, bits) for c in codes) == sorted(all_reduced(g, n))


@given(st.lists(st.integers(0, 3), min_size=1, max_size=8))
def test_encode_decode_roundtrip(letters):
    assert decode_word(encode_word(letters, 2), len(letters), 2) == tuple(letters)


def test_word_string():
    assert word_string((0, 1, 2, 3), 2) == "abAB"


# circles, multipliers ---------------------------------------------------------------

def test_multiplier_of_diagonal_map():
    assert abs(multiplier(MoebiusMap(2, 0, 0, 0.5)) - 0.25) <= 1e-15


@pytest.mark.parametrize("trace", [2.0, -2.0, 1.0, 0.5 + 0j])
def test_non_loxodromic_rejected(trace):
    with pytest.raises(SchottkyError):
        multiplier_from_trace(trace)


def test_parabolic_generator_rejected():
    with pytest.raises(SchottkyError):
        multiplier(MoebiusMap(1, 1, 0, 1))


@given(st.floats(0.05, 0.9), st.floats(0, 2 * math.pi), st.complex_numbers(max_magnitude=3),
       st.complex_numbers(max_magnitude=3))
@settings(max_examples=40)
def test_loxodromic_from_fixed_points(r, arg, a, b):
    if abs(a - b) < 0.1:
        return
    q = r * cmath.exp(1j * arg)
    m = loxodromic_from_fixed_points(a, b, q)
    assert abs(multiplier(m) - q) <= 1e-9
    att, rep = fixed_points(m)
    assert abs(att - a) <= 1e-8 and abs(rep - b) <= 1e-8


@pytest.mark.parametrize("twist", [0.0, 0.7, -2.0])
def test_circle_pairing_maps_circle_to_circle(twist):
    src, dst = Circle(0.3 + 0.1j, 0.2), Circle(-1 + 0.5j, 0.35)
    m = circle_pairing(src, dst, twist)
    img = np.array([m.act(z) for z in src.points(32)])
    assert np.abs(np.abs(img - dst.center) - dst.radius).max() <= 1e-12
    assert abs(m.act(src.center + 10) - dst.center) < dst.radius


def test_untwisted_pairing_matches_facing_points():
    src, dst = Circle(0, 0.2), Circle(2, 0.3)
    assert abs(circle_pairing(src, dst).act(0.2) - 1.7) <= 1e-12


@given(st.complex_numbers(max_magnitude=2), st.floats(0.05, 0.5))
@settings(max_examples=40)
def test_disk_image_closed_form(center, radius):
    mat = np.array([[1, 0.3j], [0.5, 1 + 0.15j]])
    mat = mat / np.sqrt(np.linalg.det(mat))
    pole = -mat[1, 1] / mat[1, 0]
    if abs(pole - center) <= radius * 1.2:
        return
    c, r = mobius_image_of_disk(mat, center, radius)
    pts = Circle(center, radius).points(24)
    img = (mat[0, 0] * pts + mat[0, 1]) / (mat[1, 0] * pts + mat[1, 1])
    assert np.abs(np.abs(img - c) - r).max() <= 1e-9 * max(1, r)


def test_apollonius_circle():
    c = apollonius_circle(-1, 1, 0.5)
    pts = c.points(16)
    assert np.allclose(np.abs(pts + 1), 0.5 * np.abs(pts - 1))
    with pytest.raises(SchottkyError):
        apollonius_circle(-1, 1, 1.0)


# group validation -------------------------------------------------------------------

def test_far_separated_group_multipliers():
    for gen in FAR.generators:
        assert abs(abs(multiplier(gen)) - 1.2531e-3) <= 1e-7


def test_tangent_circles_rejected():
    a, b = Circle(0, 1), Circle(2, 1)
    c, d = Circle(10, 1), Circle(20, 1)
    with pytest.raises(SchottkyError, match="C_1 and C_-1"):
        SchottkyGroup((circle_pairing(a, b), circle_pairing(c, d)), ((a, b), (c, d)))


def test_overlapping_pair_named():
    a, b = Circle(0, 0.1), Circle(3, 0.1)
    c, d = Circle(0.15, 0.1), Circle(-3, 0.1)
    with pytest.raises(SchottkyError, match="C_1 and C_2"):
        SchottkyGroup((circle_pairing(a, b), circle_pairing(c, d)), ((a, b), (c, d)))


def test_mismatched_pairing_rejected():
    a, b = Circle(0, 0.1), Circle(3, 0.1)
    wrong = circle_pairing(a, Circle(3, 0.2))
    with pytest.raises(SchottkyError, match="does not map"):
        SchottkyGroup((wrong,), ((a, b),))


def test_conjugation_invariance():
    sigma = MoebiusMap(1, 0.2j, 0.1, 1 + 0.02j)
    conj = FAR.conjugate(sigma)
    for c1, c2 in zip(primitive_classes(FAR, 3), primitive_classes(conj, 3)):
        assert abs(c1.multiplier - c2.multiplier) <= 1e-12
    assert abs(zograf_f(FAR, 4).value - zograf_f(conj, 4).value) <= 1e-12


# spec input -------------------------------------------------------------------------

GROUP_TEXT = """
[group]
genus = 2
normalization = "as given"
[gen 1]
circles = "1, 0.05, 1i, 0.05"
[gen 2]
circles = "-1, 0.05, -1i, 0.05"
"""


def test_group_from_spec_text():
    g = build_group(GROUP_TEXT)
    assert g.genus == 2
    assert abs(zograf_f(g, 4).value - zograf_f(FAR, 4).value) <= 1e-14


def test_matrix_generator_uses_isometric_circles():
    text = "[group]\ngenus = 1\n[gen 1]\nmatrix = \"3, 0, 1, 1/3\"\n"
    with pytest.raises(SpecError):
        group_spec_from_text(text)
    m = np.array([[3, 1], [1, 2 / 3]])
    g = build_group({"genus": 1, "generators": [{"matrix": list(m.ravel())}]})
    assert abs(g.circles[0][0].radius - 1) <= 1e-15


def test_matrix_with_zero_c_needs_circles():
    with pytest.raises(SchottkyError):
        build_group({"generators": [{"matrix": [2, 0, 0, 0.5]}]})


@pytest.mark.parametrize("text", [
    "[group]\ngenus = 2\n[gen 1]\ncircles = \"1, 0.05, 1i\"\n",
    "[group]\ngenus = x\n",
    "[group]\ngenus = 1\n",
    "[gen 1]\ncircles = \"1, 0.05, 1i, 0.05\"\n",
])
def test_malformed_group_spec(text):
    with pytest.raises(SpecError) as info:
        group_spec_from_text(text)
    assert 0 <= info.value.offset <= len(text)


# dimension --------------------------------------------------------------------------

def test_dimension_far_separated():
    est = limit_set_dimension(FAR, 5)
    assert abs(est.value - 0.15908) <= 2e-4
    assert est.converged and est.bracket[1] - est.bracket[0] <= 0.02


def test_dimension_decreases_with_radius():
    small = limit_set_dimension(far_separated_group(0.025), 5).value
    assert small < limit_set_dimension(FAR, 5).value
    assert abs(small - 0.13245) <= 2e-4


def test_dimension_cyclic_group_is_zero():
    assert limit_set_dimension(cyclic_group(), 4).value == 0.0


def test_dimension_needs_two_lengths():
    with pytest.raises(ValueError):
        limit_set_dimension(FAR, 1)


def test_nested_radii_shrink():
    r3, r4 = nested_disk_radii(FAR, 3), nested_disk_radii(FAR, 4)
    assert len(r3) == 4 * 3 ** 2 and len(r4) == 4 * 3 ** 3
    assert r4.max() < r3.max()


# Zograf's product -------------------------------------------------------------------

def test_zograf_cyclic_group_closed_form():
    mmax = 30
    expected = np.prod([1 - 0.25 ** (1 + m) for m in range(mmax + 1)]) ** 2
    res = zograf_f(cyclic_group(), 3, mmax)
    assert res.class_count == 2
    assert abs(res.value - expected) <= 1e-14
    assert abs(expected - 0.47408394) <= 1e-8
    assert abs(res.value_inverse_identified - math.sqrt(expected)) <= 1e-14


def test_zograf_dual_route_brute_force():
    """Same product from brute-force classes and numpy eigenvalues."""
    value = 1.0 + 0j
    for n in range(1, 5):
        for orbit in brute_primitive_classes(2, n):
            w = min(orbit)
            lam = max(np.linalg.eigvals(FAR.word_matrix(w)), key=abs)
            q = 1 / lam ** 2
            value *= np.prod([1 - q ** (1 + m) for m in range(21)])
    assert abs(zograf_f(FAR, 4, 20).value - value) <= 1e-13


@pytest.mark.parametrize("maxlen", range(0, 6))
def test_zograf_tail_bounds_next_truncation(maxlen):
    now, nxt = zograf_f(FAR, maxlen), zograf_f(FAR, maxlen + 1)
    assert abs(nxt.value - now.value) <= now.tail
    assert nxt.tail < now.tail


def test_zograf_value_far_separated():
    res = zograf_f(FAR, 6)
    assert abs(res.value - 0.99498670321407) <= 1e-13
    assert res.tail <= 1e-14
    assert set(res.to_json_dict()) >= {"value", "tail", "class_count", "convention"}


def test_holomorphy_of_shift_family():
    assert holomorphy_residual(lambda w: far_separated_group(shift=w)) <= 1e-6


def test_radius_family_is_not_holomorphic():
    def family(w):
        return far_separated_group(0.05 + w.real + 0 * w.imag)
    assert holomorphy_residual(family, 0.0, 1e-4) >= 0.5
