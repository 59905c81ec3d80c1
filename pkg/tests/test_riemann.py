import cmath
import math

import numpy as np
import pytest

from hypcs.riemann import (
    BetaPath, PathPlanningError, TailError, path_integral, period_matrix, plan_beta_paths,
    poincare_differential)
from hypcs.schottky import (
    Circle, SchottkyGroup, circle_pairing, cyclic_group, far_separated_group)

FAR = far_separated_group()


@pytest.fixture(scope="module")
def far_periods():
    return period_matrix(FAR, 5)


@pytest.fixture(scope="module")
def far_diffs():
    return [poincare_differential(FAR, k, 5) for k in range(2)]


def test_cyclic_group_period_is_log_multiplier():
    res = period_matrix(cyclic_group(0.25), 3)
    expected = math.log(0.25) / (2j * math.pi)
    assert abs(res.tau[0, 0] - expected) <= 1e-12
    assert abs(expected - 0.2206356j) <= 1e-7
    assert res.route_defect <= 1e-12


@pytest.mark.parametrize("q", [0.25, 0.1 + 0.2j, 0.6j])
def test_cyclic_group_period_any_multiplier(q):
    res = period_matrix(cyclic_group(q), 3)
    assert abs(cmath.exp(2j * math.pi * res.tau[0, 0]) - q) <= 1e-10
    assert res.tau[0, 0].imag > 0


@pytest.mark.parametrize("j, k", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_a_periods_normalized(far_diffs, j, k):
    val = far_diffs[k].contour_integral(FAR.circles[j][0])
    assert abs(val - (1.0 if j == k else 0.0)) <= 1e-10


@pytest.mark.parametrize("k", [0, 1])
def test_paired_circle_integrals_cancel(far_diffs, k):
    a, b = FAR.circles[k]
    assert abs(far_diffs[k].contour_integral(a) + far_diffs[k].contour_integral(b)) <= 1e-10


@pytest.mark.parametrize("z", [0.3 + 0.2j, -0.4 + 0.5j, 2.0 - 1.0j])
def test_differential_invariance_and_holomorphy(far_diffs, z):
    for d in far_diffs:
        assert d.invariance_defect(z) <= 1e-10
        assert d.cauchy_riemann_residual(z) <= 1e-8


def test_far_separated_period_matrix(far_periods):
    tau = far_periods.tau
    assert far_periods.sym_defect <= 1e-12
    assert abs(tau[0, 0] - 1.06329161j) <= 1e-8
    assert abs(tau[1, 1] - 1.06329161j) <= 1e-8
    assert abs(tau[0, 1] + 0.10991979j) <= 1e-8
    assert far_periods.min_eig_im > 0.95 and far_periods.det_im_tau > 0
    assert far_periods.tail <= 1e-8


def test_period_dual_route(far_periods):
    assert far_periods.route_defect <= 1e-12


def test_diagonal_dominated_by_multiplier(far_periods):
    lead = far_periods.diagonal_leading_terms(FAR)
    assert np.all(np.abs(np.diag(far_periods.tau) - lead) <= 1e-3)


def test_period_matrix_twisted_group():
    res = period_matrix(far_separated_group(twists=(0.7, -0.4)), 5)
    assert res.sym_defect <= 1e-12
    assert res.min_eig_im > 0.9


def test_period_json():
    d = period_matrix(cyclic_group(), 3).to_json_dict()
    assert set(d) >= {"tau", "sym_defect", "min_eig_im", "route_defect", "paths"}


def test_tail_error_reports_needed_length():
    with pytest.raises(TailError) as info:
        poincare_differential(far_separated_group(0.3), 0, 2, tol=1e-12)
    assert info.value.needed > 2


def test_index_out_of_range():
    with pytest.raises(ValueError):
        poincare_differential(FAR, 2)


def test_beta_paths_start_and_end():
    paths = plan_beta_paths(FAR)
    assert [p.index for p in paths] == [0, 1]
    for j, path in enumerate(paths):
        src, dst = FAR.circles[j]
        assert abs(abs(path.vertices[0] - dst.center) - dst.radius) <= 1e-12
        assert abs(abs(path.vertices[-1] - src.center) - src.radius) <= 1e-12


def test_beta_path_detours_around_blocking_disk():
    # a half-turn twist sends the facing point of C_-1 to the far side of C_1,
    # so the straight segment would pass through C_1
    a, b = Circle(-2, 0.2), Circle(2, 0.2)
    c, d = Circle(5 + 5j, 0.3), Circle(5 + 8j, 0.3)
    group = SchottkyGroup((circle_pairing(a, b, math.pi), circle_pairing(c, d)),
                          ((a, b), (c, d)))
    path = plan_beta_paths(group)[0]
    assert abs(path.vertices[-1] - (-2.2)) <= 1e-12
    assert len(path.vertices) > 2
    pts = path.sample(400)
    for disk in group.all_circles:
        assert np.all(np.abs(pts - disk.center) >= disk.radius * (1 - 1e-9))


def test_crossing_beta_paths_rejected():
    a, b = Circle(-1, 0.1), Circle(1, 0.1)
    c, d = Circle(-1j, 0.1), Circle(1j, 0.1)
    group = SchottkyGroup((circle_pairing(a, b), circle_pairing(c, d)), ((a, b), (c, d)))
    with pytest.raises(PathPlanningError, match="crosses"):
        plan_beta_paths(group)


def test_path_integral_of_straight_segment():
    g = cyclic_group()
    diff = poincare_differential(g, 0, 2)
    path = BetaPath(0, [0.5j, 0.5j + 0.1])
    exact = (cmath.log((0.5j + 0.1 - 1) / (0.5j + 0.1 + 1))
             - cmath.log((0.5j - 1) / (0.5j + 1))) / (2j * math.pi)
    assert abs(path_integral(diff, path) - exact) <= 1e-13
