import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latchvdp.gspt import (FOLDED_FOCUS, FOLDED_SADDLE, critical_manifold_lift, desingularized_jacobian,
                           desingularized_rhs, fast_rhs, find_folded_singularities, layer_jacobian,
                           reduced_rhs, slow_rhs)
from latchvdp.model import TABLE1


def _by_location(sing):
    return {(round(s.x1, 3), round(s.x2, 3)): s for s in sing}


def test_six_singularities_at_table1():
    sing = find_folded_singularities(TABLE1)
    assert len(sing) == 6
    found = _by_location(sing)
    expected = {(-1.0, -1.0): FOLDED_SADDLE, (1.0, 1.0): FOLDED_SADDLE,
                (-1.0, 1.0): FOLDED_FOCUS, (1.0, -1.0): FOLDED_FOCUS,
                (-1.0, -1.447): FOLDED_SADDLE, (-1.447, -1.0): FOLDED_SADDLE}
    assert set(found) == set(expected)
    for loc, kind in expected.items():
        assert found[loc].kind == kind


def test_off_corner_points_solve_the_slow_equation():
    for s in find_folded_singularities(TABLE1):
        if len(s.fold_lines) == 1:
            g1, g2 = slow_rhs(s.x1, s.x2, TABLE1)
            g = g1 if s.fold_lines[0].startswith("L1") else g2
            assert abs(g) < 1e-12


def test_off_corner_points_become_stable_foci_at_b_2_05():
    sing = find_folded_singularities(TABLE1.with_(b=2.05))
    near = [s for s in sing if len(s.fold_lines) == 1]
    assert len(near) == 2
    for s in near:
        assert s.kind == FOLDED_FOCUS and s.stability == "stable"


@settings(max_examples=50, deadline=None)
@given(st.floats(-2.5, 2.5), st.floats(-2.5, 2.5))
def test_critical_manifold_is_layer_equilibrium(x1, x2):
    s = critical_manifold_lift(x1, x2)
    assert np.max(np.abs(fast_rhs(s))) < 1e-12


def test_layer_jacobian_singular_on_folds():
    for x1, x2 in [(-1.0, 0.3), (0.2, 1.0), (1.0, -1.0)]:
        assert np.linalg.det(layer_jacobian(x1, x2)) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_desingularized_flow_is_rescaled_reduced_flow(x1, x2):
    d = (x1 * x1 - 1.0) * (x2 * x2 - 1.0)
    if abs(d) < 1e-3:
        return
    r = np.array(reduced_rhs(x1, x2, TABLE1))
    q = np.array(desingularized_rhs(x1, x2, TABLE1))
    # time rescaling by det: the two flows agree up to the factor det
    np.testing.assert_allclose(q, d * r, rtol=1e-10, atol=1e-12)


def test_orientation_flips_across_fold():
    # same reduced direction, opposite desingularized direction on either side of x1 = -1
    x2 = -1.8
    r_in = np.array(reduced_rhs(-0.9, x2, TABLE1))
    r_out = np.array(reduced_rhs(-1.1, x2, TABLE1))
    q_in = np.array(desingularized_rhs(-0.9, x2, TABLE1))
    q_out = np.array(desingularized_rhs(-1.1, x2, TABLE1))
    s_in = np.sign(q_in[0] / r_in[0])
    s_out = np.sign(q_out[0] / r_out[0])
    assert s_in == -s_out


def test_desingularized_jacobian_central_difference():
    h = 1e-6
    for x1, x2 in [(-1.0, -1.4466), (0.3, -0.7), (1.2, 0.5)]:
        J = desingularized_jacobian(x1, x2, TABLE1)
        fd = np.column_stack([
            (np.array(desingularized_rhs(x1 + h, x2, TABLE1)) - np.array(desingularized_rhs(x1 - h, x2, TABLE1))) / (2 * h),
            (np.array(desingularized_rhs(x1, x2 + h, TABLE1)) - np.array(desingularized_rhs(x1, x2 - h, TABLE1))) / (2 * h),
        ])
        np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-8)
