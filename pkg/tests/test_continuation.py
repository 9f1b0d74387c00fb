import numpy as np
import pytest

from latchvdp.continuation import (HOMOCLINIC, HOPF, PITCHFORK, SNPO, TORUS, continue_equilibria,
                                   orbit_distance, pitchfork_curve, hopf_curve, unstable_manifold)
from latchvdp.continuation.core import LinearSolver
from latchvdp.errors import NotASaddle
from latchvdp.model import TABLE1, swap, symmetric_equilibrium, vector_field


def _kinds(branch, kind):
    return sorted(bp.location[branch.free] for bp in branch.detected if bp.kind == kind)


# --- linear algebra --------------------------------------------------------

@pytest.mark.parametrize("sparse", [False, True])
def test_transposed_solve_reuses_factorization(sparse):
    import scipy.sparse as sp

    rng = np.random.default_rng(3)
    A = rng.normal(size=(12, 12)) + 12 * np.eye(12)
    b = rng.normal(size=12)
    solver = LinearSolver(sp.csc_matrix(A) if sparse else A)
    np.testing.assert_allclose(A @ solver.solve(b), b, atol=1e-12)
    np.testing.assert_allclose(A.T @ solver.solve(b, transposed=True), b, atol=1e-12)


# --- equilibria ------------------------------------------------------------

def test_e0_is_constant_along_b(e0_and_asym):
    e0, _ = e0_and_asym
    np.testing.assert_allclose(e0.states, np.tile(symmetric_equilibrium(TABLE1), (len(e0.points), 1)),
                               atol=1e-12)


def test_primary_pitchfork_at_unit_coupling(e0_and_asym):
    e0, _ = e0_and_asym
    pf = _kinds(e0, PITCHFORK)
    assert len(pf) == 1 and pf[0] == pytest.approx(1.0, abs=1e-8)
    assert [bp for bp in e0.detected if bp.kind == PITCHFORK][0].diagnostics["null_symmetry"] == "antisymmetric"


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_pitchfork_moves_with_steepness(k):
    p = TABLE1.with_(k=k, b=0.0)
    br = continue_equilibria(symmetric_equilibrium(p), p, "b", (0.0, 3.0))
    assert _kinds(br, PITCHFORK) == [pytest.approx(1.0 / k, abs=1e-8)]


def test_asymmetric_branches_are_mirror_images(e0_and_asym):
    _, asym = e0_and_asym
    assert len(asym) == 2
    a, b = asym
    for pt in a.points:
        j = int(np.argmin(np.abs(b.params - pt.param)))
        if abs(b.params[j] - pt.param) < 1e-12:
            assert np.max(np.abs(swap(pt.state) - b.points[j].state)) < 1e-10
    for pt in a.points:
        assert np.max(np.abs(vector_field(pt.state, TABLE1.with_(b=pt.param)))) < 1e-10


def test_two_hopf_points_on_asymmetric_branch(hopf_points):
    b = sorted(bp.location["b"] for bp in hopf_points)
    assert b == [pytest.approx(1.0040757, abs=1e-6), pytest.approx(2.1639325, abs=1e-6)]
    for bp in hopf_points:
        ev = bp.diagnostics["eigenvalues"]
        assert np.min(np.abs(ev.real)) < 1e-8


# --- periodic orbits -------------------------------------------------------

def test_small_orbits_match_hopf_frequency(hopf_points, hopf1_branch):
    omega = hopf_points[0].diagnostics["omega"]
    o = hopf1_branch.orbits[0]
    assert 2 * np.pi / o.T == pytest.approx(omega, rel=1e-2)


def _log10_monodromy_norm(o):
    from latchvdp.continuation.collocation import transfer_matrices

    P = np.eye(4)
    for M in transfer_matrices(o.mesh, o.U, o.T, o.params):
        P = M @ P
    return np.log10(np.linalg.norm(P, 2))


def test_trivial_multiplier_on_hopf1_family(hopf1_branch):
    assert max(abs(o.trivial_multiplier - 1.0) for o in hopf1_branch.orbits) < 1e-3


def test_trivial_multiplier_while_monodromy_is_resolvable(single_loop_branch):
    # near the homoclinic the monodromy is numerically rank one and the
    # multiplier at +1 is not representable in double precision
    ok = [o for o in single_loop_branch.orbits if _log10_monodromy_norm(o) < 8.0]
    assert len(ok) > len(single_loop_branch.orbits) // 2
    assert max(abs(o.trivial_multiplier - 1.0) for o in ok) < 1e-3


def test_orbits_solve_the_collocation_system(single_loop_branch):
    for o in single_loop_branch.orbits[:: max(1, len(single_loop_branch.orbits) // 10)]:
        assert o.residual_norm() < 1e-8


def test_hopf1_family_torus_then_homoclinic(hopf1_branch):
    assert _kinds(hopf1_branch, TORUS)[0] == pytest.approx(1.0042, abs=1e-3)
    hom = [bp for bp in hopf1_branch.detected if bp.kind == HOMOCLINIC]
    assert len(hom) == 1
    assert hom[0].location["b"] == pytest.approx(1.1377, abs=1e-3)


def test_single_loop_family_folds_then_ends_homoclinic(single_loop_branch):
    snpo = _kinds(single_loop_branch, SNPO)
    hom = [bp for bp in single_loop_branch.detected if bp.kind == HOMOCLINIC]
    assert len(hom) == 1
    h = hom[0]
    assert h.diagnostics["log_fit_r2"] > 0.99
    assert h.diagnostics["period"] > 1000
    print(f"single-loop SNPO at b = {snpo}, homoclinic at b = {h.location['b']:.6f}")
    assert h.location["b"] == pytest.approx(2.0390, abs=1e-3)
    assert any(abs(s - 2.0521) < 1e-3 for s in snpo)


def test_single_loop_orbit_mirror_is_also_an_orbit(single_loop_orbit):
    m = single_loop_orbit.mirrored()
    assert m.residual_norm() < 1e-8
    assert orbit_distance(single_loop_orbit, m) > 1.0


def test_double_loop_orbit_is_swap_symmetric(double_loop_orbit):
    assert orbit_distance(double_loop_orbit, double_loop_orbit.mirrored()) < 1e-6
    assert double_loop_orbit.T == pytest.approx(349.86, rel=1e-3)
    assert double_loop_orbit.stable


# --- two-parameter curves --------------------------------------------------

def test_pitchfork_curve_is_b_equals_one(e0_and_asym):
    e0, _ = e0_and_asym
    bp = [p for p in e0.detected if p.kind == PITCHFORK][0]
    curve = pitchfork_curve(bp, TABLE1)
    assert np.max(np.abs(curve.points[:, 1] - 1.0)) < 1e-8
    assert curve.points[:, 0].min() < -1.6


def test_hopf_curves_pass_through_table1_points(hopf_points):
    for bp in hopf_points:
        curve = hopf_curve(bp, TABLE1)
        c = curve.crossings("a", -1.1)
        assert np.min(np.abs(c - bp.location["b"])) < 1e-6


def test_fixed_period_curve_passes_homoclinic(homoclinic_curve, single_loop_branch):
    hom = [bp for bp in single_loop_branch.detected if bp.kind == HOMOCLINIC][0]
    c = homoclinic_curve.crossings("a", -1.1)
    assert np.min(np.abs(c - hom.location["b"])) < 1e-3


# --- unstable manifold -----------------------------------------------------

def test_manifold_halves_are_mirror_single_loops():
    mb = unstable_manifold(TABLE1.with_(b=2.05))
    o0, o1 = mb.limit_orbit(0), mb.limit_orbit(1)
    assert orbit_distance(o0, o1) > 1.0
    assert orbit_distance(o0, o1.mirrored()) < 1e-6
    assert mb.tail_distance(0, o0) < 1e-4


def test_manifold_requires_a_saddle():
    with pytest.raises(NotASaddle):
        unstable_manifold(TABLE1.with_(b=0.3))
