import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latchvdp.errors import NoSolution, ParameterError
from latchvdp.model import (PARAM_NAMES, TABLE1, SystemParams, forced_oscillator_hopf_x2,
                            jacobian_full, param_derivative, single_oscillator_hopf_a,
                            single_oscillator_jacobian, swap, symmetric_equilibrium, vector_field)

coord = st.floats(-3.0, 3.0, allow_nan=False)
states = st.tuples(coord, coord, coord, coord).map(np.array)
params = st.builds(
    SystemParams.identical_pair,
    eps=st.floats(1e-3, 0.5),
    a=st.floats(-1.8, -0.5),
    b=st.floats(0.0, 3.0),
    k=st.floats(0.2, 3.0),
)


def mp_rhs(v, p):
    """Independent high-precision evaluation of the right-hand side."""
    x1, y1, x2, y2 = v
    return [
        y1 + (1 - x1 ** 2 / 3) * x1,
        p.eps1 * (p.a1 - x1 + p.b1 * mp.tanh(p.k2 * (p.a2 - x2))),
        y2 + (1 - x2 ** 2 / 3) * x2,
        p.eps2 * (p.a2 - x2 + p.b2 * mp.tanh(p.k1 * (p.a1 - x1))),
    ]


def as_mp(s):
    return [mp.mpf(float(v)) for v in s]


@settings(max_examples=60, deadline=None)
@given(states, params)
def test_field_matches_high_precision_evaluation(s, p):
    ref = np.array([float(v) for v in mp_rhs(as_mp(s), p)])
    np.testing.assert_allclose(vector_field(s, p), ref, rtol=1e-13, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(states, params)
def test_field_is_swap_equivariant(s, p):
    np.testing.assert_allclose(vector_field(swap(s), p), swap(vector_field(s, p)), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(states, params)
def test_jacobian_against_mpmath_derivative(s, p):
    J = jacobian_full(s, p)
    for j in range(4):
        def shifted(h, i, j=j):
            v = as_mp(s)
            v[j] += h
            return mp_rhs(v, p)[i]

        ref = np.array([float(mp.diff(lambda h, i=i: shifted(h, i), 0)) for i in range(4)])
        np.testing.assert_allclose(J[:, j], ref, rtol=1e-6, atol=1e-10)


@pytest.mark.parametrize("name", PARAM_NAMES + ("a", "b"))
def test_param_derivative_central_difference(name):
    s = np.array([-0.7, 0.4, 1.3, -0.2])
    p = SystemParams(0.02, 0.03, -1.2, -1.05, 0.7, 1.4, 0.9, 1.3) if name not in ("a", "b") else TABLE1
    h = 1e-6
    fd = (vector_field(s, p.with_(**{name: p.get(name) + h}))
          - vector_field(s, p.with_(**{name: p.get(name) - h}))) / (2 * h)
    np.testing.assert_allclose(param_derivative(s, p, name), fd, rtol=1e-6, atol=1e-9)


def test_symmetric_equilibrium_value():
    e0 = symmetric_equilibrium(TABLE1)
    assert round(e0[1], 4) == 0.6563
    assert np.max(np.abs(vector_field(e0, TABLE1))) < 1e-15


@pytest.mark.parametrize("b", [0.0, 0.5, 2.0, 3.0])
def test_symmetric_equilibrium_is_b_independent(b):
    p = TABLE1.with_(b=b)
    np.testing.assert_array_equal(symmetric_equilibrium(p), symmetric_equilibrium(TABLE1))
    assert np.max(np.abs(vector_field(symmetric_equilibrium(p), p))) < 1e-15


def test_single_oscillator_hopf_is_trace_zero():
    a = single_oscillator_hopf_a()
    assert a == -1.0
    J = single_oscillator_jacobian(a, 0.01)
    assert np.trace(J) == 0.0 and np.linalg.det(J) > 0


def test_forced_hopf_against_root_finder():
    x2 = forced_oscillator_hopf_x2(TABLE1)
    # x1 = -1 must be an equilibrium of oscillator 1 with x2 frozen
    root = mp.findroot(lambda v: TABLE1.a1 + 1 + TABLE1.b1 * mp.tanh(TABLE1.k2 * (TABLE1.a2 - v)), -1.4)
    assert abs(x2 - float(root)) < 1e-12
    assert abs(x2 - (-1.447)) < 1e-3


def test_forced_hopf_needs_strong_enough_coupling():
    with pytest.raises(NoSolution):
        forced_oscillator_hopf_x2(TABLE1.with_(b=0.05))
    with pytest.raises(NoSolution):
        forced_oscillator_hopf_x2(TABLE1.with_(b=0.0))


def test_parameter_validation():
    with pytest.raises(ParameterError):
        SystemParams(eps1=-1.0)
    with pytest.raises(ParameterError):
        TABLE1.with_(c=1.0)
    with pytest.raises(ParameterError):
        SystemParams(a1=float("nan"))
    with pytest.raises(ParameterError):
        SystemParams(a1=-1.0, a2=-1.2).get("a")
    with pytest.raises(ParameterError):
        symmetric_equilibrium(SystemParams(a1=-1.0, a2=-1.2))


def test_aliases_set_both_copies():
    p = TABLE1.with_(a=-1.3, b=2.0)
    assert (p.a1, p.a2, p.b1, p.b2) == (-1.3, -1.3, 2.0, 2.0)
    assert p.identical
