import numpy as np
import pytest
from scipy.integrate import solve_ivp

from latchvdp.errors import ParameterError, TooShort
from latchvdp.integrate import BACKEND, SolverOptions, detect_period, integrate
from latchvdp.model import TABLE1, swap, symmetric_equilibrium, vector_field

S0 = symmetric_equilibrium(TABLE1) + np.array([0.0, 0.0, 1.5, 0.0])


def test_matches_independent_high_order_solver():
    opts = SolverOptions(t_end=200.0, rel_tol=1e-10, abs_tol=1e-12)
    traj = integrate(S0, TABLE1, opts)
    ref = solve_ivp(lambda t, y: vector_field(y, TABLE1), (0, 200.0), S0, method="DOP853",
                    rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(traj.final_state, ref.y[:, -1], atol=1e-6)


@pytest.mark.skipif(BACKEND != "compiled", reason="compiled kernel not built")
def test_backends_agree_bitwise():
    opts = SolverOptions(t_end=500.0)
    a = integrate(S0, TABLE1, opts, backend="compiled")
    b = integrate(S0, TABLE1, opts, backend="python")
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.event_times, b.event_times)


def test_trajectory_equivariance():
    opts = SolverOptions(t_end=300.0)
    a = integrate(S0, TABLE1, opts)
    b = integrate(swap(S0), TABLE1, opts)
    # the error norm sums components in a different order, so step sizes
    # differ in the last bits
    assert a.times.size == b.times.size
    np.testing.assert_allclose(a.times, b.times, rtol=1e-8)
    np.testing.assert_allclose(swap(a.states), b.states, atol=1e-6)


def test_maximum_events_sit_on_zero_derivative():
    traj = integrate(S0, TABLE1, SolverOptions(t_end=2000.0, events=("max_x1",)))
    times = traj.event_times_of("max_x1")
    states = traj.event_states_of("max_x1")
    assert times.size > 3
    dx1 = vector_field(states, TABLE1)[:, 0]
    assert np.max(np.abs(dx1)) < 1e-7


def test_period_detection_on_double_loop():
    traj = integrate(S0, TABLE1, SolverOptions(t_end=1e4))
    T = detect_period(traj, "x1")
    assert T == pytest.approx(349.86, rel=1e-3)


def test_period_detection_on_steady_state_returns_none():
    traj = integrate(symmetric_equilibrium(TABLE1), TABLE1, SolverOptions(t_end=1e3))
    assert detect_period(traj, "x1") is None


def test_period_detection_needs_enough_maxima():
    traj = integrate(S0, TABLE1, SolverOptions(t_end=600.0))
    with pytest.raises(TooShort):
        detect_period(traj, "x1")


def test_implicit_route_agrees_with_explicit():
    opts = SolverOptions(t_end=100.0, rel_tol=1e-10, abs_tol=1e-12)
    a = integrate(S0, TABLE1, opts)
    b = integrate(S0, TABLE1, opts.with_(method="implicit"))
    np.testing.assert_allclose(a.final_state, b.final_state, atol=1e-5)


def test_bad_options_rejected():
    with pytest.raises(ParameterError):
        SolverOptions(rel_tol=0.0)
    with pytest.raises(ParameterError):
        SolverOptions(events=("nope",))
    with pytest.raises(ParameterError):
        integrate([np.nan, 0, 0, 0], TABLE1)
