import numpy as np
import pytest

from latchvdp.classify import (DOUBLE, SINGLE, STEADY, ClassificationMap, default_threads,
                               simulate_cell, sweep)
from latchvdp.errors import ParameterError, TooShort
from latchvdp.integrate import SolverOptions, integrate
from latchvdp.classify import classify_trajectory
from latchvdp.model import TABLE1, symmetric_equilibrium


@pytest.mark.parametrize("b,tag", [(0.0, STEADY), (0.3, DOUBLE), (1.5, DOUBLE), (2.05, SINGLE), (3.0, STEADY)])
def test_row_a_minus_1_1(b, tag):
    assert simulate_cell(-1.1, b).tag == tag


def test_single_loop_reports_the_active_oscillator():
    c = simulate_cell(-1.1, 2.05)
    assert c.detail in ("x1", "x2")
    assert max(c.amp_x1, c.amp_x2) > 2.0 > min(c.amp_x1, c.amp_x2)


def test_double_loop_alternates_in_antiphase():
    c = simulate_cell(-1.1, 0.3)
    assert c.tag == DOUBLE
    assert c.phase == pytest.approx(0.5, abs=0.05)


def test_unperturbed_start_stays_at_e0():
    c = simulate_cell(-1.1, 0.3, perturbation=(0, 0, 0, 0))
    assert c.tag == STEADY


def test_short_runs_are_rejected():
    traj = integrate(symmetric_equilibrium(TABLE1), TABLE1, SolverOptions(t_end=100.0))
    with pytest.raises(TooShort):
        classify_trajectory(traj, min_duration=1e4)


def test_sweep_is_thread_count_independent():
    kw = dict(a_range=(-1.3, -1.1), b_range=(0.0, 2.5), shape=(2, 3), opts=SolverOptions(t_end=5e3))
    m1 = sweep(threads=1, **kw)
    m2 = sweep(threads=3, **kw)
    assert [c.tag for c in m1.cells] == [c.tag for c in m2.cells]
    assert [c.amp_x1 for c in m1.cells] == [c.amp_x1 for c in m2.cells]


def test_map_csv_round_trip(tmp_path):
    from latchvdp.io import read_csv

    m = sweep(a_range=(-1.2, -1.1), b_range=(0.3, 2.05), shape=(2, 2), opts=SolverOptions(t_end=5e3), threads=1)
    m.to_csv(tmp_path / "m.csv", ["hash x"])
    header, rows = read_csv(tmp_path / "m.csv")
    assert header[:3] == ["a", "b", "tag"]
    assert len(rows) == 4
    assert sum(m.counts()[t] for t in (STEADY, SINGLE, DOUBLE, "Other")) == 4


def test_map_rejects_incomplete_grid():
    with pytest.raises(ParameterError):
        ClassificationMap(np.array([0.0, 1.0]), np.array([0.0]), [])


def test_thread_env_override(monkeypatch):
    monkeypatch.setenv("LATCHVDP_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("LATCHVDP_THREADS", "many")
    with pytest.raises(ParameterError):
        default_threads()
