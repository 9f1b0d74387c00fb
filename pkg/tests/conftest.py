"""Shared fixtures.

Continuation results are expensive, so branches are computed once per
session and reused by the unit, property and acceptance tests.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from latchvdp.classify import DEFAULT_PERTURBATION
from latchvdp.model import TABLE1, symmetric_equilibrium

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}
# fixture name -> wall time of its first computation in seconds
TIMINGS: dict = {}


def timed(name, fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    TIMINGS[name] = time.perf_counter() - t0
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def table1():
    return TABLE1


@pytest.fixture(scope="session")
def e0_and_asym():
    from latchvdp.continuation import asymmetric_branches

    return timed("e0_and_asym", asymmetric_branches, TABLE1.with_(b=0.0), "b", (0.0, 3.0))


@pytest.fixture(scope="session")
def hopf_points(e0_and_asym):
    _, asym = e0_and_asym
    return [bp for bp in asym[0].detected if bp.kind == "Hopf"]


@pytest.fixture(scope="session")
def hopf1_branch(hopf_points):
    """Orbit family born at the lower Hopf point, run to the period threshold."""
    from latchvdp.continuation import continue_periodic_orbits, orbit_from_hopf

    def run():
        _, sysm, z, t = orbit_from_hopf(hopf_points[0], TABLE1, "b", amplitude=1e-3)
        return continue_periodic_orbits((sysm, z, t), "b", (0.9, 3.0), label="hopf1")

    return timed("hopf1_branch", run)


@pytest.fixture(scope="session")
def single_loop_orbit():
    """Stable single-loop orbit at b = 2.05 reached by simulation."""
    from latchvdp.continuation import simulate_orbit

    p = TABLE1.with_(b=2.05)
    return timed("single_loop_orbit", simulate_orbit, symmetric_equilibrium(p) + np.asarray(DEFAULT_PERTURBATION), p)


@pytest.fixture(scope="session")
def single_loop_branch(single_loop_orbit):
    """Single-loop family from b = 2.05 towards the homoclinic of E0."""
    from latchvdp.continuation import continue_periodic_orbits

    return timed("single_loop_branch", continue_periodic_orbits, single_loop_orbit, "b", (0.9, 3.0),
                 direction=-1.0, label="single")


@pytest.fixture(scope="session")
def double_loop_orbit():
    from latchvdp.continuation import simulate_orbit

    return timed("double_loop_orbit", simulate_orbit,
                 symmetric_equilibrium(TABLE1) + np.asarray(DEFAULT_PERTURBATION), TABLE1)


@pytest.fixture(scope="session")
def fixed_period_seed(single_loop_orbit):
    from latchvdp.continuation import orbit_with_period

    return timed("fixed_period_seed", orbit_with_period, single_loop_orbit, 3000.0)


@pytest.fixture(scope="session")
def homoclinic_curve(fixed_period_seed):
    from latchvdp.continuation import continue_fixed_period_orbit

    return timed("homoclinic_curve", continue_fixed_period_orbit, fixed_period_seed)
