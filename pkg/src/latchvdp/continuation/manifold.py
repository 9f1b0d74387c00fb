"""The one-dimensional unstable manifold of the symmetric equilibrium."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NotASaddle
from ..integrate import SolverOptions, Trajectory, detect_period, integrate
from ..model import SystemParams, jacobian_full, symmetric_equilibrium
from .orbits import PeriodicOrbit, orbit_from_trajectory

DEFAULT_OFFSET = 1e-6


@dataclass(frozen=True)
class ManifoldBranch:
    """Both halves of the unstable manifold of E0.

    ``branches[0]`` starts at ``E0 + offset * v`` and ``branches[1]`` at
    ``E0 - offset * v``, with ``v`` the unit unstable eigenvector.
    """

    params: SystemParams
    offset: float
    equilibrium: np.ndarray
    eigenvalue: float
    eigenvector: np.ndarray
    branches: tuple
    options: SolverOptions

    def limit_orbit(self, i: int, N: int = 120) -> PeriodicOrbit:
        """Periodic orbit that branch ``i`` settles on, converged by collocation."""
        traj: Trajectory = self.branches[i]
        T = detect_period(traj, "x1") or detect_period(traj, "x2")
        if T is None:
            raise NotASaddle("manifold branch did not settle on an oscillation")
        return orbit_from_trajectory(traj, T, N)

    def tail_distance(self, i: int, orbit: PeriodicOrbit, window: float | None = None) -> float:
        """Largest distance from the last ``window`` time units of branch ``i`` to ``orbit``.

        ``window`` defaults to one period of ``orbit``.
        """
        traj = self.branches[i]
        w = orbit.T if window is None else float(window)
        tail = traj.states[traj.times >= traj.times[-1] - w]
        return float(np.max(orbit.distance_to(tail)))


def unstable_manifold(p: SystemParams, offset: float = DEFAULT_OFFSET,
                      opts: SolverOptions | None = None) -> ManifoldBranch:
    """Integrate both halves of the unstable manifold of the symmetric equilibrium.

    Raises
    ------
    NotASaddle
        E0 does not have exactly one eigenvalue with positive real part, or
        that eigenvalue is not real.
    """
    opts = opts or SolverOptions(t_end=2e4, events=("max_x1", "max_x2"))
    e0 = symmetric_equilibrium(p)
    ev, vec = np.linalg.eig(jacobian_full(e0, p))
    unstable = np.flatnonzero(ev.real > 0)
    if unstable.size != 1 or abs(ev[unstable[0]].imag) > 0:
        raise NotASaddle(f"E0 has unstable spectrum {ev[unstable]}")
    j = int(unstable[0])
    v = np.real(vec[:, j])
    v = v / np.linalg.norm(v)
    if v[0] < 0:  # fix the orientation so branch 0 starts with x1 increasing
        v = -v
    trajs = tuple(integrate(e0 + s * offset * v, p, opts) for s in (1.0, -1.0))
    return ManifoldBranch(p, float(offset), e0, float(ev[j].real), v, trajs, opts)
