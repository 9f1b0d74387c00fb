"""Assembled analyses: the one-parameter diagram in ``b`` and the overlay curves
of the ``(a, b)`` plane.

These functions chain the lower-level continuation routines in the order a
user would run them by hand and collect every branch and special point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..classify import DEFAULT_PERTURBATION, DOUBLE, SINGLE, classify_trajectory
from ..errors import NumericsError
from ..integrate import SolverOptions, detect_period, integrate
from ..model import SystemParams, symmetric_equilibrium
from .core import PALCOptions
from .curves import (DEFAULT_BOX, ParameterCurve, continue_fixed_period_orbit, hopf_curve,
                     pitchfork_curve, snpo_curve)
from .equilibria import asymmetric_branches
from .orbits import (OrbitOptions, PeriodicOrbit, continue_periodic_orbits, orbit_from_hopf,
                     orbit_from_trajectory)
from .types import HOPF, PITCHFORK, SNPO


@dataclass
class Diagram:
    """Branches of a one-parameter run keyed by label, plus every detected point."""

    free: str
    params: SystemParams
    equilibria: dict = field(default_factory=dict)
    orbits: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def detected(self) -> list:
        out = []
        for br in list(self.equilibria.values()) + list(self.orbits.values()):
            out.extend(br.detected)
        return out

    def of_kind(self, kind: str) -> list:
        return [bp for bp in self.detected if bp.kind == kind]


def simulated_orbit(p: SystemParams, want: str, perturbation=DEFAULT_PERTURBATION,
                    t_end: float = 1e4, N: int = 120) -> PeriodicOrbit | None:
    """Periodic orbit reached by simulation from the perturbed E0, if its class is ``want``."""
    opts = SolverOptions(t_end=t_end)
    s0 = symmetric_equilibrium(p) + np.asarray(perturbation, dtype=float)
    try:
        traj = integrate(s0, p, opts)
        if classify_trajectory(traj, min_duration=t_end).tag != want:
            return None
        traj = integrate(traj.final_state, p, opts)
        T = detect_period(traj, "x1") or detect_period(traj, "x2")
        if T is None:
            return None
        return orbit_from_trajectory(traj, T, N)
    except NumericsError:
        return None


def bifurcation_diagram(p: SystemParams, b_range=(0.0, 3.0), opts: OrbitOptions | None = None,
                        double_loop_seeds=(0.3, 0.6, 1.0, 1.5), hopf_amplitude: float = 1e-2,
                        perturbation=DEFAULT_PERTURBATION, eq_opts: PALCOptions | None = None) -> Diagram:
    """Equilibria and periodic orbits of the identical pair as ``b`` varies.

    * the symmetric equilibrium and the asymmetric pair born at its Pitchfork;
    * the orbit family from every Hopf point of one asymmetric branch (the
      other branch is its mirror image);
    * the double-loop family, seeded by simulation at the first value in
      ``double_loop_seeds`` where a double-loop oscillation is found, and
      continued in both directions.

    A family that cannot be started or stops early is kept with its stop
    reason; missing families are listed in ``notes``.
    """
    opts = opts or OrbitOptions()
    lo, hi = b_range
    dg = Diagram("b", p)
    e0, asym = asymmetric_branches(p.with_(b=lo), "b", b_range, eq_opts)
    dg.equilibria["E0"] = e0
    for br in asym:
        dg.equilibria[br.label] = br
    if asym:
        hopfs = [bp for bp in asym[0].detected if bp.kind == HOPF]
        for i, h in enumerate(hopfs, start=1):
            label = f"hopf{i}"
            try:
                _, sysm, z, t = orbit_from_hopf(h, p, "b", amplitude=hopf_amplitude)
                dg.orbits[label] = continue_periodic_orbits((sysm, z, t), "b", b_range, opts, label=label)
            except NumericsError as exc:
                dg.notes.append(f"{label}: could not start ({exc})")
    for b0 in double_loop_seeds:
        if not lo <= b0 <= hi:
            continue
        seed = simulated_orbit(p.with_(b=b0), DOUBLE, perturbation)
        if seed is None:
            continue
        for d, label in ((1.0, "double_up"), (-1.0, "double_down")):
            try:
                dg.orbits[label] = continue_periodic_orbits(seed, "b", b_range, opts, direction=d, label=label)
            except NumericsError as exc:
                dg.notes.append(f"{label}: {exc}")
        break
    else:
        dg.notes.append("no double-loop oscillation found at the seed values")
    return dg


def overlay_curves(p: SystemParams, kinds=("pitchfork", "hopf", "snpo", "homoclinic"),
                   box=None, homoclinic_period: float = 3000.0, homoclinic_seed_b: float = 2.05,
                   snpo_seed_b: float = 0.3, perturbation=DEFAULT_PERTURBATION) -> dict:
    """Two-parameter curves through the special points found at ``p.a``.

    Returns ``{name: ParameterCurve}``; names are ``pitchfork``, ``hopf1``,
    ``hopf2``, ..., ``snpo`` and ``homoclinic``.  A curve that cannot be
    started is omitted and reported under the key ``"_notes"``.
    """
    box = box or DEFAULT_BOX
    out: dict = {}
    notes = []
    if "pitchfork" in kinds or "hopf" in kinds:
        e0, asym = asymmetric_branches(p.with_(b=0.0), "b", (0.0, 3.0))
        if "pitchfork" in kinds:
            pfs = [bp for bp in e0.detected
                   if bp.kind == PITCHFORK and bp.diagnostics["null_symmetry"] == "antisymmetric"]
            if pfs:
                out["pitchfork"] = pitchfork_curve(pfs[0], p, box=box)
            else:
                notes.append("pitchfork: none on the symmetric branch")
        if "hopf" in kinds:
            hopfs = [bp for bp in asym[0].detected if bp.kind == HOPF] if asym else []
            for i, h in enumerate(hopfs, start=1):
                out[f"hopf{i}"] = hopf_curve(h, p, box=box)
            if not hopfs:
                notes.append("hopf: none on the asymmetric branch")
    if "snpo" in kinds:
        seed = simulated_orbit(p.with_(b=snpo_seed_b), DOUBLE, perturbation)
        if seed is None:
            notes.append("snpo: no double-loop seed")
        else:
            br = continue_periodic_orbits(seed, "b", (box["b"][0], snpo_seed_b + 0.05),
                                          direction=-1.0, label="snpo-seed")
            sn = [bp for bp in br.detected if bp.kind == SNPO]
            if sn:
                out["snpo"] = snpo_curve(sn[0], box=box)
            else:
                notes.append(f"snpo: no fold on the double-loop family ({br.stop_reason})")
    if "homoclinic" in kinds:
        seed = simulated_orbit(p.with_(b=homoclinic_seed_b), SINGLE, perturbation)
        if seed is None:
            notes.append("homoclinic: no single-loop seed")
        else:
            out["homoclinic"] = continue_fixed_period_orbit(seed, homoclinic_period, box=box)
    if notes:
        out["_notes"] = notes
    return out


__all__ = ["Diagram", "bifurcation_diagram", "overlay_curves", "simulated_orbit", "ParameterCurve"]
