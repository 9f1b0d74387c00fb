"""Pseudo-arclength continuation of equilibria, periodic orbits and
two-parameter bifurcation curves."""
from .core import PALCOptions
from .curves import (ParameterCurve, continue_fixed_period_orbit, hopf_curve, orbit_with_period,
                     pitchfork_curve, snpo_curve, two_parameter_curves)
from .diagram import Diagram, bifurcation_diagram, overlay_curves, simulated_orbit
from .equilibria import (EquilibriumBranch, EquilibriumPoint, asymmetric_branches, continue_equilibria,
                         detect_equilibrium_bifurcations, switch_branch)
from .manifold import ManifoldBranch, unstable_manifold
from .orbits import (OrbitBranch, OrbitOptions, PeriodicOrbit, continue_periodic_orbits, orbit_distance,
                     orbit_from_hopf, orbit_from_trajectory, simulate_orbit, solve_orbit)
from .types import (FOLD, HOMOCLINIC, HOPF, KINDS, PERIOD_DOUBLING, PITCHFORK, SNPO, TORUS,
                    BifurcationPoint)

__all__ = [
    "PALCOptions", "ParameterCurve", "continue_fixed_period_orbit", "hopf_curve", "orbit_with_period",
    "pitchfork_curve", "snpo_curve", "two_parameter_curves", "Diagram", "bifurcation_diagram",
    "overlay_curves", "simulated_orbit", "EquilibriumBranch", "EquilibriumPoint", "asymmetric_branches",
    "continue_equilibria", "detect_equilibrium_bifurcations", "switch_branch", "ManifoldBranch",
    "unstable_manifold", "OrbitBranch", "OrbitOptions", "PeriodicOrbit", "continue_periodic_orbits",
    "orbit_distance", "orbit_from_hopf", "orbit_from_trajectory", "simulate_orbit", "solve_orbit",
    "FOLD", "HOMOCLINIC", "HOPF", "KINDS", "PERIOD_DOUBLING", "PITCHFORK", "SNPO", "TORUS",
    "BifurcationPoint",
]
