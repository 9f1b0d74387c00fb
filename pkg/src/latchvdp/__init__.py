"""Coupled van der Pol latching model: simulation, attractor classification,
numerical continuation and folded-singularity analysis."""
from .integrate import BACKEND, SolverOptions, Trajectory, detect_period, integrate
from .model import TABLE1, SystemParams, jacobian_full, swap, symmetric_equilibrium, vector_field

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "SolverOptions",
    "SystemParams",
    "TABLE1",
    "Trajectory",
    "detect_period",
    "integrate",
    "jacobian_full",
    "swap",
    "symmetric_equilibrium",
    "vector_field",
    "__version__",
]
