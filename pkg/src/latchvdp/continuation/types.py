"""Records shared by equilibrium and periodic-orbit continuation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FOLD, PITCHFORK, HOPF = "Fold", "Pitchfork", "Hopf"
SNPO, TORUS, HOMOCLINIC, PERIOD_DOUBLING = "SNPO", "Torus", "HomoclinicApprox", "PeriodDoubling"
KINDS = (FOLD, PITCHFORK, HOPF, SNPO, TORUS, HOMOCLINIC, PERIOD_DOUBLING)


@dataclass(frozen=True)
class BifurcationPoint:
    """A localized special point on a branch.

    ``location`` maps parameter names to values; ``state`` is the equilibrium
    or, for orbit bifurcations, the orbit's value at phase zero.  ``orbit``
    holds the full :class:`~latchvdp.continuation.orbits.PeriodicOrbit` when
    relevant.
    """

    kind: str
    location: dict
    state: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    orbit: object = None
    branch: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown bifurcation kind {self.kind!r}")

    def param(self, name: str) -> float:
        return self.location[name]

    def to_record(self) -> dict:
        diag = {}
        for k, v in self.diagnostics.items():
            if isinstance(v, np.ndarray) and np.iscomplexobj(v):
                v = [[float(z.real), float(z.imag)] for z in v.ravel()]
            elif isinstance(v, complex):
                v = [v.real, v.imag]
            diag[k] = v
        return {
            "kind": self.kind,
            "branch": self.branch,
            "location": dict(self.location),
            "state": [float(x) for x in self.state],
            "diagnostics": diag,
        }


def eig_columns(ev) -> list:
    """Flatten complex values into (re, im) pairs for CSV output."""
    out = []
    for z in ev:
        out.extend([float(np.real(z)), float(np.imag(z))])
    return out
