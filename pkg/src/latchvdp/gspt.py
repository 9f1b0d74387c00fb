"""Fast-slow structure of the coupled system in the singular limit eps -> 0.

The critical manifold is the product of the two cubic graphs, the fold set is
the four lines ``x_i = +/-1``, and folded singularities are the zeros of the
desingularised reduced flow that lie on a fold line without being true
equilibria.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemParams

FOLD_LINES = {"L1-": (0, -1.0), "L1+": (0, 1.0), "L2-": (1, -1.0), "L2+": (1, 1.0)}

FOLDED_SADDLE, FOLDED_NODE, FOLDED_FOCUS = "FoldedSaddle", "FoldedNode", "FoldedFocus"

__all__ = [
    "FoldLine",
    "FoldedSingularity",
    "fold_lines",
    "critical_manifold_lift",
    "fast_rhs",
    "layer_jacobian",
    "slow_rhs",
    "reduced_rhs",
    "desingularized_rhs",
    "desingularized_jacobian",
    "find_folded_singularities",
    "scan_folded_nodes",
]


@dataclass(frozen=True)
class FoldLine:
    which: str
    coordinate: int  # 0 for x1, 1 for x2
    value: float

    def contains(self, x1, x2) -> bool:
        return (x1, x2)[self.coordinate] == self.value


def fold_lines() -> list[FoldLine]:
    return [FoldLine(k, c, v) for k, (c, v) in FOLD_LINES.items()]


@dataclass(frozen=True)
class FoldedSingularity:
    x1: float
    x2: float
    fold_lines: tuple
    eigenvalues: tuple
    kind: str
    stability: str

    @property
    def location(self):
        return (self.x1, self.x2)

    def csv_row(self):
        e1, e2 = self.eigenvalues
        return (self.x1, self.x2, "/".join(self.fold_lines), self.kind, self.stability,
                e1.real, e1.imag, e2.real, e2.imag)


CSV_HEADER = ["x1", "x2", "fold_line", "kind", "stability", "re_ev1", "im_ev1", "re_ev2", "im_ev2"]


def critical_manifold_lift(x1, x2) -> np.ndarray:
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    y1 = (-1.0 + x1 * x1 / 3.0) * x1
    y2 = (-1.0 + x2 * x2 / 3.0) * x2
    return np.stack([x1, y1, x2, y2], axis=-1)


def fast_rhs(s) -> np.ndarray:
    """Layer problem (x1', x2') with y frozen."""
    s = np.asarray(s, dtype=float)
    x1, y1, x2, y2 = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    return np.stack([y1 + (1.0 - x1 * x1 / 3.0) * x1, y2 + (1.0 - x2 * x2 / 3.0) * x2], axis=-1)


def layer_jacobian(x1, x2) -> np.ndarray:
    return np.array([[1.0 - x1 * x1, 0.0], [0.0, 1.0 - x2 * x2]])


def slow_rhs(x1, x2, p: SystemParams):
    g1 = p.a1 - x1 + p.b1 * np.tanh(p.k2 * (p.a2 - x2))
    g2 = p.a2 - x2 + p.b2 * np.tanh(p.k1 * (p.a1 - x1))
    return g1, g2


def reduced_rhs(x1, x2, p: SystemParams):
    """Projected reduced flow on the critical manifold; singular on the folds."""
    g1, g2 = slow_rhs(x1, x2, p)
    return g1 / (x1 * x1 - 1.0), g2 / (x2 * x2 - 1.0)


def desingularized_rhs(x1, x2, p: SystemParams):
    g1, g2 = slow_rhs(x1, x2, p)
    return (x2 * x2 - 1.0) * g1, (x1 * x1 - 1.0) * g2


def _sech2(z):
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / ((1.0 + e) * (1.0 + e))


def desingularized_jacobian(x1, x2, p: SystemParams) -> np.ndarray:
    g1, g2 = slow_rhs(x1, x2, p)
    dg1_dx2 = -p.b1 * p.k2 * _sech2(p.k2 * (p.a2 - x2))
    dg2_dx1 = -p.b2 * p.k1 * _sech2(p.k1 * (p.a1 - x1))
    return np.array([
        [-(x2 * x2 - 1.0), 2.0 * x2 * g1 + (x2 * x2 - 1.0) * dg1_dx2],
        [2.0 * x1 * g2 + (x1 * x1 - 1.0) * dg2_dx1, -(x1 * x1 - 1.0)],
    ])


def _classify(ev, tol=1e-12):
    e1, e2 = ev
    if abs(e1.imag) > tol or abs(e2.imag) > tol:
        kind = FOLDED_FOCUS
    elif e1.real * e2.real < 0:
        kind = FOLDED_SADDLE
    else:
        kind = FOLDED_NODE
    if kind == FOLDED_SADDLE:
        stability = "saddle"
    else:
        re = max(e1.real, e2.real) if kind == FOLDED_NODE else e1.real
        lo = min(e1.real, e2.real)
        if re < -tol:
            stability = "stable"
        elif lo > tol:
            stability = "unstable"
        else:
            stability = "neutral"
    return kind, stability


def _candidates(p: SystemParams):
    """(x1, x2, lines) on fold lines where the desingularised field vanishes."""
    out = []
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            out.append((s1, s2, (_name(0, s1), _name(1, s2))))
    # L1+/-: g1(x1, x2) = 0 solved for x2 in closed form
    for s in (-1.0, 1.0):
        arg = (s - p.a1) / p.b1 if p.b1 != 0 else np.inf
        if -1.0 < arg < 1.0:
            x2 = p.a2 - np.arctanh(arg) / p.k2
            if abs(abs(x2) - 1.0) > 1e-12:
                out.append((s, float(x2), (_name(0, s),)))
        arg = (s - p.a2) / p.b2 if p.b2 != 0 else np.inf
        if -1.0 < arg < 1.0:
            x1 = p.a1 - np.arctanh(arg) / p.k1
            if abs(abs(x1) - 1.0) > 1e-12:
                out.append((float(x1), s, (_name(1, s),)))
    return out


def _name(coord, sign):
    return f"L{coord + 1}{'-' if sign < 0 else '+'}"


def find_folded_singularities(p: SystemParams, equilibrium_tol: float = 1e-8) -> list[FoldedSingularity]:
    """All folded singularities for the given parameters.

    Fold-line intersections are enumerated; the remaining candidates come from
    inverting the tanh in ``g_i = 0`` along each fold line.  Candidates that
    are true equilibria (``g1 = g2 = 0`` to ``equilibrium_tol``) are dropped.
    """
    result = []
    for x1, x2, lines in _candidates(p):
        g1, g2 = slow_rhs(x1, x2, p)
        if abs(g1) < equilibrium_tol and abs(g2) < equilibrium_tol:
            continue
        J = desingularized_jacobian(x1, x2, p)
        ev = np.linalg.eigvals(J).astype(complex)
        ev = tuple(sorted(ev, key=lambda z: (z.real, z.imag)))
        kind, stability = _classify(ev)
        result.append(FoldedSingularity(float(x1), float(x2), lines, ev, kind, stability))
    return result


def scan_folded_nodes(a_values, b_values, base: SystemParams) -> list[tuple]:
    """Parameter pairs in the grid at which a folded node exists.

    Returns a list of ``(a, b, FoldedSingularity)``; empty when none is found.
    """
    hits = []
    for a in a_values:
        for b in b_values:
            p = base.with_(a=float(a), b=float(b))
            for fs in find_folded_singularities(p):
                if fs.kind == FOLDED_NODE:
                    hits.append((float(a), float(b), fs))
    return hits
