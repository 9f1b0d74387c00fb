"""Equilibrium branches: tracing, bifurcation detection and branch switching."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NewtonDivergence, ParameterError, StepUnderflow
from ..model import SystemParams, jacobian_full, param_derivative, swap, vector_field
from . import core
from .core import PALCOptions
from .types import FOLD, HOPF, PITCHFORK, BifurcationPoint, eig_columns

IMAG_TOL = 1e-9
LOC_TOL = 1e-8


class EquilibriumProblem:
    """``f(x; p(lam)) = 0`` with ``z = (x1, y1, x2, y2, lam)``."""

    param_index = 4

    def __init__(self, p: SystemParams, free: str):
        p.get(free)  # validates the name
        self.base = p
        self.free = free

    def params(self, lam: float) -> SystemParams:
        return self.base.with_(**{self.free: float(lam)})

    def residual(self, z):
        return vector_field(z[:4], self.params(z[4]))

    def jacobian(self, z):
        p = self.params(z[4])
        return np.column_stack([jacobian_full(z[:4], p), param_derivative(z[:4], p, self.free)])

    def weights(self, z):
        return np.ones(5)


@dataclass(frozen=True)
class EquilibriumPoint:
    param: float
    state: np.ndarray
    eigenvalues: np.ndarray
    stable: bool

    @property
    def n_unstable(self) -> int:
        return int(np.sum(self.eigenvalues.real > 0))


@dataclass
class EquilibriumBranch:
    """Sampled equilibrium branch in one free parameter."""

    free: str
    base: SystemParams
    points: list
    detected: list = field(default_factory=list)
    label: str = ""
    _z: list = field(default_factory=list, repr=False)
    _t: list = field(default_factory=list, repr=False)

    @property
    def params(self) -> np.ndarray:
        return np.array([pt.param for pt in self.points])

    @property
    def states(self) -> np.ndarray:
        return np.array([pt.state for pt in self.points])

    def problem(self) -> EquilibriumProblem:
        return EquilibriumProblem(self.base, self.free)

    def mirrored(self) -> "EquilibriumBranch":
        """Image of the branch under the oscillator exchange (identical pairs only)."""
        self.base.require_identical("mirrored branch")
        pts = [EquilibriumPoint(pt.param, swap(pt.state), pt.eigenvalues, pt.stable) for pt in self.points]
        z = [np.append(swap(v[:4]), v[4]) for v in self._z]
        t = [np.append(swap(v[:4]), v[4]) for v in self._t]
        return EquilibriumBranch(self.free, self.base, pts, [], self.label + "_mirror", z, t)

    def csv_header(self):
        cols = [self.free, "measure_max_x1", "period", "stable", "x1", "y1", "x2", "y2"]
        for i in range(4):
            cols += [f"re_ev{i + 1}", f"im_ev{i + 1}"]
        return cols

    def csv_rows(self):
        for pt in self.points:
            yield [pt.param, pt.state[0], "", int(pt.stable), *pt.state, *eig_columns(pt.eigenvalues)]

    def to_csv(self, path, comments=()):
        from ..io import write_csv

        write_csv(path, self.csv_header(), self.csv_rows(), comments)


def _point(problem, z) -> EquilibriumPoint:
    J = jacobian_full(z[:4], problem.params(z[4]))
    ev = np.linalg.eigvals(J)
    ev = np.array(sorted(ev, key=lambda w: (-w.real, w.imag)))
    return EquilibriumPoint(float(z[4]), z[:4].copy(), ev, bool(np.all(ev.real < 0)))


def continue_equilibria(
    start,
    p: SystemParams,
    free: str,
    param_range,
    opts: PALCOptions | None = None,
    direction: float = 1.0,
    detect: bool = True,
    label: str = "",
    tangent0=None,
) -> EquilibriumBranch:
    """Trace equilibria of the coupled system while ``free`` varies.

    The branch starts at ``start`` (an equilibrium at ``p``) and runs until
    the parameter leaves ``param_range`` or ``opts.max_points`` is reached.
    ``direction`` picks the initial sense of the free parameter, and
    ``tangent0`` overrides the initial tangent (used by branch switching).

    Raises
    ------
    NewtonDivergence
        ``start`` is not an equilibrium.
    StepUnderflow
        The corrector keeps failing at the minimum step.
    """
    opts = opts or PALCOptions()
    lo, hi = sorted(map(float, param_range))
    if not hi > lo:
        raise ParameterError("empty parameter range")
    prob = EquilibriumProblem(p, free)
    lam0 = p.get(free)
    z = np.append(np.asarray(start, dtype=float), lam0)
    if np.max(np.abs(prob.residual(z))) > opts.newton_tol:
        z, _ = core.newton(lambda v: prob.residual(np.append(v, lam0)),
                           lambda v: jacobian_full(v, p), z[:4], opts.newton_tol)
        z = np.append(z, lam0)
    if tangent0 is None:
        t = core.tangent(prob, z)
        if t[4] * direction < 0:
            t = -t
    else:
        t = np.asarray(tangent0, dtype=float)
        t = t / np.linalg.norm(t)
    zs, ts = [z], [t]
    ds = opts.ds
    while len(zs) < opts.max_points:
        z_new, t_new, _, ds = core.adaptive_step(prob, zs[-1], ts[-1], ds, opts)
        zs.append(z_new)
        ts.append(t_new)
        if not lo <= z_new[4] <= hi:
            break
    branch = EquilibriumBranch(free, p, [_point(prob, v) for v in zs], label=label, _z=zs, _t=ts)
    if detect:
        branch.detected = detect_equilibrium_bifurcations(branch, opts)
    return branch


def _det(problem, z):
    return float(np.linalg.det(jacobian_full(z[:4], problem.params(z[4]))))


def _hopf_fn(problem, z):
    ev = np.linalg.eigvals(jacobian_full(z[:4], problem.params(z[4])))
    cplx = ev[np.abs(ev.imag) > IMAG_TOL]
    if cplx.size == 0:
        return np.nan
    return float(cplx[np.argmin(np.abs(cplx.real))].real)


def _null_symmetry(phi) -> str:
    phi = phi / np.linalg.norm(phi)
    s = swap(phi)
    if np.linalg.norm(s - phi) < 1e-6:
        return "symmetric"
    if np.linalg.norm(s + phi) < 1e-6:
        return "antisymmetric"
    return "none"


def detect_equilibrium_bifurcations(branch: EquilibriumBranch, opts: PALCOptions | None = None,
                                    loc_tol: float = LOC_TOL) -> list:
    """Fold, Pitchfork and Hopf points between consecutive branch samples.

    A real eigenvalue through zero shows up as a sign change of det J; it is
    a Fold if the free parameter turns back there and a Pitchfork (branch
    point) otherwise.  A Hopf point is a change of the unstable count by two
    through a complex pair, localized on the real part of that pair.
    """
    opts = opts or PALCOptions()
    if len(branch.points) < 3:
        return []
    prob = branch.problem()
    found = []
    zs, ts = branch._z, branch._t
    for i in range(len(zs) - 1):
        za, zb, ta = zs[i], zs[i + 1], ts[i]
        ds = float(np.dot(zb - za, ta))
        pa, pb = branch.points[i], branch.points[i + 1]
        da, db = _det(prob, za), _det(prob, zb)
        if np.sign(da) != np.sign(db) and da != 0:
            fn = lambda z, t: _det(prob, z)  # noqa: E731
            zl, tl = core.bisect_event(prob, za, ta, ds, fn, da, db, loc_tol, opts)
            turned = np.sign(ts[i][4]) != np.sign(ts[i + 1][4])
            J = jacobian_full(zl[:4], prob.params(zl[4]))
            _, _, vt = np.linalg.svd(J)
            phi = vt[-1]
            kind = FOLD if turned else PITCHFORK
            found.append(BifurcationPoint(
                kind, {branch.free: float(zl[4])}, zl[:4].copy(),
                {"null_vector": phi, "null_symmetry": _null_symmetry(phi),
                 "eigenvalues": np.linalg.eigvals(J), "tangent": tl},
                branch=branch.label))
        if abs(pa.n_unstable - pb.n_unstable) == 2:
            ha, hb = _hopf_fn(prob, za), _hopf_fn(prob, zb)
            if np.isfinite(ha) and np.isfinite(hb) and np.sign(ha) != np.sign(hb):
                fn = lambda z, t: _hopf_fn(prob, z)  # noqa: E731
                zl, tl = core.bisect_event(prob, za, ta, ds, fn, ha, hb, loc_tol, opts)
                p_l = prob.params(zl[4])
                J = jacobian_full(zl[:4], p_l)
                ev, vec = np.linalg.eig(J)
                j = int(np.argmin(np.abs(ev.real) + (np.abs(ev.imag) < IMAG_TOL) * 1e9))
                if ev[j].imag < 0:
                    j = int(np.argmin(np.abs(ev - np.conj(ev[j]))))
                omega = float(ev[j].imag)
                found.append(BifurcationPoint(
                    HOPF, {branch.free: float(zl[4])}, zl[:4].copy(),
                    {"omega": omega, "period": 2 * np.pi / omega, "eigenvector": vec[:, j],
                     "eigenvalues": ev, "tangent": tl},
                    branch=branch.label))
    return found


def switch_branch(bp: BifurcationPoint, base: SystemParams, free: str, param_range,
                  opts: PALCOptions | None = None, step: float = 1e-3, sign: float = 1.0,
                  label: str = "") -> EquilibriumBranch:
    """Start the secondary branch through a Pitchfork (or transcritical) point.

    The two-dimensional kernel of ``[J | f_lam]`` at the branch point is
    computed and the direction orthogonal to the old tangent is used; the
    predictor moves ``step`` along it before the corrector pulls it back.
    """
    if bp.kind != PITCHFORK:
        raise ParameterError("branch switching needs a Pitchfork point")
    opts = opts or PALCOptions()
    prob = EquilibriumProblem(base, free)
    z0 = np.append(bp.state, bp.location[free])
    A = prob.jacobian(z0)
    _, _, vt = np.linalg.svd(A)
    kernel = vt[-2:].T  # 5 x 2; includes the null row of the 4 x 5 system
    t_old = np.asarray(bp.diagnostics["tangent"])
    basis = kernel - np.outer(t_old, t_old @ kernel)
    u, _, _ = np.linalg.svd(basis)
    d = u[:, 0]
    d = sign * d / np.linalg.norm(d)
    z_pred = z0 + step * d
    z1, _ = core.correct(prob, z_pred, d, opts.newton_tol, opts.max_newton)
    t1 = core.tangent(prob, z1, d)
    p1 = prob.params(z1[4])
    return continue_equilibria(z1[:4], p1, free, param_range, opts, tangent0=t1, label=label)


def asymmetric_branches(p: SystemParams, free: str = "b", param_range=(0.0, 3.0),
                        opts: PALCOptions | None = None):
    """E0 branch from ``p`` plus the two asymmetric branches switched at its +side Pitchfork.

    Returns ``(e0_branch, [upper, lower])``; the secondary list is empty when
    no Pitchfork lies in range.
    """
    from ..model import symmetric_equilibrium

    opts = opts or PALCOptions()
    e0 = continue_equilibria(symmetric_equilibrium(p), p, free, param_range, opts, label="E0")
    secondary = []
    for bp in e0.detected:
        if bp.kind == PITCHFORK and bp.diagnostics["null_symmetry"] == "antisymmetric":
            for sgn, name in ((1.0, "asym_a"), (-1.0, "asym_b")):
                try:
                    secondary.append(switch_branch(bp, p, free, param_range, opts, sign=sgn, label=name))
                except (NewtonDivergence, StepUnderflow):
                    continue
            break
    return e0, secondary
