"""Two-parameter curves: extended systems for Pitchfork, Hopf and SNPO points,
and the fixed-period approximation of homoclinic orbits.

Every curve lives in the ``(a, b)`` plane (symmetric parameter aliases) and is
traced with the same pseudo-arclength machinery as the one-parameter
branches.  The extended systems append the defining bifurcation condition to
the equilibrium or orbit equations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import MeshAdaptationFailure, NewtonDivergence, ParameterError, StepUnderflow
from ..model import SystemParams, jacobian_full, vector_field
from . import core
from .core import PALCOptions
from .orbits import OrbitOptions, OrbitSystem, PeriodicOrbit, continue_periodic_orbits
from .types import HOPF, HOMOCLINIC, PITCHFORK, SNPO, BifurcationPoint

DEFAULT_BOX = {"a": (-1.7, -1.0), "b": (0.0, 3.0)}
FD_STEP = 1e-7


@dataclass
class ParameterCurve:
    """A curve of codimension-one points in a two-parameter plane.

    ``points`` has one row per curve point with the two parameter values in
    the order of ``free``; ``data`` holds per-point extras (state, frequency
    or orbit).  ``folds`` lists points where the first parameter turns.
    """

    kind: str
    free: tuple
    points: np.ndarray
    data: list = field(default_factory=list)
    folds: list = field(default_factory=list)
    stop_reasons: tuple = ()

    def crossings(self, name: str, value: float) -> np.ndarray:
        """Values of the other parameter where the curve crosses ``name = value``."""
        i = self.free.index(name)
        j = 1 - i
        u, v = self.points[:, i] - value, self.points[:, j]
        out = []
        for k in range(len(u) - 1):
            if u[k] == 0.0:
                out.append(v[k])
            elif u[k] * u[k + 1] < 0:
                w = u[k] / (u[k] - u[k + 1])
                out.append(v[k] + w * (v[k + 1] - v[k]))
        if len(u) and u[-1] == 0.0:
            out.append(v[-1])
        return np.array(out)

    def csv_header(self):
        return [*self.free, "measure", "extra"]

    def csv_rows(self):
        for row, d in zip(self.points, self.data):
            yield [*row, d.get("measure", ""), d.get("extra", "")]

    def to_csv(self, path, comments=()):
        from ..io import write_csv

        write_csv(path, self.csv_header(), self.csv_rows(), comments)


# ---------------------------------------------------------------------------
# generic tracer

def _fd_jacobian(fun, z, n_rows):
    J = np.empty((n_rows, z.size))
    for i in range(z.size):
        h = FD_STEP * max(1.0, abs(z[i]))
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        J[:, i] = (fun(zp) - fun(zm)) / (2 * h)
    return J


def _in_box(problem, z, box):
    for name, idx in problem.param_slots.items():
        lo, hi = box[name]
        if not lo <= z[idx] <= hi:
            return False
    return True


def _trace_one(problem, z0, t0, box, opts: PALCOptions, adapt_every=0, mesh_tol=1e-7):
    zs, ts = [z0], [t0]
    z, t = z0, t0
    ds = opts.ds
    reason = "max points"
    steps = 0
    ia = problem.param_slots[problem.free[0]]
    folds = []
    while len(zs) < opts.max_points:
        problem.prepare(z)
        try:
            z_new, t_new, ds_used, ds = core.adaptive_step(problem, z, t, ds, opts)
        except (StepUnderflow, MeshAdaptationFailure) as exc:
            reason = f"step underflow: {exc}"
            break
        if np.sign(t_new[ia]) != np.sign(t[ia]) and t[ia] != 0.0:
            try:
                zl, _ = core.bisect_event(problem, z, t, ds_used, lambda v, tv: tv[ia],
                                          t[ia], t_new[ia], 1e-8, opts)
            except NewtonDivergence:
                zl = z_new
            folds.append(problem.record(zl))
        zs.append(problem.record(z_new))
        z, t = z_new, t_new
        steps += 1
        if not _in_box(problem, z, box):
            reason = "left parameter window"
            break
        if adapt_every and steps % adapt_every == 0:
            z, t = problem.remesh(z, t, mesh_tol)
            t = t / np.sqrt(np.sum(problem.weights(z) * t * t))
    else:
        reason = "max points"
    return zs[1:], folds, reason


def _trace(problem, z0, box, opts, both=True, adapt_every=0, mesh_tol=1e-7):
    """Trace from ``z0`` in the direction of increasing first parameter and back."""
    ia = problem.param_slots[problem.free[0]]
    problem.prepare(z0)
    t0 = core.tangent(problem, z0)
    if t0[ia] < 0:
        t0 = -t0
    first = problem.record(z0)
    out_f, folds_f, why_f = _trace_one(problem, z0, t0, box, opts, adapt_every, mesh_tol)
    out_b, folds_b, why_b = [], [], "not traced"
    if both:
        problem.reset()
        problem.prepare(z0)
        t1 = core.tangent(problem, z0)
        if t1[ia] > 0:
            t1 = -t1
        out_b, folds_b, why_b = _trace_one(problem, z0, t1, box, opts, adapt_every, mesh_tol)
    recs = out_b[::-1] + [first] + out_f
    return recs, folds_b[::-1] + folds_f, (why_b, why_f)


def _curve(kind, free, recs, folds, reasons):
    pts = np.array([r["params"] for r in recs])
    return ParameterCurve(kind, tuple(free), pts, recs, folds, reasons)


# ---------------------------------------------------------------------------
# equilibrium extended systems

class _EquilibriumCurveProblem:
    """Dense extended system; unknowns end with the two free parameters."""

    def __init__(self, base: SystemParams, free):
        self.base = base
        self.free = tuple(free)
        for f in self.free:
            base.get(f)

    def params(self, z):
        return self.base.with_(**{self.free[0]: float(z[-2]), self.free[1]: float(z[-1])})

    @property
    def param_slots(self):
        return {self.free[0]: self.n - 2, self.free[1]: self.n - 1}

    @property
    def param_index(self):
        return self.n - 2

    def jacobian(self, z):
        return _fd_jacobian(self.residual, z, self.n - 1)

    def weights(self, z):
        return np.ones(self.n)

    def reset(self):
        pass


class PitchforkCurveProblem(_EquilibriumCurveProblem):
    """``f = 0``, ``J v = 0``, ``c . v = 1`` with ``z = (x, v, p1, p2)``."""

    n = 10

    def __init__(self, base, free, c):
        super().__init__(base, free)
        self.c0 = np.asarray(c, dtype=float)
        self.c = self.c0.copy()

    def reset(self):
        self.c = self.c0.copy()

    def prepare(self, z):
        v = z[4:8]
        self.c = v / np.dot(v, v)

    def residual(self, z):
        p = self.params(z)
        x, v = z[:4], z[4:8]
        return np.concatenate([vector_field(x, p), jacobian_full(x, p) @ v, [self.c @ v - 1.0]])

    def record(self, z):
        return {"params": z[-2:].copy(), "state": z[:4].copy(), "measure": float(z[0]), "extra": ""}


class HopfCurveProblem(_EquilibriumCurveProblem):
    """``f = 0`` and ``J (vr + i vi) = i w (vr + i vi)`` with a complex normalization.

    ``z = (x, vr, vi, w, p1, p2)``.
    """

    n = 15

    def __init__(self, base, free, q):
        super().__init__(base, free)
        q = np.asarray(q, dtype=complex)
        self.q0 = q / np.vdot(q, q).real
        self.q = self.q0.copy()

    def reset(self):
        self.q = self.q0.copy()

    def prepare(self, z):
        v = z[4:8] + 1j * z[8:12]
        self.q = v / np.vdot(v, v).real

    def residual(self, z):
        p = self.params(z)
        x, vr, vi, w = z[:4], z[4:8], z[8:12], z[12]
        J = jacobian_full(x, p)
        n = np.vdot(self.q, vr + 1j * vi)
        return np.concatenate([vector_field(x, p), J @ vr + w * vi, J @ vi - w * vr,
                               [n.real - 1.0, n.imag]])

    def record(self, z):
        return {"params": z[-2:].copy(), "state": z[:4].copy(), "measure": float(z[0]),
                "extra": float(z[12]), "omega": float(z[12])}


def _plane_start(bp: BifurcationPoint, base: SystemParams, free):
    name = next(iter(bp.location))
    p = base.with_(**{name: bp.location[name]})
    return p, [p.get(f) for f in free]


def pitchfork_curve(bp: BifurcationPoint, base: SystemParams, free=("a", "b"), box=None,
                    opts: PALCOptions | None = None) -> ParameterCurve:
    """Pitchfork (zero-eigenvalue) curve through a detected equilibrium branch point."""
    opts = opts or PALCOptions(ds=1e-2, ds_max=5e-2, max_points=400)
    p, vals = _plane_start(bp, base, free)
    v = np.asarray(bp.diagnostics["null_vector"], dtype=float)
    v = v / np.linalg.norm(v)
    prob = PitchforkCurveProblem(p, free, v)
    z0 = np.concatenate([bp.state, v, vals])
    recs, folds, why = _trace(prob, z0, box or DEFAULT_BOX, opts)
    return _curve(PITCHFORK, free, recs, folds, why)


def hopf_curve(bp: BifurcationPoint, base: SystemParams, free=("a", "b"), box=None,
               opts: PALCOptions | None = None) -> ParameterCurve:
    """Hopf curve through a detected Hopf point of an equilibrium branch."""
    opts = opts or PALCOptions(ds=1e-2, ds_max=5e-2, max_points=400)
    p, vals = _plane_start(bp, base, free)
    q = np.asarray(bp.diagnostics["eigenvector"], dtype=complex)
    omega = float(bp.diagnostics["omega"])
    prob = HopfCurveProblem(p, free, q)
    z0 = np.concatenate([bp.state, q.real, q.imag, [omega], vals])
    recs, folds, why = _trace(prob, z0, box or DEFAULT_BOX, opts)
    return _curve(HOPF, free, recs, folds, why)


# ---------------------------------------------------------------------------
# orbit-based curves

class _OrbitCurveBase:
    """Shared bookkeeping for curves built on the collocation system."""

    def _set_system(self, sysm: OrbitSystem, initial: bool = False):
        self.sysm = sysm
        self.nu = sysm.nu
        if initial:
            self._initial = sysm

    @property
    def param_slots(self):
        return {f: self.sysm.nu + self.sysm.free.index(f) for f in self.free}

    @property
    def param_index(self):
        return self.param_slots[self.free[0]]

    def weights(self, z):
        return self.sysm.weights(z[: self.sysm.nu + len(self.sysm.free)])

    def reset(self):
        # the seed vector lives on the starting mesh
        self._set_system(self._initial)
        self.B = self.C = None

    def orbit(self, z) -> PeriodicOrbit:
        return self.sysm.orbit(z)

    def record(self, z):
        orb = self.orbit(z)
        vals = np.array([orb.params.get(f) for f in self.free])
        return {"params": vals, "orbit": orb, "measure": orb.max_x1, "extra": orb.T}


class FixedPeriodProblem(_OrbitCurveBase):
    """Collocation system with the period locked and both parameters free."""

    def __init__(self, sysm: OrbitSystem):
        self._set_system(sysm, initial=True)
        self.free = tuple(f for f in sysm.free if f != "T")

    def prepare(self, z):
        self.sysm.set_reference(self.sysm.unpack(z)[0])

    def residual(self, z):
        return self.sysm.residual(z)

    def jacobian(self, z):
        return self.sysm.jacobian(z)

    def remesh(self, z, t, tol):
        sysm, z, t, _ = self.sysm.remeshed(z, t, tol)
        self._set_system(sysm)
        return z, t


class SNPOCurveProblem(_OrbitCurveBase):
    """Minimally augmented fold-of-orbits system.

    Unknowns ``(U, T, p1, p2)``.  The extra equation is the scalar ``g`` from
    the bordered system ``[[A, B], [C^T, 0]] (w, g) = (0, 1)`` where ``A`` is
    the Jacobian with respect to ``(U, T)``; ``g`` vanishes exactly where ``A``
    is singular, i.e. at a fold of the orbit family.
    """

    def __init__(self, sysm: OrbitSystem):
        if sysm.free[0] != "T" or len(sysm.free) != 3:
            raise ParameterError("SNPO curve needs a system with free = ('T', p1, p2)")
        self._set_system(sysm, initial=True)
        self.free = sysm.free[1:]
        self.B = self.C = None

    @property
    def m(self):
        return self.nu + 1

    def _A(self, z):
        return self.sysm.jacobian(z)[:, : self.m]

    def _borders(self, z):
        A = sp.csc_matrix(self._A(z))
        rng = np.random.default_rng(7)
        lu = core.LinearSolver(A)
        w, psi = rng.standard_normal(self.m), rng.standard_normal(self.m)
        for _ in range(2):
            w = lu.solve(w / np.linalg.norm(w))
            psi = lu.solve(psi / np.linalg.norm(psi), transposed=True)
        self.C = w / np.linalg.norm(w)
        self.B = psi / np.linalg.norm(psi)

    def prepare(self, z):
        self.sysm.set_reference(self.sysm.unpack(z)[0])
        self.sysm.T_scale = self.sysm.unpack(z)[1]
        if self.B is None:
            self._borders(z)
            return
        _, w, psi = self._solve(z)
        self.C = w / np.linalg.norm(w)
        self.B = psi / np.linalg.norm(psi)

    def _bordered(self, z):
        A = self._A(z)
        return sp.bmat([[A, sp.csc_matrix(self.B.reshape(-1, 1))],
                        [sp.csr_matrix(self.C.reshape(1, -1)), None]], format="csc")

    def _solve(self, z):
        M = self._bordered(z)
        rhs = np.zeros(self.m + 1)
        rhs[-1] = 1.0
        lu = core.LinearSolver(M)
        x = lu.solve(rhs)
        y = lu.solve(rhs, transposed=True)
        return x[-1], x[:-1], y[:-1]

    def residual(self, z):
        g, _, _ = self._solve(z)
        return np.append(self.sysm.residual(z), g)

    def jacobian(self, z):
        _, w, psi = self._solve(z)
        wz = np.concatenate([w, np.zeros(z.size - self.m)])
        h = 1e-6 * max(1.0, np.linalg.norm(z)) / max(np.linalg.norm(w), 1e-300)
        Jp = self.sysm.jacobian(z + h * wz)
        Jm = self.sysm.jacobian(z - h * wz)
        gz = -(Jp.T @ psi - Jm.T @ psi) / (2 * h)
        return sp.vstack([self.sysm.jacobian(z), sp.csr_matrix(gz.reshape(1, -1))], format="csc")

    def remesh(self, z, t, tol):
        sysm, z, t, _ = self.sysm.remeshed(z, t, tol)
        sysm.T_scale = self.sysm.T_scale
        self._set_system(sysm)
        self._borders(z)
        return z, t


def _orbit_system(orb: PeriodicOrbit, free, T_fixed=None):
    sysm = OrbitSystem(orb.mesh, orb.params, free, T_fixed=T_fixed, ref_U=orb.U)
    sysm.T_scale = orb.T
    return sysm


def snpo_curve(bp: BifurcationPoint, free=("a", "b"), box=None, opts: PALCOptions | None = None,
               adapt_every: int = 3, mesh_tol: float = 1e-7) -> ParameterCurve:
    """Fold-of-orbits curve through a localized SNPO point."""
    if bp.kind != SNPO or bp.orbit is None:
        raise ParameterError("snpo_curve needs an SNPO point carrying its orbit")
    opts = opts or PALCOptions(ds=1e-2, ds_max=5e-2, max_points=300)
    orb = bp.orbit
    prob = SNPOCurveProblem(_orbit_system(orb, ("T", *free)))
    z0 = prob.sysm.pack(orb.U, orb.T, orb.params)
    prob.prepare(z0)
    recs, folds, why = _trace(prob, z0, box or DEFAULT_BOX, opts, adapt_every=adapt_every,
                              mesh_tol=mesh_tol)
    return _curve(SNPO, free, recs, folds, why)


def orbit_with_period(orb: PeriodicOrbit, T: float, free: str = "b", param_range=(0.0, 3.0),
                      opts: OrbitOptions | None = None, directions=(-1.0, 1.0)) -> PeriodicOrbit:
    """Follow the family through ``orb`` until the period reaches ``T`` and pin it there.

    The family is continued with the period free, trying each entry of
    ``directions`` (sense of ``free``) until one run passes ``T``; that orbit
    is then corrected with the period fixed and ``free`` adjusting.
    """
    start = orb
    if orb.T < T:
        opts = (opts or OrbitOptions()).with_(T_homoclinic=T, detect=False)
        reasons = []
        for d in directions:
            br = continue_periodic_orbits(orb, free, param_range, opts, direction=d, label="to-period")
            start = br.orbits[-1]
            if start.T >= T:
                break
            reasons.append(f"{start.T:.1f} ({br.stop_reason})")
        else:
            raise NewtonDivergence("period did not reach target: " + "; ".join(reasons))
    sysm = _orbit_system(start, (free,), T_fixed=T)
    z = sysm.pack(start.U, T, start.params)
    z, _ = core.newton(sysm.residual, sysm.jacobian, z, core.NEWTON_TOL, 30)
    return sysm.orbit(z)


def continue_fixed_period_orbit(seed: PeriodicOrbit, T: float | None = None, free=("a", "b"),
                                box=None, opts: PALCOptions | None = None, adapt_every: int = 3,
                                mesh_tol: float = 1e-7) -> ParameterCurve:
    """Curve of orbits with period locked at ``T`` (defaults to the seed period).

    For large ``T`` the curve approximates the homoclinic bifurcation curve.
    Folds in the first free parameter are reported in ``curve.folds``.
    """
    T = float(seed.T if T is None else T)
    if abs(seed.T - T) > 1e-9 * T:
        seed = orbit_with_period(seed, T, free[1])
    opts = opts or PALCOptions(ds=1e-2, ds_max=5e-2, max_points=400)
    prob = FixedPeriodProblem(_orbit_system(seed, tuple(free), T_fixed=T))
    z0 = prob.sysm.pack(seed.U, T, seed.params)
    recs, folds, why = _trace(prob, z0, box or DEFAULT_BOX, opts, adapt_every=adapt_every,
                              mesh_tol=mesh_tol)
    return _curve(HOMOCLINIC, free, recs, folds, why)


def two_parameter_curves(kind: str, start: BifurcationPoint, base: SystemParams | None = None,
                         free=("a", "b"), box=None, opts: PALCOptions | None = None) -> ParameterCurve:
    """Dispatch on ``kind`` (Pitchfork, Hopf or SNPO) from a localized point."""
    if kind == PITCHFORK:
        return pitchfork_curve(start, base, free, box, opts)
    if kind == HOPF:
        return hopf_curve(start, base, free, box, opts)
    if kind == SNPO:
        return snpo_curve(start, free, box, opts)
    raise ParameterError(f"no two-parameter curve for {kind!r}")
