"""Periodic-orbit continuation by collocation, with Floquet-based detection."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ..errors import (MeshAdaptationFailure, NewtonDivergence, NumericsError, ParameterError,
                      StepUnderflow)
from ..model import SystemParams, jacobian_full, swap, vector_field
from . import collocation as col
from . import core
from .core import PALCOptions
from .types import HOMOCLINIC, PERIOD_DOUBLING, PITCHFORK, SNPO, TORUS, BifurcationPoint, eig_columns

TRIVIAL_TOL = 1e-3
STABILITY_MARGIN = 1e-6
IMAG_TOL = 1e-7


@dataclass(frozen=True)
class PeriodicOrbit:
    """One converged periodic orbit.

    ``U`` holds node values on ``mesh`` (last row repeats the first), ``T``
    the period in time units.
    """

    mesh: col.Mesh
    U: np.ndarray
    T: float
    params: SystemParams
    multipliers: np.ndarray = field(default=None)
    error_estimate: float = float("nan")

    def __post_init__(self):
        if self.multipliers is None:
            Ms = col.transfer_matrices(self.mesh, self.U, self.T, self.params)
            object.__setattr__(self, "multipliers", col.floquet_multipliers(Ms))
        self.U.setflags(write=False)

    @property
    def trivial_index(self) -> int:
        return int(np.argmin(np.abs(self.multipliers - 1.0)))

    @property
    def trivial_multiplier(self) -> complex:
        return complex(self.multipliers[self.trivial_index])

    @property
    def nontrivial(self) -> np.ndarray:
        return np.delete(self.multipliers, self.trivial_index)

    @property
    def stable(self) -> bool:
        return bool(np.all(np.abs(self.nontrivial) < 1.0 - STABILITY_MARGIN))

    @property
    def max_x1(self) -> float:
        return float(self.sample(2000)[:, 0].max())

    def sample(self, n: int = 1000) -> np.ndarray:
        return self.mesh.evaluate(self.U, np.linspace(0.0, 1.0, n, endpoint=False))

    def times(self) -> np.ndarray:
        return self.T * self.mesh.node_times()

    def state0(self) -> np.ndarray:
        return np.array(self.U[0])

    def distance_to(self, points) -> np.ndarray:
        """Minimum Euclidean distance from each of ``points`` to the orbit."""
        pts = np.atleast_2d(points)
        curve = self.dense_curve()
        out = np.empty(len(pts))
        for i, q in enumerate(pts):
            out[i] = _point_to_polyline(q, curve)
        return out

    def dense_curve(self, per_interval: int = 16) -> np.ndarray:
        s = np.linspace(0.0, 1.0, per_interval, endpoint=False)
        t = (self.mesh.tau[:-1, None] + self.mesh.h[:, None] * s[None, :]).ravel()
        c = self.mesh.evaluate(self.U, t)
        return np.vstack([c, c[:1]])

    def mirrored(self) -> "PeriodicOrbit":
        U = swap(self.U).copy()
        return PeriodicOrbit(self.mesh, U, self.T, self.params, self.multipliers, self.error_estimate)

    def residual_norm(self) -> float:
        r = col.collocation_residual(self.mesh, self.U, self.T, self.params)
        return float(np.max(np.abs(r)))


def _point_to_polyline(q, curve):
    a, b = curve[:-1], curve[1:]
    d = b - a
    L2 = np.einsum("ij,ij->i", d, d)
    s = np.clip(np.einsum("ij,ij->i", q - a, d) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    proj = a + s[:, None] * d
    return float(np.min(np.linalg.norm(proj - q, axis=1)))


def orbit_distance(o1: PeriodicOrbit, o2: PeriodicOrbit) -> float:
    """Symmetric Hausdorff-type distance between two closed curves."""
    c1, c2 = o1.dense_curve(), o2.dense_curve()
    d12 = max(_point_to_polyline(q, c2) for q in c1[::4])
    d21 = max(_point_to_polyline(q, c1) for q in c2[::4])
    return max(d12, d21)


class OrbitSystem:
    """Collocation equations with a chosen set of free scalars.

    ``free`` lists the unknown scalars in order; entries are ``"T"`` or
    parameter names.  When ``"T"`` is absent the period is fixed at
    ``T_fixed``.  ``z = (U.ravel(), *free)``.
    """

    def __init__(self, mesh: col.Mesh, base: SystemParams, free, T_fixed=None, ref_U=None):
        self.mesh = mesh
        self.base = base
        self.free = tuple(free)
        for name in self.free:
            if name != "T":
                base.get(name)
        if "T" not in self.free and T_fixed is None:
            raise ParameterError("fixed-period system needs T_fixed")
        self.T_fixed = T_fixed
        self.nu = mesh.n_nodes * col.NDIM
        self.T_scale = 1.0
        self.dref = None
        if ref_U is not None:
            self.set_reference(ref_U)
        pnames = [f for f in self.free if f != "T"]
        self.param_index = self.nu + self.free.index(pnames[0]) if pnames else self.nu

    # -- packing -------------------------------------------------------------
    def pack(self, U, T, p: SystemParams):
        vals = [T if f == "T" else p.get(f) for f in self.free]
        return np.concatenate([np.asarray(U, dtype=float).ravel(), vals])

    def unpack(self, z):
        U = z[: self.nu].reshape(-1, col.NDIM)
        vals = dict(zip(self.free, z[self.nu:]))
        T = vals.pop("T", self.T_fixed)
        p = self.base.with_(**{k: float(v) for k, v in vals.items()}) if vals else self.base
        return U, float(T), p

    def set_reference(self, U):
        _, du = self.mesh.at_gauss(np.asarray(U).reshape(-1, col.NDIM))
        self.dref = du
        self._phase_row = col.phase_row(self.mesh, du)

    # -- equations -----------------------------------------------------------
    def residual(self, z):
        U, T, p = self.unpack(z)
        r = col.collocation_residual(self.mesh, U, T, p)
        bc = U[-1] - U[0]
        ph = np.dot(self._phase_row, U.ravel())
        return np.concatenate([r, bc, [ph]])

    def jacobian(self, z):
        U, T, p = self.unpack(z)
        n = col.NDIM
        Jc = col.collocation_jacobian(self.mesh, U, T, p)
        nn = self.mesh.n_nodes * n
        bc = sp.csr_matrix(
            (np.concatenate([np.ones(n), -np.ones(n)]),
             (np.concatenate([np.arange(n)] * 2), np.concatenate([nn - n + np.arange(n), np.arange(n)]))),
            shape=(n, nn))
        ph = sp.csr_matrix(self._phase_row.reshape(1, -1))
        JU = sp.vstack([Jc, bc, ph], format="csr")
        cols = []
        for f in self.free:
            c = col.period_column(self.mesh, U, T) if f == "T" else col.param_column(self.mesh, U, T, p, f)
            cols.append(np.concatenate([c, np.zeros(n + 1)]))
        E = sp.csr_matrix(np.column_stack(cols)) if cols else None
        return sp.hstack([JU, E], format="csc") if E is not None else JU.tocsc()

    def weights(self, z):
        w = np.repeat(self.mesh.node_weights(), col.NDIM)
        extra = [1.0 / self.T_scale ** 2 if f == "T" else 1.0 for f in self.free]
        return np.concatenate([w, extra])

    def orbit(self, z) -> PeriodicOrbit:
        U, T, p = self.unpack(z)
        return PeriodicOrbit(self.mesh, np.array(U), T, p)

    def remeshed(self, z, t, tol, N=None):
        """New system on an adapted mesh plus ``z`` and ``t`` mapped onto it."""
        U, _, _ = self.unpack(z)
        new_mesh, V, est = col.adapt_mesh(self.mesh, U, tol, N=N)
        new = OrbitSystem(new_mesh, self.base, self.free, self.T_fixed)
        new.T_scale = self.T_scale
        zn = np.concatenate([V.ravel(), z[self.nu:]])
        tn = None
        if t is not None:
            tU = col.remesh(self.mesh, t[: self.nu].reshape(-1, col.NDIM), new_mesh)
            tn = np.concatenate([tU.ravel(), t[self.nu:]])
        new.set_reference(V)
        return new, zn, tn, est


@dataclass(frozen=True)
class OrbitOptions:
    palc: PALCOptions = field(default_factory=lambda: PALCOptions(ds=1e-3, ds_max=5e-2, max_points=600))
    N: int = 120
    mesh_tol: float = 1e-7
    adapt_every: int = 3
    T_homoclinic: float = 1000.0
    T_max: float = 1e5
    loc_tol: float = 1e-7
    detect: bool = True

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class OrbitBranch:
    free: str
    orbits: list
    detected: list = field(default_factory=list)
    label: str = ""
    stop_reason: str = ""

    @property
    def params(self) -> np.ndarray:
        return np.array([o.params.get(self.free) for o in self.orbits])

    @property
    def periods(self) -> np.ndarray:
        return np.array([o.T for o in self.orbits])

    def csv_header(self):
        cols = [self.free, "measure_max_x1", "period", "stable", "n_intervals"]
        for i in range(4):
            cols += [f"re_mu{i + 1}", f"im_mu{i + 1}"]
        return cols

    def csv_rows(self):
        for o in self.orbits:
            yield [o.params.get(self.free), o.max_x1, o.T, int(o.stable), o.mesh.N, *eig_columns(o.multipliers)]

    def to_csv(self, path, comments=()):
        from ..io import write_csv

        write_csv(path, self.csv_header(), self.csv_rows(), comments)


# ---------------------------------------------------------------------------
# seeding

def solve_orbit(mesh: col.Mesh, U, T, p: SystemParams, tol=core.NEWTON_TOL, adapt=True,
                mesh_tol=1e-7, N=None) -> PeriodicOrbit:
    """Newton on (U, T) at fixed parameters, with optional mesh adaptation rounds."""
    U = np.array(U, dtype=float)
    U[-1] = U[0]
    sysm = OrbitSystem(mesh, p, ("T",), ref_U=U)
    z = sysm.pack(U, T, p)
    rounds = 3 if adapt else 1
    est = float("nan")
    for r in range(rounds):
        z, _ = core.newton(sysm.residual, sysm.jacobian, z, tol, max_iter=30)
        if r < rounds - 1:
            sysm, z, _, est = sysm.remeshed(z, None, mesh_tol, N=N)
            sysm.set_reference(sysm.unpack(z)[0])
    U, T, p = sysm.unpack(z)
    orb = sysm.orbit(z)
    return replace(orb, error_estimate=est) if np.isfinite(est) else orb


def orbit_from_trajectory(traj, period: float, N: int = 120, t_start: float | None = None,
                          mesh_tol: float = 1e-7) -> PeriodicOrbit:
    """Converge a periodic orbit from one period of a simulated trajectory.

    The last state of ``traj`` (or the state at ``t_start``) is re-integrated
    over one period with a fine output grid, interpolated onto the
    collocation mesh and then polished by Newton.
    """
    from scipy.interpolate import CubicSpline

    from ..integrate import SolverOptions, integrate

    s0 = traj.final_state if t_start is None else traj.states[np.searchsorted(traj.times, t_start)]
    opts = SolverOptions(rel_tol=1e-10, abs_tol=1e-12, t_end=period, max_step=period / 20000.0, events=())
    seg = integrate(s0, traj.params, opts)
    spline = CubicSpline(seg.times / period, seg.states, axis=0)
    mesh = col.Mesh.uniform(N)
    U = spline(mesh.node_times())
    return solve_orbit(mesh, U, period, traj.params, mesh_tol=mesh_tol)


def simulate_orbit(s0, p: SystemParams, coord: str = "x1", t_end: float = 1e4, N: int = 120) -> PeriodicOrbit:
    """Simulate from ``s0``, detect the period and converge the orbit."""
    from ..errors import NoSolution
    from ..integrate import SolverOptions, detect_period, integrate

    traj = integrate(s0, p, SolverOptions(t_end=t_end))
    # slowly attracting orbits near a homoclinic need a second window
    traj = integrate(traj.final_state, p, SolverOptions(t_end=t_end))
    T = detect_period(traj, coord)
    if T is None:
        T = detect_period(traj, "x2" if coord == "x1" else "x1")
    if T is None:
        raise NoSolution("simulation did not settle on a periodic orbit")
    return orbit_from_trajectory(traj, T, N)


def hopf_predictor(bp: BifurcationPoint, base: SystemParams, free: str, N: int = 80, amplitude: float = 1e-3):
    """First-order predictor at a Hopf point.

    Returns ``(system, z_hopf, t_seed)``: the degenerate constant orbit at the
    Hopf point and the unit direction ``Re(q exp(2 pi i tau))`` of the
    emerging oscillation.
    """
    q = np.asarray(bp.diagnostics["eigenvector"], dtype=complex)
    q = q / np.linalg.norm(q)
    omega = float(bp.diagnostics["omega"])
    p = base.with_(**{free: bp.location[free]})
    mesh = col.Mesh.uniform(N)
    tn = mesh.node_times()
    phi = np.real(q[None, :] * np.exp(2j * np.pi * tn)[:, None])
    U0 = np.repeat(bp.state[None, :], tn.size, axis=0)
    sysm = OrbitSystem(mesh, p, ("T", free))
    sysm.T_scale = 2 * np.pi / omega
    z0 = sysm.pack(U0, 2 * np.pi / omega, p)
    t = np.concatenate([phi.ravel(), [0.0, 0.0]])
    t = t / np.sqrt(np.sum(sysm.weights(z0) * t * t))
    sysm.set_reference(U0 + amplitude * phi)
    return sysm, z0, t


def orbit_from_hopf(bp, base: SystemParams, free: str, amplitude: float = 1e-3, N: int = 80,
                    opts: PALCOptions | None = None):
    """Small-amplitude orbit near a Hopf point; returns ``(orbit, system, z, tangent)``."""
    opts = opts or PALCOptions()
    sysm, z0, t = hopf_predictor(bp, base, free, N, amplitude)
    z1, _ = core.correct(sysm, z0 + amplitude * t, t, opts.newton_tol, 30)
    sysm.set_reference(sysm.unpack(z1)[0])
    t1 = core.tangent(sysm, z1, t)
    return sysm.orbit(z1), sysm, z1, t1


# ---------------------------------------------------------------------------
# detection helpers

RESOLVED = 1e8


def _categories(mu_nt):
    """Multipliers outside the unit circle by type.

    Beyond ``RESOLVED`` only the modulus is trustworthy, so those count as
    ``far`` whatever their computed phase.
    """
    out = np.abs(mu_nt) > 1.0
    far = np.abs(mu_nt) > RESOLVED
    cplx = np.abs(mu_nt.imag) > IMAG_TOL * np.maximum(1.0, np.abs(mu_nt))
    near = out & ~far
    return {
        "complex": int(np.sum(near & cplx)),
        "positive": int(np.sum(near & ~cplx & (mu_nt.real > 0))),
        "negative": int(np.sum(near & ~cplx & (mu_nt.real < 0))),
        "far": int(np.sum(far)),
    }


def _torus_fn(orb: PeriodicOrbit):
    mu = orb.nontrivial
    c = mu[np.abs(mu.imag) > IMAG_TOL]
    if c.size == 0:
        return np.nan
    return float(np.abs(c[np.argmin(np.abs(np.abs(c) - 1.0))]) - 1.0)


def _real_fn(orb: PeriodicOrbit, sign: float):
    mu = orb.nontrivial
    r = mu[(np.abs(mu.imag) <= IMAG_TOL) & (np.sign(mu.real) == sign)].real
    if r.size == 0:
        return np.nan
    return float(r[np.argmin(np.abs(np.abs(r) - 1.0))] * sign - 1.0)


def nearby_saddle(orb: PeriodicOrbit):
    """Equilibrium nearest the slowest part of the orbit and the orbit's distance to it.

    Returns ``(x_eq, distance, n_unstable)`` or ``None`` if Newton fails.
    """
    pts = orb.dense_curve(4)
    speed = np.linalg.norm(vector_field(pts, orb.params), axis=1)
    x = pts[int(np.argmin(speed))]
    try:
        x_eq, _ = core.newton(lambda v: vector_field(v, orb.params),
                              lambda v: jacobian_full(v, orb.params), x, 1e-12, 30)
    except NumericsError:
        return None
    # the start node may already pass the residual test; polish so that x_eq
    # is the equilibrium and not the orbit point next to it
    for _ in range(2):
        x_eq = x_eq - np.linalg.solve(jacobian_full(x_eq, orb.params), vector_field(x_eq, orb.params))
    ev = np.linalg.eigvals(jacobian_full(x_eq, orb.params))
    d = float(orb.distance_to(x_eq)[0])
    return x_eq, d, int(np.sum(ev.real > 0))


def _event(kind, sysm, z, free, label, extra=None):
    orb = sysm.orbit(z)
    diag = {"multipliers": orb.multipliers, "period": orb.T}
    if extra:
        diag.update(extra)
    return BifurcationPoint(kind, {free: float(orb.params.get(free))}, orb.state0(), diag, orb, label)


def continue_periodic_orbits(seed, free: str, param_range, opts: OrbitOptions | None = None,
                             direction: float = 1.0, label: str = "") -> OrbitBranch:
    """Trace a branch of periodic orbits in one parameter.

    ``seed`` is either a converged :class:`PeriodicOrbit` or the tuple
    ``(system, z, tangent)`` returned by :func:`orbit_from_hopf` (minus the
    orbit).  The run stops when the parameter leaves ``param_range``, when
    the period passes ``opts.T_homoclinic`` (recorded as HomoclinicApprox if
    the orbit is closing in on a saddle), or when the step size underflows.
    """
    opts = opts or OrbitOptions()
    po = opts.palc
    lo, hi = sorted(map(float, param_range))
    if not hi > lo:
        raise ParameterError("empty parameter range")
    if isinstance(seed, PeriodicOrbit):
        sysm = OrbitSystem(seed.mesh, seed.params, ("T", free), ref_U=seed.U)
        sysm.T_scale = seed.T
        z = sysm.pack(seed.U, seed.T, seed.params)
        t = core.tangent(sysm, z)
        if t[sysm.param_index] * direction < 0:
            t = -t
    else:
        sysm, z, t = seed
        if t[sysm.param_index] * direction < 0 and abs(t[sysm.param_index]) > 1e-12:
            t = -t
    branch = OrbitBranch(free, [sysm.orbit(z)], label=label)
    approach = []  # (T, distance to nearby saddle) once the period is large
    ds = po.ds
    steps = 0
    while len(branch.orbits) < po.max_points:
        sysm.set_reference(sysm.unpack(z)[0])
        sysm.T_scale = sysm.unpack(z)[1]
        try:
            z_new, t_new, ds_used, ds = core.adaptive_step(sysm, z, t, ds, po)
        except (StepUnderflow, MeshAdaptationFailure) as exc:
            branch.stop_reason = f"step underflow: {exc}"
            break
        try:
            orb = sysm.orbit(z_new)
        except MeshAdaptationFailure as exc:
            branch.stop_reason = str(exc)
            break
        prev = branch.orbits[-1]
        if opts.detect:
            branch.detected.extend(_detect_step(sysm, z, t, z_new, t_new, ds_used, prev, orb, free, opts, label))
        branch.orbits.append(orb)
        z, t = z_new, t_new
        steps += 1
        pval = orb.params.get(free)
        if not lo <= pval <= hi:
            branch.stop_reason = "parameter range"
            break
        if orb.T > 0.25 * opts.T_homoclinic:
            sad = nearby_saddle(orb)
            approach.append((orb.T, sad[1] if sad is not None else np.inf))
        if orb.T > opts.T_homoclinic:
            if sad is not None and sad[2] >= 1 and _shrinking([d for _, d in approach[-5:]]):
                branch.detected.append(_event(HOMOCLINIC, sysm, z, free, label, {
                    "saddle": sad[0], "distance": sad[1], "saddle_unstable_dim": sad[2],
                    "period_history": [a for a, _ in approach[-10:]],
                    "distance_history": [d for _, d in approach[-10:]],
                    "log_fit_r2": period_log_distance_r2(approach[-10:])}))
            branch.stop_reason = "period threshold"
            break
        if steps % opts.adapt_every == 0:
            try:
                sysm, z, t, est = sysm.remeshed(z, t, opts.mesh_tol)
                t = t / np.sqrt(np.sum(sysm.weights(z) * t * t))
            except MeshAdaptationFailure as exc:
                branch.stop_reason = str(exc)
                break
    else:
        branch.stop_reason = "max points"
    _merge_homoclinic_turns(branch, opts)
    return branch


def _merge_homoclinic_turns(branch: OrbitBranch, opts: OrbitOptions, tol: float = 1e-5):
    """Fold the turning points of the final approach into the homoclinic record.

    Close to a homoclinic orbit the branch wiggles in the parameter at the
    resolution floor; those long-period turns are not separate bifurcations.
    """
    hom = [bp for bp in branch.detected if bp.kind == HOMOCLINIC]
    if not hom:
        return
    h = hom[-1]
    ph = h.param(branch.free)
    keep, merged = [], 0
    for bp in branch.detected:
        if (bp.kind == SNPO and abs(bp.param(branch.free) - ph) < tol
                and bp.diagnostics["period"] > 0.5 * opts.T_homoclinic):
            merged += 1
            continue
        keep.append(bp)
    h.diagnostics["merged_turns"] = merged
    branch.detected = keep


def _shrinking(ds) -> bool:
    return len(ds) >= 3 and all(np.isfinite(ds)) and all(b <= a for a, b in zip(ds, ds[1:]))


def period_log_distance_r2(pairs) -> float:
    """R^2 of the affine fit of period against log(distance to the saddle)."""
    T = np.array([a for a, _ in pairs], dtype=float)
    d = np.array([b for _, b in pairs], dtype=float)
    if T.size < 3 or np.any(d <= 0) or not np.all(np.isfinite(d)):
        return float("nan")
    x = np.log(d)
    c = np.polyfit(x, T, 1)
    res = T - np.polyval(c, x)
    tot = np.sum((T - T.mean()) ** 2)
    return float(1.0 - np.sum(res ** 2) / tot) if tot > 0 else float("nan")


def _near_circle(orb, kind, tol=0.05) -> bool:
    mu = orb.nontrivial
    if kind == TORUS:
        c = mu[np.abs(mu.imag) > IMAG_TOL]
        return bool(c.size and np.min(np.abs(np.abs(c) - 1.0)) < tol)
    target = 1.0 if kind == PITCHFORK else -1.0
    return bool(np.min(np.abs(mu - target)) < tol)


def _detect_step(sysm, za, ta, zb, tb, ds, oa, ob, free, opts, label):
    out = []
    k = sysm.param_index
    ca, cb = _categories(oa.nontrivial), _categories(ob.nontrivial)
    n_a, n_b = sum(ca.values()), sum(cb.values())
    loc = opts.loc_tol
    po = opts.palc

    def locate(fn, fa, fb):
        return core.bisect_event(sysm, za, ta, ds, fn, fa, fb, loc, po)

    turned = np.sign(ta[k]) != np.sign(tb[k])
    if turned:
        zl, tl = locate(lambda z, t: t[k], ta[k], tb[k])
        out.append(_event(SNPO, sysm, zl, free, label))
    if n_a == n_b:
        return out
    if ca["complex"] != cb["complex"]:
        # a pair leaving through the real axis is not a torus crossing
        fa, fb = _torus_fn(oa), _torus_fn(ob)
        if np.isfinite(fa) and np.isfinite(fb) and np.sign(fa) != np.sign(fb):
            zl, _ = locate(lambda z, t: _torus_fn(sysm.orbit(z)), fa, fb)
            orb_l = sysm.orbit(zl)
            if _near_circle(orb_l, TORUS):
                c = orb_l.nontrivial[np.abs(orb_l.nontrivial.imag) > IMAG_TOL]
                out.append(_event(TORUS, sysm, zl, free, label, {"rotation": float(np.abs(np.angle(c[0])))}))
    for kind, sign, key in ((PITCHFORK, 1.0, "positive"), (PERIOD_DOUBLING, -1.0, "negative")):
        if ca[key] == cb[key] or (kind == PITCHFORK and turned):
            continue
        fa, fb = _real_fn(oa, sign), _real_fn(ob, sign)
        if not (np.isfinite(fa) and np.isfinite(fb) and np.sign(fa) != np.sign(fb)):
            continue
        zl, _ = locate(lambda z, t, sg=sign: _real_fn(sysm.orbit(z), sg), fa, fb)
        # multipliers jumping across the circle from far away are resolution
        # noise, not a crossing
        if not _near_circle(sysm.orbit(zl), kind):
            continue
        extra = {}
        if kind == PITCHFORK:
            extra["orbit_branch_point"] = True
        out.append(_event(kind, sysm, zl, free, label, extra))
    return out
