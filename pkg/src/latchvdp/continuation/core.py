"""Pseudo-arclength predictor-corrector machinery shared by all branch types.

A *problem* object describes an underdetermined system ``R(z) = 0`` with
``len(z) = len(R) + 1`` and must provide::

    residual(z) -> ndarray (m,)
    jacobian(z) -> ndarray or scipy.sparse matrix (m, m + 1)
    weights(z)  -> ndarray (m + 1,)   diagonal of the arclength inner product
    param_index -> int                index of the primary continuation parameter

Everything here works on plain vectors; branch-specific bookkeeping lives in
the modules that use it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NewtonDivergence, StepUnderflow

NEWTON_TOL = 1e-10


@dataclass
class PALCOptions:
    ds: float = 1e-2
    ds_min: float = 1e-5
    ds_max: float = 5e-2
    newton_tol: float = NEWTON_TOL
    max_newton: int = 12
    grow: float = 1.5
    max_points: int = 2000


def _bordered_matrix(J, row):
    if sp.issparse(J):
        return sp.vstack([J, sp.csr_matrix(row.reshape(1, -1))], format="csc")
    return np.vstack([J, row[None, :]])


class LinearSolver:
    """Factorise once, solve many right-hand sides."""

    def __init__(self, A):
        self.sparse = sp.issparse(A)
        self._A = sp.csr_matrix(A) if self.sparse else None
        try:
            if self.sparse:
                # minimum degree on A^T + A keeps the block-banded collocation
                # pattern intact; COLAMD fills in badly on it
                self._lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")
            else:
                import scipy.linalg as sla

                self._lu = sla.lu_factor(A, check_finite=True)
        except (RuntimeError, ValueError) as exc:
            raise NewtonDivergence(f"singular linear system: {exc}") from exc

    def solve(self, b, transposed=False):
        """Solve ``A x = b`` (or ``A^T x = b``) with the stored factors."""
        if self.sparse:
            b = np.asarray(b, dtype=float)
            trans = "T" if transposed else "N"
            A = self._A.T if transposed else self._A
            x = self._lu.solve(b, trans=trans)
            # one refinement sweep recovers the digits lost to pivoting on
            # nearly singular collocation systems
            x = x + self._lu.solve(b - A @ x, trans=trans)
        else:
            import scipy.linalg as sla

            x = sla.lu_solve(self._lu, b, trans=1 if transposed else 0)
        if not np.all(np.isfinite(x)):
            raise NewtonDivergence("non-finite linear solve")
        return x


def bordered_solve(J, row, rhs):
    return LinearSolver(_bordered_matrix(J, row)).solve(rhs)


def tangent(problem, z, t_prev=None):
    """Unit tangent (in the problem's weighted norm), oriented along ``t_prev``."""
    J = problem.jacobian(z)
    W = problem.weights(z)
    n = z.size
    if t_prev is None:
        # pick the border row that gives the best conditioned system
        t = _nullvector(J)
    else:
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        t = bordered_solve(J, W * t_prev, rhs)
    t = t / np.sqrt(np.sum(W * t * t))
    if t_prev is not None and np.sum(W * t * t_prev) < 0:
        t = -t
    return t


def _nullvector(J):
    if sp.issparse(J):
        n = J.shape[1]
        best = None
        rng = np.random.default_rng(12345)
        row = rng.standard_normal(n)
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        best = bordered_solve(J, row, rhs)
        return best
    _, _, vt = np.linalg.svd(np.asarray(J))
    return vt[-1]


def newton(residual_fn, jacobian_fn, z0, tol=NEWTON_TOL, max_iter=12, extra=None):
    """Newton iteration for a square system.

    ``extra`` optionally appends one scalar equation: a pair
    ``(value_fn(z), gradient_row)`` with a constant gradient row.
    """
    z = np.array(z0, dtype=float)
    res_prev = np.inf
    for it in range(max_iter + 1):
        R = residual_fn(z)
        if extra is not None:
            R = np.append(R, extra[0](z))
        rn = np.max(np.abs(R))
        if not np.isfinite(rn):
            raise NewtonDivergence("non-finite residual")
        if rn <= tol:
            return z, it
        if it == max_iter:
            break
        if it > 2 and rn > 10 * res_prev:
            break
        res_prev = min(res_prev, rn)
        J = jacobian_fn(z)
        if extra is not None:
            J = _bordered_matrix(J, extra[1])
        dz = LinearSolver(J).solve(-R)
        z = z + dz
        if np.max(np.abs(dz)) <= 1e-13 * max(1.0, np.max(np.abs(z))) and rn <= 1e3 * tol:
            return z, it + 1
    raise NewtonDivergence(f"Newton failed to converge (residual {rn:.3e})")


def correct(problem, z_pred, t, tol=NEWTON_TOL, max_iter=12):
    """Newton corrector on the hyperplane through ``z_pred`` orthogonal to ``t``."""
    W = problem.weights(z_pred)
    row = W * t

    def arc(z):
        return float(np.dot(row, z - z_pred))

    return newton(problem.residual, problem.jacobian, z_pred, tol, max_iter, extra=(arc, row))


def step(problem, z, t, ds, opts: PALCOptions):
    """One predictor-corrector step; returns (z_new, t_new, newton_iterations)."""
    z_new, its = correct(problem, z + ds * t, t, opts.newton_tol, opts.max_newton)
    t_new = tangent(problem, z_new, t)
    return z_new, t_new, its


def adaptive_step(problem, z, t, ds, opts: PALCOptions):
    """Step with halving on failure; returns (z_new, t_new, ds_used, ds_next)."""
    sign = 1.0 if ds >= 0 else -1.0
    h = abs(ds)
    while True:
        try:
            z_new, t_new, its = step(problem, z, t, sign * h, opts)
        except NewtonDivergence:
            h *= 0.5
            if h < opts.ds_min:
                raise StepUnderflow(f"continuation step fell below {opts.ds_min:g}")
            continue
        nxt = h * opts.grow if its <= 3 else (h if its <= 6 else 0.5 * h)
        nxt = min(max(nxt, opts.ds_min), opts.ds_max)
        return z_new, t_new, sign * h, sign * nxt


def bisect_event(problem, z_a, t_a, ds, fn, f_a, f_b, param_tol, opts: PALCOptions, max_iter=60):
    """Locate a sign change of ``fn(z, t)`` between ``z_a`` and the step ``ds`` ahead.

    Bisection on the arclength variable; each trial point is corrected back
    onto the branch.  Stops once the bracket is narrower than ``param_tol`` in
    the primary parameter.  Returns ``(z, t)`` at the bracket end nearest the
    root.
    """
    k = problem.param_index
    lo, hi = 0.0, ds
    z_lo, z_hi = z_a, None
    t_lo = t_a
    g_lo, g_hi = f_a, f_b
    z_hi, t_hi = None, None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        try:
            z_m, _ = correct(problem, z_a + mid * t_a, t_a, opts.newton_tol, opts.max_newton)
            t_m = tangent(problem, z_m, t_a)
        except NewtonDivergence:
            break
        g_m = fn(z_m, t_m)
        # an undefined test value counts as the far side of the bracket
        if np.isfinite(g_m) and np.sign(g_m) == np.sign(g_lo):
            lo, z_lo, t_lo, g_lo = mid, z_m, t_m, g_m
        else:
            hi, z_hi, t_hi, g_hi = mid, z_m, t_m, g_m
        if z_hi is not None and abs(z_hi[k] - z_lo[k]) < param_tol:
            break
    if z_hi is None:
        return z_lo, t_lo
    if abs(z_hi[k] - z_lo[k]) >= param_tol:
        return (z_lo, t_lo) if abs(g_lo) < abs(g_hi) else (z_hi, t_hi)
    # secant estimate between the final bracket ends
    w = g_lo / (g_lo - g_hi) if np.isfinite(g_hi) and g_lo != g_hi else 0.5
    w = float(np.clip(w, 0.0, 1.0))
    s = lo + w * (hi - lo)
    try:
        z_s, _ = correct(problem, z_a + s * t_a, t_a, opts.newton_tol, opts.max_newton)
        return z_s, tangent(problem, z_s, t_a)
    except NewtonDivergence:
        return (z_lo, t_lo) if abs(g_lo) < abs(g_hi) else (z_hi, t_hi)
