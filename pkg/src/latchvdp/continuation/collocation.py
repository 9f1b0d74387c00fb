"""Orthogonal collocation for periodic orbits of the coupled system.

The orbit ``u(tau)``, ``tau in [0, 1]``, is piecewise polynomial of degree
``m`` on ``N`` mesh intervals, stored by its values at ``m + 1`` equispaced
nodes per interval (shared end nodes).  The ODE ``u' = T f(u)`` is imposed at
the ``m`` Gauss points of every interval, periodicity as ``u(1) = u(0)``,
and the phase by the integral condition ``int <u, u_ref'> dtau = 0``.
Collocation rows are written in physical time, ``u'/T - f(u)``, so their
residuals do not grow with the period.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.sparse as sp

from ..errors import MeshAdaptationFailure
from ..model import SystemParams, jacobian_full, param_derivative, vector_field

NDIM = 4
DEFAULT_DEGREE = 4
N_MIN, N_MAX = 80, 400


@dataclass(frozen=True)
class Basis:
    """Lagrange basis on ``m + 1`` equispaced nodes of [0, 1] evaluated at the Gauss points."""

    m: int
    nodes: np.ndarray      # (m+1,)
    gauss: np.ndarray      # (m,)
    gauss_w: np.ndarray    # (m,) sums to 1
    L: np.ndarray          # (m, m+1) values at Gauss points
    D: np.ndarray          # (m, m+1) derivatives at Gauss points
    node_w: np.ndarray     # (m+1,) Newton-Cotes weights, sum 1
    lead: np.ndarray       # (m+1,) m-th derivative of each basis polynomial

    @classmethod
    def build(cls, m: int = DEFAULT_DEGREE) -> "Basis":
        nodes = np.linspace(0.0, 1.0, m + 1)
        g, w = np.polynomial.legendre.leggauss(m)
        g, w = 0.5 * (g + 1.0), 0.5 * w
        L, D = _lagrange(nodes, g)
        # Newton-Cotes weights integrate the interpolant exactly
        V = np.vander(nodes, increasing=True)
        moments = 1.0 / np.arange(1, m + 2)
        node_w = np.linalg.solve(V.T, moments)
        lead = np.array([factorial(m) / np.prod([nodes[l] - nodes[r] for r in range(m + 1) if r != l])
                         for l in range(m + 1)])
        return cls(m, nodes, g, w, L, D, node_w, lead)


def _lagrange(nodes, x):
    """Values and first derivatives of the Lagrange basis on ``nodes`` at points ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = nodes.size
    L = np.ones((x.size, k))
    D = np.zeros((x.size, k))
    for l in range(k):
        others = [r for r in range(k) if r != l]
        denom = np.prod([nodes[l] - nodes[r] for r in others])
        for r in others:
            L[:, l] *= x - nodes[r]
        for q in others:
            term = np.ones(x.size)
            for r in others:
                if r != q:
                    term *= x - nodes[r]
            D[:, l] += term
        L[:, l] /= denom
        D[:, l] /= denom
    return L, D


@dataclass(frozen=True)
class Mesh:
    """Mesh points ``0 = tau_0 < ... < tau_N = 1`` plus the basis."""

    tau: np.ndarray
    basis: Basis

    @classmethod
    def uniform(cls, N: int, m: int = DEFAULT_DEGREE) -> "Mesh":
        return cls(np.linspace(0.0, 1.0, N + 1), Basis.build(m))

    @property
    def N(self) -> int:
        return self.tau.size - 1

    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.tau)

    @property
    def n_nodes(self) -> int:
        return self.N * self.m + 1

    def node_times(self) -> np.ndarray:
        t = (self.tau[:-1, None] + self.h[:, None] * self.basis.nodes[None, :-1]).ravel()
        return np.append(t, 1.0)

    def node_weights(self) -> np.ndarray:
        """Quadrature weights for node values (shared end nodes accumulate)."""
        w = np.zeros(self.n_nodes)
        idx = self._interval_nodes()
        np.add.at(w, idx, self.h[:, None] * self.basis.node_w[None, :])
        return w

    def _interval_nodes(self) -> np.ndarray:
        m = self.m
        return np.arange(self.N)[:, None] * m + np.arange(m + 1)[None, :]

    def interval_values(self, U) -> np.ndarray:
        """(N, m+1, n) view of node values grouped per interval."""
        return U[self._interval_nodes()]

    def at_gauss(self, U):
        """Values and tau-derivatives of the interpolant at all Gauss points, each (N, m, n)."""
        Uj = self.interval_values(U)
        uc = np.einsum("kl,jln->jkn", self.basis.L, Uj)
        du = np.einsum("kl,jln->jkn", self.basis.D, Uj) / self.h[:, None, None]
        return uc, du

    def evaluate(self, U, t) -> np.ndarray:
        """Interpolant at arbitrary ``t`` in [0, 1] (periodically wrapped)."""
        t = np.mod(np.atleast_1d(np.asarray(t, dtype=float)), 1.0)
        j = np.clip(np.searchsorted(self.tau, t, side="right") - 1, 0, self.N - 1)
        s = (t - self.tau[j]) / self.h[j]
        L, _ = _lagrange(self.basis.nodes, s)
        Uj = self.interval_values(U)[j]
        return np.einsum("pl,pln->pn", L, Uj)


class Structure:
    """Sparsity pattern of the collocation Jacobian for one mesh size; cached."""

    _cache: dict = {}

    def __init__(self, N, m, n=NDIM):
        jj, kk, ii, ll, qq = np.meshgrid(np.arange(N), np.arange(m), np.arange(n),
                                         np.arange(m + 1), np.arange(n), indexing="ij")
        self.rows = ((jj * m + kk) * n + ii).ravel()
        self.cols = ((jj * m + ll) * n + qq).ravel()
        self.n_coll = N * m * n

    @classmethod
    def get(cls, N, m, n=NDIM):
        key = (N, m, n)
        if key not in cls._cache:
            cls._cache[key] = cls(N, m, n)
        return cls._cache[key]


def block_values(mesh: Mesh, T: float, Jc) -> np.ndarray:
    """Collocation Jacobian blocks, shape (N, m, n, m+1, n)."""
    b = mesh.basis
    n = Jc.shape[-1]
    eye = np.eye(n)
    V = (b.D[None, :, None, :, None] / (T * mesh.h[:, None, None, None, None])) * eye[None, None, :, None, :]
    V = V - b.L[None, :, None, :, None] * Jc[:, :, :, None, :]
    return V


def collocation_residual(mesh: Mesh, U, T, p: SystemParams):
    uc, du = mesh.at_gauss(U)
    return (du / T - vector_field(uc, p)).ravel()


def phase_row(mesh: Mesh, dref_gauss) -> np.ndarray:
    """Gradient of ``int <u, u_ref'> dtau`` with respect to the node values."""
    b = mesh.basis
    n = dref_gauss.shape[-1]
    coef = np.einsum("k,kl,jkn->jln", b.gauss_w, b.L, dref_gauss) * mesh.h[:, None, None]
    row = np.zeros((mesh.n_nodes, n))
    np.add.at(row, mesh._interval_nodes(), coef)
    return row.ravel()


def collocation_jacobian(mesh: Mesh, U, T, p: SystemParams):
    """Sparse derivative of the collocation residual with respect to the node values."""
    uc, _ = mesh.at_gauss(U)
    Jc = jacobian_full(uc, p)
    st = Structure.get(mesh.N, mesh.m, U.shape[1])
    V = block_values(mesh, T, Jc)
    shape = (st.n_coll, U.size)
    return sp.csr_matrix((V.ravel(), (st.rows, st.cols)), shape=shape)


def transfer_matrices(mesh: Mesh, U, T, p: SystemParams) -> np.ndarray:
    """Per-interval linear maps ``v(tau_j) -> v(tau_{j+1})`` of the linearized collocation system."""
    uc, _ = mesh.at_gauss(U)
    Jc = jacobian_full(uc, p)
    V = block_values(mesh, T, Jc)
    N, m, n = V.shape[0], V.shape[1], V.shape[2]
    A = V.reshape(N, m * n, (m + 1) * n)
    A0, A1 = A[:, :, :n], A[:, :, n:]
    X = np.linalg.solve(A1, -A0)
    return X[:, -n:, :]


def condense(Ms):
    """Reduce ``x_{j+1} = M_j x_j`` to one relation ``A x_0 + B x_N = 0``.

    Each interior ``x_j`` is eliminated with an orthogonal (QR) step, so no
    product of transfer matrices is ever formed and ``[A | B]`` keeps
    orthonormal-scale rows whatever the growth along the orbit.
    """
    Ms = np.asarray(Ms)
    n = Ms.shape[1]
    A = Ms[0].copy()
    B = -np.eye(n)
    for M in Ms[1:]:
        # rows: A x0 + B xj = 0 and M xj - x_{j+1} = 0; eliminate xj
        Q, _ = np.linalg.qr(np.vstack([B, M]), mode="complete")
        lower = Q[:, n:].T
        A = lower[:, :n] @ A
        B = -lower[:, n:]
    return A, B


def floquet_multipliers(Ms) -> np.ndarray:
    """Eigenvalues of the product ``M_{N-1} ... M_0`` without forming it.

    The generalized eigenproblem ``A v = mu (-B) v`` of the condensed
    relation is solved by QZ.  Moduli beyond the float range are clamped;
    multipliers far from the unit circle are only accurate in modulus.
    """
    from scipy.linalg import eig

    A, B = condense(Ms)
    w = eig(A, -B, right=False, homogeneous_eigvals=True)
    alpha, beta = w[0], w[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = alpha / beta
    big = ~np.isfinite(mu) | (np.abs(mu) > 1e300)
    if np.any(big):
        phase = np.where(np.abs(alpha) > 0, alpha / np.where(np.abs(alpha) > 0, np.abs(alpha), 1.0), 1.0)
        mu = np.where(big, 1e300 * phase, mu)
    mu = np.where(np.abs(mu.imag) < 1e-12 * np.maximum(1.0, np.abs(mu)), mu.real + 0j, mu)
    return np.array(sorted(mu, key=lambda z: -abs(z)))


def param_column(mesh: Mesh, U, T, p: SystemParams, name: str) -> np.ndarray:
    uc, _ = mesh.at_gauss(U)
    return (-param_derivative(uc, p, name)).ravel()


def period_column(mesh: Mesh, U, T: float) -> np.ndarray:
    _, du = mesh.at_gauss(U)
    return (-du / (T * T)).ravel()


def mth_derivative(mesh: Mesh, U) -> np.ndarray:
    """Constant m-th tau-derivative of the interpolant on each interval, (N, n)."""
    Uj = mesh.interval_values(U)
    return np.einsum("l,jln->jn", mesh.basis.lead, Uj) / mesh.h[:, None] ** mesh.m


def monitor(mesh: Mesh, U) -> np.ndarray:
    """Per-interval ``|u^(m+1)|**(1/(m+1))`` estimated from jumps of the m-th derivative."""
    d = mth_derivative(mesh, U)
    h = mesh.h
    jump = np.max(np.abs(d - np.roll(d, 1, axis=0)), axis=1)  # at left end of each interval
    q = 2.0 * jump / (h + np.roll(h, 1))
    qi = 0.5 * (q + np.roll(q, -1))
    theta = qi ** (1.0 / (mesh.m + 1))
    if not np.all(np.isfinite(theta)):
        raise MeshAdaptationFailure("non-finite mesh monitor")
    floor = 0.05 * theta.mean() if theta.mean() > 0 else 1.0
    return theta + floor


def error_estimate(mesh: Mesh, U) -> float:
    th = monitor(mesh, U)
    return float(np.max((th * mesh.h) ** (mesh.m + 1)))


def adapt_mesh(mesh: Mesh, U, tol: float = 1e-8, n_min: int = N_MIN, n_max: int = N_MAX, N: int | None = None):
    """Equidistribute the monitor; choose the interval count from ``tol`` unless ``N`` is fixed.

    Returns ``(new_mesh, node_values_on_new_mesh, estimated_error)``.
    """
    theta = monitor(mesh, U)
    cum = np.concatenate([[0.0], np.cumsum(theta * mesh.h)])
    total = cum[-1]
    if N is None:
        N = int(np.ceil(total / tol ** (1.0 / (mesh.m + 1))))
        N = int(np.clip(N, n_min, n_max))
    targets = np.linspace(0.0, total, N + 1)
    tau = np.interp(targets, cum, mesh.tau)
    tau[0], tau[-1] = 0.0, 1.0
    if np.any(np.diff(tau) <= 0):
        raise MeshAdaptationFailure("mesh redistribution produced empty intervals")
    new = Mesh(tau, mesh.basis)
    V = mesh.evaluate(U, new.node_times())
    V[-1] = V[0]
    est = float((total / N) ** (mesh.m + 1))
    return new, V, est


def remesh(mesh: Mesh, U, new: Mesh) -> np.ndarray:
    V = mesh.evaluate(U, new.node_times())
    V[-1] = mesh.evaluate(U, [0.0])[0]
    return V
