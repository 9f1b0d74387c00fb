"""Coupled van der Pol oscillators with mutual tanh inhibition.

State ordering is ``(x1, y1, x2, y2)`` everywhere in the package.  All
functions accept a single state of shape ``(4,)`` or a stack of states of
shape ``(..., 4)``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import NoSolution, ParameterError

__all__ = [
    "SystemParams",
    "TABLE1",
    "vector_field",
    "jacobian_full",
    "param_derivative",
    "swap",
    "symmetric_equilibrium",
    "single_oscillator_jacobian",
    "single_oscillator_hopf_a",
    "forced_oscillator_hopf_x2",
    "PARAM_NAMES",
]

PARAM_NAMES = ("eps1", "eps2", "a1", "a2", "b1", "b2", "k1", "k2")
# symmetric aliases move both oscillators' copies together
_ALIASES = {"eps": ("eps1", "eps2"), "a": ("a1", "a2"), "b": ("b1", "b2"), "k": ("k1", "k2")}


@dataclass(frozen=True)
class SystemParams:
    """The eight model constants.

    ``eps_i`` are timescale separations, ``a_i`` latching parameters,
    ``b_i`` coupling strengths and ``k_i`` coupling response sensitivities.
    """

    eps1: float = 0.01
    eps2: float = 0.01
    a1: float = -1.1
    a2: float = -1.1
    b1: float = 0.3
    b2: float = 0.3
    k1: float = 1.0
    k2: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ParameterError(f"{f.name} must be finite, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ParameterError("timescale separations must be positive")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ParameterError("coupling sensitivities must be positive")

    @classmethod
    def identical_pair(cls, eps=0.01, a=-1.1, b=0.3, k=1.0) -> "SystemParams":
        return cls(eps, eps, a, a, b, b, k, k)

    @property
    def identical(self) -> bool:
        return (
            self.eps1 == self.eps2
            and self.a1 == self.a2
            and self.b1 == self.b2
            and self.k1 == self.k2
        )

    def require_identical(self, what="this operation"):
        if not self.identical:
            raise ParameterError(f"{what} requires identical oscillators, got {self}")

    def get(self, name: str) -> float:
        if name in _ALIASES:
            first, second = _ALIASES[name]
            v1, v2 = getattr(self, first), getattr(self, second)
            if v1 != v2:
                raise ParameterError(f"{name!r} is ambiguous for non-identical params")
            return v1
        if name not in PARAM_NAMES:
            raise ParameterError(f"unknown parameter {name!r}")
        return getattr(self, name)

    def with_(self, **values) -> "SystemParams":
        """Copy with parameters replaced; ``a``, ``b``, ``eps``, ``k`` set both copies."""
        changes = {}
        for name, v in values.items():
            if name in _ALIASES:
                for target in _ALIASES[name]:
                    changes[target] = v
            elif name in PARAM_NAMES:
                changes[name] = v
            else:
                raise ParameterError(f"unknown parameter {name!r}")
        return replace(self, **changes)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in PARAM_NAMES}


TABLE1 = SystemParams.identical_pair()


def _cubic(x):
    return (1.0 - x * x / 3.0) * x


def vector_field(s, p: SystemParams) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    x1, y1, x2, y2 = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    out = np.empty(s.shape, dtype=float)
    out[..., 0] = y1 + _cubic(x1)
    out[..., 1] = p.eps1 * (p.a1 - x1 + p.b1 * np.tanh(p.k2 * (p.a2 - x2)))
    out[..., 2] = y2 + _cubic(x2)
    out[..., 3] = p.eps2 * (p.a2 - x2 + p.b2 * np.tanh(p.k1 * (p.a1 - x1)))
    return out


def _sech2(z):
    # written with exp(-2|z|) so large arguments underflow to 0 instead of overflowing
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / ((1.0 + e) * (1.0 + e))


def jacobian_full(s, p: SystemParams) -> np.ndarray:
    """Analytic derivative of :func:`vector_field`, rows and columns ordered (x1, y1, x2, y2)."""
    s = np.asarray(s, dtype=float)
    x1, x2 = s[..., 0], s[..., 2]
    J = np.zeros(s.shape + (4,), dtype=float)
    J[..., 0, 0] = 1.0 - x1 * x1
    J[..., 0, 1] = 1.0
    J[..., 1, 0] = -p.eps1
    J[..., 1, 2] = -p.eps1 * p.b1 * p.k2 * _sech2(p.k2 * (p.a2 - x2))
    J[..., 2, 2] = 1.0 - x2 * x2
    J[..., 2, 3] = 1.0
    J[..., 3, 2] = -p.eps2
    J[..., 3, 0] = -p.eps2 * p.b2 * p.k1 * _sech2(p.k1 * (p.a1 - x1))
    return J


def param_derivative(s, p: SystemParams, name: str) -> np.ndarray:
    """Partial derivative of the vector field with respect to one parameter.

    ``name`` may be any of :data:`PARAM_NAMES` or a symmetric alias
    (``a``, ``b``, ``eps``, ``k``), in which case the derivatives of both
    copies are summed.
    """
    if name in _ALIASES:
        n1, n2 = _ALIASES[name]
        return param_derivative(s, p, n1) + param_derivative(s, p, n2)
    s = np.asarray(s, dtype=float)
    x1, x2 = s[..., 0], s[..., 2]
    out = np.zeros(s.shape, dtype=float)
    t2 = np.tanh(p.k2 * (p.a2 - x2))
    t1 = np.tanh(p.k1 * (p.a1 - x1))
    if name == "eps1":
        out[..., 1] = p.a1 - x1 + p.b1 * t2
    elif name == "eps2":
        out[..., 3] = p.a2 - x2 + p.b2 * t1
    elif name == "a1":
        out[..., 1] = p.eps1
        out[..., 3] = p.eps2 * p.b2 * p.k1 * _sech2(p.k1 * (p.a1 - x1))
    elif name == "a2":
        out[..., 3] = p.eps2
        out[..., 1] = p.eps1 * p.b1 * p.k2 * _sech2(p.k2 * (p.a2 - x2))
    elif name == "b1":
        out[..., 1] = p.eps1 * t2
    elif name == "b2":
        out[..., 3] = p.eps2 * t1
    elif name == "k1":
        out[..., 3] = p.eps2 * p.b2 * (p.a1 - x1) * _sech2(p.k1 * (p.a1 - x1))
    elif name == "k2":
        out[..., 1] = p.eps1 * p.b1 * (p.a2 - x2) * _sech2(p.k2 * (p.a2 - x2))
    else:
        raise ParameterError(f"unknown parameter {name!r}")
    return out


def swap(s) -> np.ndarray:
    """Exchange symmetry: (x1, y1, x2, y2) -> (x2, y2, x1, y1)."""
    s = np.asarray(s, dtype=float)
    return s[..., [2, 3, 0, 1]]


def symmetric_equilibrium(p: SystemParams) -> np.ndarray:
    p.require_identical("symmetric_equilibrium")
    a = p.a1
    y = -_cubic(a)
    return np.array([a, y, a, y])


def single_oscillator_jacobian(a: float, eps: float) -> np.ndarray:
    """Jacobian of one uncoupled oscillator at its equilibrium ``x = a``."""
    return np.array([[1.0 - a * a, 1.0], [-eps, 0.0]])


def single_oscillator_hopf_a() -> float:
    # trace 1 - a^2 vanishes at a = -1 and a = +1; only the a <= 0 root is used
    return -1.0


def forced_oscillator_hopf_x2(p: SystemParams) -> float:
    """Value of x2 at which oscillator 1, with x2 frozen, undergoes its Hopf bifurcation.

    The Hopf of the forced oscillator sits where its y1-nullcline crosses the
    left fold ``x1 = -1``; inverting ``a - x1 + b*tanh(k*(a - x2)) = 0`` gives
    ``x2 = a - atanh((-1 - a)/b)/k``.
    """
    p.require_identical("forced_oscillator_hopf_x2")
    a, b, k = p.a1, p.b1, p.k2
    if b == 0.0:
        raise NoSolution("uncoupled oscillator cannot be unlatched (b = 0)")
    arg = (-1.0 - a) / b
    if not -1.0 < arg < 1.0:
        raise NoSolution(f"atanh argument {arg:.6g} outside (-1, 1); coupling too weak to unlatch")
    return a - np.arctanh(arg) / k
