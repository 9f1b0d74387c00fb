"""Time integration with adaptive error control and event location.

The explicit route is a Dormand-Prince 5(4) pair implemented twice: a
compiled Cython kernel (``_dopri_ext``) and a pure-Python reference
(``_dopri_py``).  The compiled kernel is picked at import when available;
set ``LATCHVDP_PURE_PYTHON=1`` to force the fallback.  The implicit route
delegates to scipy's Radau IIA solver for stiff parameter cells.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _dopri_py
from .errors import Blowup, ParameterError, StepSizeUnderflow, TooShort, NumericsError
from .model import SystemParams, vector_field, jacobian_full

try:
    if os.environ.get("LATCHVDP_PURE_PYTHON"):
        raise ImportError("pure-Python kernel forced")
    from . import _dopri_ext
except ImportError:  # pragma: no cover - depends on the build
    _dopri_ext = None

BACKEND = "compiled" if _dopri_ext is not None else "python"

EVENT_KINDS = ("max_x1", "max_x2", "min_x1", "min_x2", "cross_x1_x2")
_EVENT_CODE = {k: i for i, k in enumerate(EVENT_KINDS)}
COORDS = {"x1": 0, "y1": 1, "x2": 2, "y2": 3}

BLOWUP_LIMIT = 1e6

__all__ = [
    "SolverOptions",
    "Trajectory",
    "Event",
    "integrate",
    "detect_period",
    "BACKEND",
    "EVENT_KINDS",
]


@dataclass(frozen=True)
class SolverOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 5.0
    t_end: float = 1e4
    method: str = "explicit"
    events: tuple = ("max_x1", "max_x2", "min_x1", "min_x2")
    event_tol: float = 1e-10
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("tolerances must be positive")
        if not self.t_end > 0:
            raise ParameterError("t_end must be positive")
        if not self.max_step > 0:
            raise ParameterError("max_step must be positive")
        if self.method not in ("explicit", "implicit"):
            raise ParameterError(f"unknown method {self.method!r}; use 'explicit' or 'implicit'")
        unknown = set(self.events) - set(EVENT_KINDS)
        if unknown:
            raise ParameterError(f"unknown event kinds {sorted(unknown)}")
        object.__setattr__(self, "events", tuple(self.events))

    def with_(self, **kw) -> "SolverOptions":
        from dataclasses import replace

        return replace(self, **kw)


class Event(NamedTuple):
    time: float
    kind: str
    state: np.ndarray


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """Stored accepted steps plus located events.  Arrays are read-only."""

    times: np.ndarray
    states: np.ndarray
    event_times: np.ndarray
    event_codes: np.ndarray
    event_states: np.ndarray
    params: SystemParams
    options: SolverOptions
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "states", "event_times", "event_codes", "event_states"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def events(self) -> list[Event]:
        return [
            Event(float(t), EVENT_KINDS[int(c)], s.copy())
            for t, c, s in zip(self.event_times, self.event_codes, self.event_states)
        ]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def event_times_of(self, kind: str, t_min: float = -np.inf) -> np.ndarray:
        code = _EVENT_CODE[kind]
        mask = (self.event_codes == code) & (self.event_times >= t_min)
        return np.asarray(self.event_times[mask])

    def event_states_of(self, kind: str, t_min: float = -np.inf) -> np.ndarray:
        code = _EVENT_CODE[kind]
        mask = (self.event_codes == code) & (self.event_times >= t_min)
        return np.asarray(self.event_states[mask])

    def window_start(self, fraction: float) -> float:
        """Time after which the last ``fraction`` of the run lies."""
        return float(self.times[-1] - fraction * self.duration)

    def peak_to_peak(self, coord: str, t_min: float) -> float:
        """Peak-to-peak of one coordinate over ``t >= t_min``.

        Located extrema are merged with stored points so the true peaks are
        used rather than the nearest accepted step.
        """
        j = COORDS[coord]
        vals = self.states[self.times >= t_min, j]
        ev = self.event_states[self.event_times >= t_min, j]
        allv = np.concatenate([vals, ev])
        if allv.size == 0:
            return 0.0
        return float(allv.max() - allv.min())

    def to_csv(self, path, header_lines=()):
        from .io import write_trajectory_csv

        write_trajectory_csv(path, self, header_lines)


def _event_mask(kinds) -> int:
    mask = 0
    for k in kinds:
        mask |= 1 << _EVENT_CODE[k]
    return mask


def _check_status(status, t_reached):
    if status == 1:
        raise StepSizeUnderflow(f"step size underflow at t = {t_reached:.6g}")
    if status == 2:
        raise Blowup(f"|state| exceeded {BLOWUP_LIMIT:g} at t = {t_reached:.6g}")
    if status == 3:
        raise NumericsError(f"step budget exhausted at t = {t_reached:.6g}")


def integrate(s0, p: SystemParams, opts: SolverOptions | None = None, backend: str | None = None) -> Trajectory:
    """Integrate the coupled system from ``s0`` over ``[0, opts.t_end]``.

    Parameters
    ----------
    s0 : array_like, shape (4,)
    p : SystemParams
    opts : SolverOptions, optional
    backend : {"compiled", "python"}, optional
        Explicit-method kernel; defaults to :data:`BACKEND`.

    Raises
    ------
    StepSizeUnderflow, Blowup
    """
    opts = opts or SolverOptions()
    s0 = np.ascontiguousarray(s0, dtype=float).reshape(4)
    if not np.all(np.isfinite(s0)):
        raise ParameterError("initial state must be finite")
    if opts.method == "implicit":
        return _integrate_implicit(s0, p, opts)

    backend = backend or BACKEND
    if backend == "compiled":
        if _dopri_ext is None:
            raise ParameterError("compiled kernel not available in this build")
        kernel = _dopri_ext.integrate
    elif backend == "python":
        kernel = _dopri_py.integrate
    else:
        raise ParameterError(f"unknown backend {backend!r}")

    t, y, et, ec, es, status, (nfev, nacc, nrej) = kernel(
        s0,
        np.ascontiguousarray(p.as_array()),
        float(opts.t_end),
        float(opts.rel_tol),
        float(opts.abs_tol),
        float(opts.max_step),
        _event_mask(opts.events),
        BLOWUP_LIMIT,
        int(opts.max_steps),
        float(opts.event_tol),
    )
    _check_status(status, t[-1])
    stats = {"nfev": nfev, "naccept": nacc, "nreject": nrej, "backend": backend, "method": "dopri5"}
    return Trajectory(t, y, et, ec, es, p, opts, stats)


def _integrate_implicit(s0, p, opts):
    from scipy.integrate import solve_ivp

    def rhs(t, s):
        return vector_field(s, p)

    def jac(t, s):
        return jacobian_full(s, p)

    def make_event(kind):
        if kind == "cross_x1_x2":
            fn = lambda t, s: s[0] - s[2]  # noqa: E731
            fn.direction = 0
        else:
            j = 0 if kind.endswith("x1") else 2
            fn = lambda t, s, j=j: vector_field(s, p)[j]  # noqa: E731
            fn.direction = -1 if kind.startswith("max") else 1
        fn.terminal = False
        return fn

    def blow(t, s):
        return BLOWUP_LIMIT - np.max(np.abs(s))

    blow.terminal = True
    kinds = list(opts.events)
    sol = solve_ivp(
        rhs,
        (0.0, opts.t_end),
        s0,
        method="Radau",
        jac=jac,
        rtol=opts.rel_tol,
        atol=opts.abs_tol,
        max_step=opts.max_step,
        events=[make_event(k) for k in kinds] + [blow],
    )
    if sol.status == -1:
        raise StepSizeUnderflow(sol.message)
    if sol.t_events[-1].size:
        raise Blowup(f"|state| exceeded {BLOWUP_LIMIT:g} at t = {sol.t_events[-1][0]:.6g}")
    et, ec, es = [], [], []
    for k, times, states in zip(kinds, sol.t_events[:-1], sol.y_events[:-1]):
        et.extend(times)
        ec.extend([_EVENT_CODE[k]] * len(times))
        es.extend(states)
    order = np.argsort(np.asarray(et), kind="stable")
    et = np.asarray(et, dtype=float)[order]
    ec = np.asarray(ec, dtype=np.int64)[order]
    es = np.asarray(es, dtype=float).reshape(-1, 4)[order]
    stats = {"nfev": sol.nfev, "naccept": sol.t.size - 1, "nreject": 0, "backend": "scipy", "method": "radau"}
    return Trajectory(sol.t, sol.y.T, et, ec, es, p, opts, stats)


def large_maxima(traj: Trajectory, coord: str, t_min: float):
    """Times and values of maxima reaching the upper half of the coordinate's range."""
    kind = "max_" + coord
    times = traj.event_times_of(kind, t_min)
    vals = traj.event_states_of(kind, t_min)[:, COORDS[coord]]
    if times.size == 0:
        return times, vals
    j = COORDS[coord]
    window = traj.states[traj.times >= t_min, j]
    lo = min(window.min(), vals.min()) if window.size else vals.min()
    hi = max(window.max(), vals.max()) if window.size else vals.max()
    keep = vals >= lo + 0.5 * (hi - lo)
    return times[keep], vals[keep]


def detect_period(
    traj: Trajectory,
    coord: str = "x1",
    discard: float = 0.2,
    rel_spread: float = 0.01,
    steady_threshold: float = 0.01,
) -> float | None:
    """Period estimated from the spacing of successive maxima.

    Returns ``None`` when the selected coordinate is non-periodic: either it
    has settled (peak-to-peak below ``steady_threshold``) or the maxima
    spacings spread by more than ``rel_spread`` relative to their mean.

    Raises
    ------
    TooShort
        Fewer than four maxima of an oscillating coordinate in the window.
    """
    if coord not in ("x1", "x2"):
        raise ParameterError("period detection uses x1 or x2")
    t_min = traj.times[0] + discard * traj.duration
    if traj.peak_to_peak(coord, t_min) < steady_threshold:
        return None
    times, _ = large_maxima(traj, coord, t_min)
    if times.size < 4:
        raise TooShort(f"only {times.size} maxima of {coord} after transient discard")
    gaps = np.diff(times)
    mean = gaps.mean()
    if (gaps.max() - gaps.min()) / mean > rel_spread:
        return None
    return float(mean)
