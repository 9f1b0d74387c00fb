"""Long-run attractor classification and the (a, b) classification map."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import NumericsError, ParameterError, StepSizeUnderflow, TooShort
from .integrate import SolverOptions, Trajectory, integrate, large_maxima
from .model import SystemParams, TABLE1, symmetric_equilibrium

STEADY, SINGLE, DOUBLE, OTHER = "SteadyState", "SingleLoop", "DoubleLoop", "Other"
TAGS = (STEADY, SINGLE, DOUBLE, OTHER)

LARGE_AMPLITUDE = 2.0
STEADY_AMPLITUDE = 0.01
ANALYSIS_WINDOW = 0.2
DEFAULT_PERTURBATION = (0.0, 0.0, 1.5, 0.0)


@dataclass(frozen=True)
class AttractorClass:
    tag: str
    amp_x1: float
    amp_x2: float
    detail: str = ""
    phase: float | None = None
    failed: bool = False
    note: str = ""

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ParameterError(f"unknown tag {self.tag!r}")


def peak_sequence(traj: Trajectory, t_min: float):
    """Merged, time-ordered list of ('x1'|'x2', time) for large maxima."""
    t1, _ = large_maxima(traj, "x1", t_min)
    t2, _ = large_maxima(traj, "x2", t_min)
    seq = [("x1", t) for t in t1] + [("x2", t) for t in t2]
    seq.sort(key=lambda item: item[1])
    return seq


def _alternates(seq) -> bool:
    return len(seq) >= 4 and all(a[0] != b[0] for a, b in zip(seq, seq[1:]))


def _relative_phase(seq) -> float:
    """Mean lag of x2 maxima after x1 maxima as a fraction of the x1 period."""
    t1 = np.array([t for c, t in seq if c == "x1"])
    t2 = np.array([t for c, t in seq if c == "x2"])
    if t1.size < 2 or t2.size < 1:
        return float("nan")
    period = np.mean(np.diff(t1))
    lags = []
    for t in t2:
        prev = t1[t1 <= t]
        if prev.size:
            lags.append((t - prev[-1]) / period)
    return float(np.mean(lags)) if lags else float("nan")


def classify_trajectory(
    traj: Trajectory,
    min_duration: float = 1e4,
    window: float = ANALYSIS_WINDOW,
    large: float = LARGE_AMPLITUDE,
    steady: float = STEADY_AMPLITUDE,
) -> AttractorClass:
    """Tag the long-run behaviour of a simulation.

    Only the final ``window`` fraction of the run is analysed (0.2 by
    default, so the first 80% is discarded as transient).  A coordinate is
    large when its peak-to-peak exceeds ``large``; the run is steady when both
    peak-to-peaks are below ``steady``.  Two large coordinates count as a
    double loop only if their large maxima strictly alternate.
    """
    if traj.duration < min_duration:
        raise TooShort(f"trajectory covers {traj.duration:g} < {min_duration:g} time units")
    t_min = traj.window_start(window)
    a1 = traj.peak_to_peak("x1", t_min)
    a2 = traj.peak_to_peak("x2", t_min)
    if a1 < steady and a2 < steady:
        return AttractorClass(STEADY, a1, a2)
    big1, big2 = a1 > large, a2 > large
    if big1 != big2:
        return AttractorClass(SINGLE, a1, a2, detail="x1" if big1 else "x2")
    if big1 and big2:
        seq = peak_sequence(traj, t_min)
        if _alternates(seq):
            return AttractorClass(DOUBLE, a1, a2, phase=_relative_phase(seq))
        return AttractorClass(OTHER, a1, a2, note="large oscillations without strict x1/x2 alternation")
    return AttractorClass(OTHER, a1, a2, note="small-amplitude oscillation")


@dataclass
class ClassificationMap:
    a_values: np.ndarray
    b_values: np.ndarray
    cells: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.cells) != len(self.a_values) * len(self.b_values):
            raise ParameterError("cells must cover the full grid")

    def cell(self, i: int, j: int) -> AttractorClass:
        return self.cells[i * len(self.b_values) + j]

    def row(self, i: int) -> list:
        nb = len(self.b_values)
        return self.cells[i * nb:(i + 1) * nb]

    def row_index(self, a: float) -> int:
        return int(np.argmin(np.abs(np.asarray(self.a_values) - a)))

    def tags(self) -> np.ndarray:
        return np.array([c.tag for c in self.cells], dtype=object).reshape(len(self.a_values), len(self.b_values))

    def counts(self) -> dict:
        out = {t: 0 for t in TAGS}
        for c in self.cells:
            out[c.tag] += 1
        out["failed"] = sum(1 for c in self.cells if c.failed)
        return out

    def rows(self):
        for i, a in enumerate(self.a_values):
            for j, b in enumerate(self.b_values):
                c = self.cell(i, j)
                yield (a, b, c.tag, c.detail, c.amp_x1, c.amp_x2, c.failed)

    def to_csv(self, path, comments=()):
        from .io import write_csv

        write_csv(path, ["a", "b", "tag", "detail", "amp_x1", "amp_x2", "failed"], self.rows(), comments)

    def summary(self) -> dict:
        return {
            "grid": [len(self.a_values), len(self.b_values)],
            "a_range": [float(self.a_values[0]), float(self.a_values[-1])],
            "b_range": [float(self.b_values[0]), float(self.b_values[-1])],
            "counts": self.counts(),
            "metadata": self.metadata,
        }


def simulate_cell(a, b, base: SystemParams = TABLE1, opts: SolverOptions | None = None,
                  perturbation=DEFAULT_PERTURBATION) -> AttractorClass:
    """Simulate one (a, b) cell from the perturbed symmetric equilibrium and classify it."""
    opts = opts or SolverOptions(t_end=1e4)
    p = base.with_(a=a, b=b)
    s0 = symmetric_equilibrium(p) + np.asarray(perturbation, dtype=float)
    try:
        try:
            traj = integrate(s0, p, opts)
        except StepSizeUnderflow:
            traj = integrate(s0, p, opts.with_(method="implicit"))
        return classify_trajectory(traj, min_duration=opts.t_end)
    except NumericsError as exc:
        return AttractorClass(OTHER, float("nan"), float("nan"), failed=True, note=str(exc))


def default_threads() -> int:
    env = os.environ.get("LATCHVDP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ParameterError(f"LATCHVDP_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def sweep(
    a_range=(-1.7, -1.0),
    b_range=(0.0, 3.0),
    shape=(71, 121),
    opts: SolverOptions | None = None,
    base: SystemParams = TABLE1,
    perturbation=DEFAULT_PERTURBATION,
    threads: int | None = None,
    a_values=None,
    b_values=None,
) -> ClassificationMap:
    """Classify every cell of a rectangular (a, b) grid.

    Cells are independent; they run on a thread pool (the compiled kernel
    releases the GIL) and results are collected in grid order, so the map is
    identical to a serial run.
    """
    if a_values is None:
        na, nb = shape
        if na < 2 or nb < 2:
            raise ParameterError("grid dimensions must be >= 2")
        if not (a_range[1] > a_range[0] and b_range[1] > b_range[0]):
            raise ParameterError("parameter ranges must be non-degenerate")
        a_values = np.linspace(a_range[0], a_range[1], na)
        b_values = np.linspace(b_range[0], b_range[1], nb)
    a_values = np.asarray(a_values, dtype=float)
    b_values = np.asarray(b_values, dtype=float)
    opts = opts or SolverOptions(t_end=1e4)
    jobs = [(a, b) for a in a_values for b in b_values]
    threads = threads or default_threads()

    def run(ab):
        return simulate_cell(ab[0], ab[1], base, opts, perturbation)

    if threads == 1:
        cells = [run(ab) for ab in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(run, jobs))
    meta = {
        "t_end": opts.t_end,
        "rel_tol": opts.rel_tol,
        "abs_tol": opts.abs_tol,
        "perturbation": list(map(float, perturbation)),
        "analysis_window": ANALYSIS_WINDOW,
        "large_amplitude": LARGE_AMPLITUDE,
        "steady_amplitude": STEADY_AMPLITUDE,
        "base_params": base.as_dict(),
    }
    return ClassificationMap(a_values, b_values, cells, meta)


def attractor_to_dict(c: AttractorClass) -> dict:
    return asdict(c)
