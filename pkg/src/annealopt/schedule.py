"""Fourier-parameterized annealing schedules and their device-valid grids.

A schedule is the linear ramp ``t / T`` plus a truncated sine series whose
coefficient boxes shrink as 1/m, which damps high-frequency wiggle. Before a
schedule can drive the backend it is sampled on a finite grid, clipped into
[0, 1], rounded to the amplitude resolution, and pinned to start at (0, 0)
and end at (T, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_GRID_POINTS = 12
DEFAULT_RESOLUTION = 1e-4


@dataclass(frozen=True, eq=False)
class DesignVector:
    """Optimization variables: annealing time T (microseconds) and Fourier coefficients."""

    T: float
    thetas: np.ndarray

    @property
    def M(self) -> int:
        return len(self.thetas)

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.T], np.asarray(self.thetas, dtype=float)))


@dataclass(frozen=True)
class ScheduleBounds:
    """Search box: T in [t_min, t_max] microseconds, theta_m in [-alpha/m, alpha/m]."""

    M: int
    alpha: float = 1.0
    t_min: float = 1.0
    t_max: float = 2000.0

    def __post_init__(self) -> None:
        if self.M < 0:
            raise ValueError(f"M must be nonnegative, got {self.M}")
        if not (0 < self.t_min <= self.t_max):
            raise ValueError(f"need 0 < t_min <= t_max, got [{self.t_min}, {self.t_max}]")
        if self.alpha <= 0 and self.M > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def n_dims(self) -> int:
        return self.M + 1

    def theta_box(self, m: int) -> tuple[float, float]:
        """Closed box for coefficient m (1-based harmonic index)."""
        half = self.alpha / m
        return -half, half

    def contains(self, dv: DesignVector) -> bool:
        eps = 1e-12
        if not (self.t_min - eps <= dv.T <= self.t_max + eps):
            return False
        for m, th in enumerate(dv.thetas, start=1):
            lo, hi = self.theta_box(m)
            if not (lo - eps <= th <= hi + eps):
                return False
        return True

    def to_unit(self, dv: DesignVector) -> np.ndarray:
        """Map to the unit cube; T uses log coordinates to match its sampling geometry."""
        u = np.empty(self.n_dims)
        log_span = math.log(self.t_max) - math.log(self.t_min)
        u[0] = 0.0 if log_span == 0 else (math.log(dv.T) - math.log(self.t_min)) / log_span
        for m, th in enumerate(dv.thetas, start=1):
            lo, hi = self.theta_box(m)
            u[m] = 0.0 if hi == lo else (th - lo) / (hi - lo)
        return np.clip(u, 0.0, 1.0)

    def from_unit(self, u: np.ndarray) -> DesignVector:
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.t_max == self.t_min:
            t = self.t_min
        else:
            t = math.exp(math.log(self.t_min) + u[0] * (math.log(self.t_max) - math.log(self.t_min)))
            t = min(max(t, self.t_min), self.t_max)
        thetas = np.empty(self.M)
        for m in range(1, self.M + 1):
            lo, hi = self.theta_box(m)
            thetas[m - 1] = lo + u[m] * (hi - lo)
        return DesignVector(T=float(t), thetas=thetas)


@dataclass(frozen=True, eq=False)
class ScheduleGrid:
    """Discretized schedule: strictly increasing times with fractions in [0, 1]."""

    times: np.ndarray
    values: np.ndarray

    @property
    def count(self) -> int:
        return len(self.times)

    @property
    def points(self) -> list[tuple[float, float]]:
        return [(float(t), float(s)) for t, s in zip(self.times, self.values)]

    @property
    def total_time(self) -> float:
        return float(self.times[-1])

    def to_json_list(self) -> list[list[float]]:
        return [[float(t), float(s)] for t, s in zip(self.times, self.values)]


def default_bounds(
    M: int = 8, alpha: float = 1.0, t_min: float = 1.0, t_max: float = 2000.0
) -> ScheduleBounds:
    """Device-style defaults: T in [1, 2000] microseconds, eight harmonics, alpha = 1."""
    return ScheduleBounds(M=M, alpha=alpha, t_min=t_min, t_max=t_max)


def eval_schedule(dv: DesignVector, t: float) -> float:
    """Un-clipped schedule value ``t/T + sum_m theta_m sin(m pi t / T)``."""
    if not (0.0 <= t <= dv.T):
        raise ValueError(f"t={t} outside [0, {dv.T}]")
    s = t / dv.T
    for m, th in enumerate(dv.thetas, start=1):
        s += th * math.sin(m * math.pi * t / dv.T)
    return float(s)


def _eval_many(dv: DesignVector, times: np.ndarray) -> np.ndarray:
    frac = times / dv.T
    s = frac.copy()
    for m, th in enumerate(dv.thetas, start=1):
        s += th * np.sin(m * np.pi * frac)
    return s


def render_grid(
    dv: DesignVector,
    p: int = DEFAULT_GRID_POINTS,
    resolution: float = DEFAULT_RESOLUTION,
    monotone: bool = False,
) -> ScheduleGrid:
    """Sample, clip, round, and pin the schedule onto a p-point control grid.

    ``monotone`` applies a cumulative-max projection after clipping. It is off
    by default; plain clipping is all the post-processing the pipeline
    requires.
    """
    if p < 2:
        raise ValueError(f"grid needs at least 2 points, got {p}")
    times = np.linspace(0.0, dv.T, p)
    values = np.clip(_eval_many(dv, times), 0.0, 1.0)
    if monotone:
        values = np.maximum.accumulate(values)
    if resolution > 0:
        values = np.round(values / resolution) * resolution
        values = np.clip(values, 0.0, 1.0)
    values[0] = 0.0
    values[-1] = 1.0
    return ScheduleGrid(times=times, values=values)


def sample_random(
    bounds: ScheduleBounds,
    rng: np.random.Generator,
    fixed_t: float | None = None,
) -> DesignVector:
    """Draw T log-uniformly and each coefficient uniformly from its box."""
    if fixed_t is not None:
        t = float(fixed_t)
    elif bounds.t_max == bounds.t_min:
        t = bounds.t_min
        rng.uniform()  # keep the draw count stable across branches
    else:
        t = float(np.exp(rng.uniform(np.log(bounds.t_min), np.log(bounds.t_max))))
        t = min(max(t, bounds.t_min), bounds.t_max)
    thetas = np.empty(bounds.M)
    for m in range(1, bounds.M + 1):
        lo, hi = bounds.theta_box(m)
        thetas[m - 1] = rng.uniform(lo, hi)
    return DesignVector(T=t, thetas=thetas)
