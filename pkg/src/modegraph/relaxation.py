"""Mode mixing: the convexified system, fast-switching synthesis, and the
empirical check that switched trajectories approximate mixed ones.

Switched trajectories are exact concatenations of closed-form single-mode
flows, so the measured approximation error isolates the switching period
from any integrator error.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, as_state, flow_exact, rk4
from .localctrl import velocity_fan

SIMPLEX_TOL = 1e-12
WEIGHT_SKIP = 1e-9


def as_mode_mix(w) -> np.ndarray:
    """Validated simplex weights: nonnegative, summing to one."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("mixture weights must be a 1-D vector")
    if np.any(w < 0.0):
        raise ValueError("mixture weights must be nonnegative")
    if abs(float(np.sum(w)) - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"mixture weights must sum to 1, got {float(np.sum(w))!r}")
    return w


def mixed_velocity(x, w, A) -> np.ndarray:
    """Convex combination sum_u w_u f_u(x) of the single-mode velocities."""
    w = as_mode_mix(w)
    fan = velocity_fan(x, A, len(w))
    return w @ fan


@dataclass(frozen=True)
class MixSignal:
    """Piecewise-constant simplex weights: value row i holds on [times[i], times[i+1])."""

    times: np.ndarray   # breakpoints, length m + 1, strictly increasing
    values: np.ndarray  # (m, N) simplex rows

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.size != values.shape[0] + 1:
            raise ValueError("need exactly one more breakpoint than weight rows")
        if np.any(np.diff(times) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        for row in values:
            as_mode_mix(row)

    @staticmethod
    def constant(w, T: float) -> "MixSignal":
        return MixSignal(times=np.array([0.0, float(T)]), values=np.array([w], dtype=float))

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def mode_count(self) -> int:
        return self.values.shape[1]

    def value_at(self, t: float) -> np.ndarray:
        i = bisect.bisect_right(self.times.tolist(), t) - 1
        i = min(max(i, 0), self.values.shape[0] - 1)
        return self.values[i]


def simulate_mixed(x0, signal: MixSignal, A, dt: float, T: float | None = None) -> Trajectory:
    """RK4 integration of the time-varying convex combination of mode fields."""
    A = np.asarray(A, dtype=float)
    if T is None:
        T = signal.end

    def field(t, y):
        y = np.clip(y, 0.0, 1.0)
        return mixed_velocity(y, signal.value_at(t), A)

    return rk4(field, x0, dt, T)


@dataclass(frozen=True)
class SwitchSchedule:
    """Single-mode dwell segments realizing a mixture by fast switching."""

    segments: tuple[tuple[int, float], ...]
    period: float

    @property
    def total_duration(self) -> float:
        return sum(d for _, d in self.segments)


def synthesize_switching(signal: MixSignal, period: float) -> SwitchSchedule:
    """Within each period, play the modes in ascending order for times
    proportional to the current weights (weights below 1e-9 are skipped)."""
    if period <= 0:
        raise ValueError("switching period must be positive")
    segments: list[tuple[int, float]] = []
    t = 0.0
    end = signal.end
    while t < end - 1e-15:
        span = min(period, end - t)
        w = signal.value_at(t)
        for u, wu in enumerate(w, start=1):
            if wu > WEIGHT_SKIP:
                segments.append((u, wu * span))
        t += span
    return SwitchSchedule(segments=tuple(segments), period=period)


def switched_states(x0, schedule: SwitchSchedule, A, sample_times) -> np.ndarray:
    """Evaluate the switched trajectory exactly at the requested times.

    Piecewise closed-form flows chained segment by segment; sample times
    must be nondecreasing and within the schedule's total duration.
    """
    A = np.asarray(A, dtype=float)
    x = as_state(x0).copy()
    out = np.empty((len(sample_times), x.size))
    seg_iter = iter(schedule.segments)
    seg_mode, seg_left = next(seg_iter, (None, 0.0))
    t_now = 0.0
    last = -np.inf
    for i, t in enumerate(sample_times):
        if t < last:
            raise ValueError("sample times must be nondecreasing")
        last = t
        remaining = t - t_now
        while remaining > 1e-15:
            if seg_mode is None:
                break
            step = min(remaining, seg_left)
            if step > 0.0:
                x = flow_exact(x, seg_mode, A, step)
                seg_left -= step
                remaining -= step
                t_now += step
            if seg_left <= 1e-15:
                seg_mode, seg_left = next(seg_iter, (None, 0.0))
        out[i] = x
    return out


def approximation_error(x0, signal: MixSignal, A, period: float, dt: float,
                        T: float | None = None) -> float:
    """Sup-norm distance between the mixed trajectory and its fast-switching
    realization, sampled on the integrator grid up to T."""
    if T is None:
        T = signal.end
    mixed = simulate_mixed(x0, signal, A, dt, T)
    schedule = synthesize_switching(signal, period)
    switched = switched_states(x0, schedule, A, mixed.times)
    return float(np.max(np.abs(mixed.states - switched)))
