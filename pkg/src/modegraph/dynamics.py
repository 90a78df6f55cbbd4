"""Scaled 1-D standing-wave particle dynamics: exact flow maps and integrators.

Every function here is a pure function of its arguments, so concurrent use
is safe. States live in the closed unit cube, one coordinate per particle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

Segment = tuple[int, float]


class InvalidModeError(ValueError):
    """Raised when a mode index is not a positive integer."""


def check_mode(u: int) -> int:
    if u != int(u) or u < 1:
        raise InvalidModeError(f"mode index must be a positive integer, got {u}")
    return int(u)


def as_state(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("state must be a 1-D vector")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"state coordinates must lie in [0, 1], got {x!r}")
    return x


def mode_velocity(x, u: int, A) -> np.ndarray:
    """Velocity A_i * u * sin(2 pi u x_i) of every particle under mode u.

    Half-cell points, where sin vanishes analytically, return an exact zero
    so that equilibria are drift-free fixed points.
    """
    u = check_mode(u)
    x = as_state(x)
    A = np.asarray(A, dtype=float)
    y = u * x
    s = y - np.floor(y)
    v = A * u * np.sin(2.0 * np.pi * u * x)
    return np.where((s == 0.0) | (s == 0.5), 0.0, v)


def flow_exact(x0, u: int, A, t):
    """Closed-form flow of a single mode for time(s) t >= 0.

    Per coordinate, with s the fractional part of u*x confined to its unit
    cell, the separable solution is tan(pi s(t)) = tan(pi s0) * exp(2 pi A
    u^2 t). The update is evaluated in log space so saturation near the
    mid-cell attractor cannot overflow, and coordinates starting exactly on
    a half-cell point (sin = 0) are returned unchanged.

    t may be a scalar (returns shape (n,)) or a 1-D array of m times
    (returns shape (m, n)).
    """
    u = check_mode(u)
    x0 = as_state(x0)
    A = np.asarray(A, dtype=float)
    t_in = np.asarray(t, dtype=float)
    if np.any(t_in < 0.0):
        raise ValueError("flow time must be non-negative")
    ts = np.atleast_1d(t_in)

    y = u * x0
    cell = np.floor(y)
    s = y - cell
    fixed = (s == 0.0) | (s == 0.5)
    s_safe = np.where(fixed, 0.25, s)
    log_tan = np.log(np.abs(np.tan(np.pi * s_safe)))
    rising = s < 0.5

    shift = log_tan[None, :] + (2.0 * np.pi * A * u * u)[None, :] * ts[:, None]
    with np.errstate(over="ignore"):
        # arctan(exp(shift)) without overflow; lands in (0, 1/2]
        half = np.arctan2(1.0, np.exp(-shift)) / np.pi
    s_t = np.where(rising[None, :], half, 1.0 - half)
    out = np.where(fixed[None, :], x0[None, :], (cell[None, :] + s_t) / u)
    return out[0] if t_in.ndim == 0 else out


def rescale_solution(xi0, u: int, A_base, q, t: float) -> np.ndarray:
    """Mode-u flow expressed through the mode-1 flow.

    Returns (p + X1(q_i * t, r_i)) / u where p and r are the integer and
    fractional parts of u * xi0 and X1 is the mode-1 flow with the base
    coefficients. With mode-independent coefficients q_i = u^2.
    """
    u = check_mode(u)
    xi0 = as_state(xi0)
    A_base = np.asarray(A_base, dtype=float)
    q = np.asarray(q, dtype=float)
    y = u * xi0
    p = np.floor(y)
    r = y - p
    base = np.empty_like(r)
    for i in range(r.size):
        base[i] = flow_exact(r[i : i + 1], 1, A_base[i : i + 1], q[i] * t)[0]
    return (p + base) / u


def reflect(x, axes: Iterable[int]) -> np.ndarray:
    """Mirror the selected coordinates (0-based) through x_i = 1/2."""
    x = as_state(x).copy()
    for i in axes:
        if not 0 <= i < x.size:
            raise ValueError(f"axis {i} out of range for {x.size} particles")
        x[i] = 1.0 - x[i]
    return x


@dataclass(frozen=True)
class Trajectory:
    """Discretized solution: strictly increasing times and matching states."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if self.times.shape[0] != self.states.shape[0]:
            raise ValueError("times and states must have equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def rk4(field: Callable[[float, np.ndarray], np.ndarray], x0, dt: float, T: float,
        t0: float = 0.0) -> Trajectory:
    """Classical fixed-step 4th-order integration with states clamped to [0,1]^n.

    Samples at every step; a shorter final step covers any remainder of T.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("horizon must be non-negative")
    x = as_state(x0).copy()
    times = [t0]
    states = [x.copy()]
    t = 0.0
    while t < T - 1e-15:
        h = min(dt, T - t)
        k1 = field(t0 + t, x)
        k2 = field(t0 + t + h / 2.0, x + (h / 2.0) * k1)
        k3 = field(t0 + t + h / 2.0, x + (h / 2.0) * k2)
        k4 = field(t0 + t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        np.clip(x, 0.0, 1.0, out=x)
        t += h
        times.append(t0 + t)
        states.append(x.copy())
    return Trajectory(np.asarray(times), np.asarray(states))


def integrate(x0, schedule, A, dt: float, T: float | None = None) -> Trajectory:
    """Integrate a piecewise-constant mode schedule numerically.

    schedule is either a single mode index (then T is the horizon) or a
    sequence of (mode, duration) pairs played back to back. This is the
    validation oracle for flow_exact, not the primary propagator.
    """
    A = np.asarray(A, dtype=float)
    if isinstance(schedule, (int, np.integer)):
        if T is None:
            raise ValueError("T is required with a constant-mode schedule")
        segments: list[Segment] = [(check_mode(schedule), float(T))]
    else:
        segments = [(check_mode(u), float(d)) for u, d in schedule]
        if any(d < 0 for _, d in segments):
            raise ValueError("segment durations must be non-negative")

    x = as_state(x0).copy()
    times = [0.0]
    states = [x.copy()]
    t_off = 0.0
    for u, dur in segments:
        if dur == 0.0:
            continue
        field = lambda _t, y, _u=u: mode_velocity(np.clip(y, 0.0, 1.0), _u, A)
        piece = rk4(field, x, dt, dur, t0=t_off)
        times.extend(piece.times[1:])
        states.extend(piece.states[1:])
        x = piece.final_state.copy()
        t_off += dur
    return Trajectory(np.asarray(times), np.asarray(states))
