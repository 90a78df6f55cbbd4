"""Local controllability: positive-spanning tests, grid and Monte-Carlo sweeps.

A state is locally controllable when its velocity fan lets it move
instantaneously in every direction, i.e. the fan positively spans the state
space. The decision procedure is 2n small phase-1 simplex feasibility
problems (each signed basis direction must lie in the conic hull of the
fan); for two particles an independent angular-gap oracle is kept alongside
for cross-checking. State tests are pure and independent, so sweeps can run
data-parallel.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .device import ConfigurationError, DeviceConfig, coefficients
from .dynamics import as_state, mode_velocity

ZERO_NORM = 1e-12
FEAS_TOL = 1e-9


def velocity_fan(x, A, N: int) -> np.ndarray:
    """Stacked single-mode velocities f_u(x) for u = 1..N, shape (N, n)."""
    if N < 1:
        raise ValueError("mode count must be at least 1")
    return np.stack([mode_velocity(x, u, A) for u in range(1, N + 1)])


def _cone_contains(vectors: list[list[float]], target: list[float], tol: float = FEAS_TOL) -> bool:
    """Phase-1 simplex: is target a nonnegative combination of the vectors?

    Dense tableau with Bland's rule, so termination is guaranteed; feasible
    iff the artificial objective reaches zero (within tol).
    """
    m = len(target)
    nv = len(vectors)
    ncols = nv + m
    rows = []
    rhs = []
    for i in range(m):
        sgn = -1.0 if target[i] < 0.0 else 1.0
        row = [sgn * v[i] for v in vectors] + [0.0] * m
        row[nv + i] = 1.0
        rows.append(row)
        rhs.append(sgn * target[i])
    basis = [nv + i for i in range(m)]
    # reduced costs for min(sum of artificials) with the artificial basis:
    # c_j minus the column sum, where c_j is 1 on artificials and 0 elsewhere
    cost = [0.0] * nv + [1.0] * m
    for i in range(m):
        ri = rows[i]
        for j in range(ncols):
            cost[j] -= ri[j]
    obj = sum(rhs)

    for _ in range(1000):
        enter = -1
        for j in range(ncols):
            if cost[j] < -tol:
                enter = j
                break
        if enter < 0:
            break
        leave = -1
        best = math.inf
        for i in range(m):
            a = rows[i][enter]
            if a > 1e-12:
                ratio = max(rhs[i], 0.0) / a
                if ratio < best - 1e-15 or (
                    abs(ratio - best) <= 1e-15 and (leave < 0 or basis[i] < basis[leave])
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            # phase-1 is bounded below by zero, so an apparently improving
            # column with no positive entries is accumulated round-off; stop
            # and judge feasibility from the current objective value
            break
        piv = rows[leave][enter]
        prow = [v / piv for v in rows[leave]]
        rows[leave] = prow
        rhs[leave] /= piv
        for i in range(m):
            if i == leave:
                continue
            f = rows[i][enter]
            if f != 0.0:
                ri = rows[i]
                rows[i] = [a - f * b for a, b in zip(ri, prow)]
                rhs[i] -= f * rhs[leave]
        f = cost[enter]
        if f != 0.0:
            cost = [a - f * b for a, b in zip(cost, prow)]
            obj += f * rhs[leave]
        basis[leave] = enter
    else:
        raise ArithmeticError("phase-1 simplex failed to terminate")
    return obj <= tol


def positively_spans(fan: np.ndarray, tol: float = FEAS_TOL) -> bool:
    """True iff the conic hull of the fan rows is the whole space.

    Near-zero rows (numerical dust from sin at cell boundaries) are
    discarded, the rest are normalized, and each of the 2n signed basis
    directions is tested for cone membership.
    """
    fan = np.asarray(fan, dtype=float)
    n = fan.shape[1]
    norms = np.linalg.norm(fan, axis=1)
    keep = fan[norms > ZERO_NORM] / norms[norms > ZERO_NORM, None]
    vectors = keep.tolist()
    for i in range(n):
        for sign in (1.0, -1.0):
            target = [0.0] * n
            target[i] = sign
            if not _cone_contains(vectors, target, tol):
                return False
    return True


def is_locally_controllable(x, A, N: int, tol: float = FEAS_TOL) -> bool:
    """Eq.-style interior test: the state's velocity fan positively spans."""
    return positively_spans(velocity_fan(x, A, N), tol)


def angular_gap_controllable(x, A, N: int, tol: float = FEAS_TOL) -> bool:
    """Two-particle oracle: positive spanning iff every cyclic angular gap
    between fan directions is strictly below pi."""
    x = as_state(x)
    if x.size != 2:
        raise ValueError("the angular-gap oracle is defined for two particles")
    fan = velocity_fan(x, A, N)
    norms = np.linalg.norm(fan, axis=1)
    vecs = fan[norms > ZERO_NORM]
    if vecs.shape[0] < 2:
        return False
    angles = np.sort(np.arctan2(vecs[:, 1], vecs[:, 0]))
    gaps = np.diff(angles)
    wrap = 2.0 * np.pi - (angles[-1] - angles[0])
    return float(max(np.max(gaps, initial=0.0), wrap)) < np.pi - tol


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    phat = successes / trials
    z2n = z * z / trials
    center = (phat + z2n / 2.0) / (1.0 + z2n)
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials)) / (1.0 + z2n)
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class SweepResult:
    """Outcome of a controllability sweep over grid or sampled states."""

    total: int
    controllable: int
    percentage: float
    wilson_lo: float
    wilson_hi: float
    z: float
    seed: int | None
    flags: np.ndarray | None = None
    states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def summary_dict(self) -> dict:
        return {
            "total": self.total,
            "controllable": self.controllable,
            "percentage": self.percentage,
            "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "z": self.z,
            "seed": self.seed,
            "params": self.meta,
        }


def _eval_chunk(args) -> np.ndarray:
    states, A, N = args
    return np.fromiter(
        (is_locally_controllable(s, A, N) for s in states), dtype=bool, count=len(states)
    )


def _evaluate(states: np.ndarray, A: np.ndarray, N: int, threads: int) -> np.ndarray:
    if threads <= 1 or len(states) < 256:
        return _eval_chunk((states, A, N))
    chunks = np.array_split(states, threads * 4)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(_eval_chunk, [(c, A, N) for c in chunks]))
    return np.concatenate(parts)


def _finish(flags: np.ndarray, states: np.ndarray, seed, meta: dict, z: float = 1.96) -> SweepResult:
    total = int(flags.size)
    good = int(np.count_nonzero(flags))
    lo, hi = wilson_interval(good, total, z)
    return SweepResult(
        total=total,
        controllable=good,
        percentage=100.0 * good / total,
        wilson_lo=lo,
        wilson_hi=hi,
        z=z,
        seed=seed,
        flags=flags,
        states=states,
        meta=meta,
    )


def grid_sweep(cfg: DeviceConfig, N: int, spacing_um: float, threads: int = 1) -> SweepResult:
    """Test every interior state of the uniform grid with the given spacing.

    The grid excludes the walls: H/spacing - 1 points per axis. Flags are
    stored row-major with the first coordinate varying fastest. The summary
    also reports the percentage with symmetry-line states (any x_i = 1/2 or
    x_i = x_j, never controllable) removed from the denominator, since a
    headline number may or may not count them.
    """
    if spacing_um >= cfg.channel_height_um:
        raise ConfigurationError("grid spacing must be smaller than the channel height")
    divisions = cfg.channel_height_um / spacing_um
    if abs(divisions - round(divisions)) > 1e-9:
        raise ConfigurationError("grid spacing must divide the channel height")
    m = int(round(divisions))
    n = cfg.n
    A = coefficients(cfg)

    axis = np.arange(1, m) / m
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    # first coordinate fastest: make x1 the last meshgrid axis before flattening
    states = np.stack([g.reshape(-1) for g in reversed(mesh)], axis=1)

    flags = _evaluate(states, A, N, threads)

    on_sym = np.zeros(len(states), dtype=bool)
    for i in range(n):
        on_sym |= states[:, i] == 0.5
        for j in range(i + 1, n):
            on_sym |= states[:, i] == states[:, j]
    off = ~on_sym
    pct_excl = 100.0 * float(np.count_nonzero(flags[off])) / max(1, int(np.count_nonzero(off)))

    meta = {
        "mode": "grid",
        "modes": N,
        "spacing_um": spacing_um,
        "points_per_axis": m - 1,
        "particles": n,
        "radii_um": [p.radius_um for p in cfg.particles],
        "symmetry_line_states": int(np.count_nonzero(on_sym)),
        "percentage_excluding_symmetry_lines": pct_excl,
    }
    return _finish(flags, states, None, meta)


def sample_sweep(
    p: int,
    N: int,
    samples: int,
    seed: int,
    radius_range_um: tuple[float, float] = (1.0, 2.0),
    grid_divisions: int = 160,
    threads: int = 1,
) -> SweepResult:
    """Monte-Carlo sweep for p particles: radii drawn once per run, states
    drawn uniformly from the interior grid, everything reproducible from the
    seed. Coefficients scale with radius squared (shared contrast, energy,
    channel, and viscosity), and only their ratios matter for the test."""
    if p < 2:
        raise ValueError("sample sweeps need at least two particles")
    if samples < 1:
        raise ValueError("at least one sample is required")
    rng = np.random.default_rng(seed)
    radii = rng.uniform(radius_range_um[0], radius_range_um[1], size=p)
    A = radii**2
    idx = rng.integers(1, grid_divisions, size=(samples, p))
    states = idx / grid_divisions

    flags = _evaluate(states, A, N, threads)
    meta = {
        "mode": "sample",
        "modes": N,
        "particles": p,
        "samples": samples,
        "radius_range_um": list(radius_range_um),
        "radii_um": radii.tolist(),
        "grid_divisions": grid_divisions,
    }
    return _finish(flags, states, seed, meta)


def sweep_to_csv(result: SweepResult) -> str:
    """Per-state rows: coordinates then the 0/1 controllability flag."""
    n = result.states.shape[1]
    lines = [",".join(f"x{i + 1}" for i in range(n)) + ",controllable"]
    for row, flag in zip(result.states, result.flags):
        lines.append(",".join(repr(float(v)) for v in row) + f",{int(flag)}")
    return "\n".join(lines) + "\n"


def sweep_to_svg(result: SweepResult, cell_px: int = 4) -> str:
    """Two-particle grid heat map: one green/red rect per tested state."""
    if result.states.shape[1] != 2:
        raise ValueError("SVG export is only defined for two particles")
    m = result.meta.get("points_per_axis")
    if m is None:
        raise ValueError("SVG export needs a grid sweep result")
    size = m * cell_px
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    flags = result.flags.reshape(m, m)  # [x2 index, x1 index]
    for j in range(m):
        for i in range(m):
            color = "#2ca02c" if flags[j, i] else "#d62728"
            x = i * cell_px
            y = (m - 1 - j) * cell_px  # x2 grows upward
            parts.append(f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
