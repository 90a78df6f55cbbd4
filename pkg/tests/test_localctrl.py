import json
import math

import numpy as np
import pytest

from modegraph import (
    ConfigurationError,
    DeviceConfig,
    ParticleSpec,
    angular_gap_controllable,
    grid_sweep,
    is_locally_controllable,
    sample_sweep,
    velocity_fan,
    wilson_interval,
)
from modegraph.localctrl import _cone_contains, sweep_to_csv, sweep_to_svg

A14 = np.array([1.0, 4.0])


# ---------------------------------------------------------------- fan

def test_fan_zero_at_center():
    fan = velocity_fan(np.array([0.5, 0.5]), A14, 4)
    assert np.array_equal(fan, np.zeros((4, 2)))


def test_fan_on_diagonal_is_collinear():
    fan = velocity_fan(np.array([0.3, 0.3]), np.array([1.0, 2.5]), 5)
    for row in fan:
        assert abs(row[0] * 2.5 - row[1] * 1.0) <= 1e-12


def test_fan_direct_evaluation():
    fan = velocity_fan(np.array([0.25, 0.125]), np.array([1.0, 1.0]), 2)
    assert fan[0] == pytest.approx([1.0, math.sin(math.pi / 4)], abs=1e-15)
    assert fan[1] == pytest.approx([0.0, 2.0], abs=1e-15)


# ---------------------------------------------------------------- cone feasibility

def test_cone_membership_basics():
    assert _cone_contains([[1.0, 0.0], [0.0, 1.0]], [2.0, 3.0])
    assert not _cone_contains([[1.0, 0.0], [0.0, 1.0]], [-1.0, 0.0])
    assert _cone_contains([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], [-1.0, -0.5])
    assert not _cone_contains([], [1.0])
    assert _cone_contains([[1.0, 2.0, 3.0]], [0.5, 1.0, 1.5])


# ---------------------------------------------------------------- the test itself

def test_too_few_modes_is_never_controllable():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(0, 1, 2)
        assert not is_locally_controllable(x, A14, 2)
    x3 = rng.uniform(0, 1, 3)
    assert not is_locally_controllable(x3, np.array([1.0, 2.0, 3.0]), 3)


def test_symmetry_lines_never_controllable():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = rng.uniform(0, 1)
        n = int(rng.integers(3, 9))
        assert not is_locally_controllable(np.array([a, a]), A14, n)
        assert not is_locally_controllable(np.array([0.5, a]), A14, n)
        assert not is_locally_controllable(np.array([a, 0.5]), A14, n)


def test_agrees_with_angular_oracle_on_pinned_states():
    # (0.1, 0.3) at N=5: modes 1 and 4 point one way, 2 and 3 the other, and
    # mode 5 vanishes (both 5x hit half-cells); the 211-degree gap says no
    x = np.array([0.1, 0.3])
    got = is_locally_controllable(x, A14, 5)
    assert got == angular_gap_controllable(x, A14, 5)
    assert not got  # frozen from the angular-gap oracle
    x2 = np.array([0.2, 0.4])
    got2 = is_locally_controllable(x2, A14, 5)
    assert got2 == angular_gap_controllable(x2, A14, 5)
    assert got2  # frozen from the angular-gap oracle


def test_oracle_equivalence_random():
    rng = np.random.default_rng(11)
    for _ in range(2000):
        x = rng.uniform(0, 1, 2)
        A = rng.uniform(0.2, 5.0, 2)
        N = int(rng.integers(1, 9))
        assert is_locally_controllable(x, A, N) == angular_gap_controllable(x, A, N)


def test_scale_invariance():
    rng = np.random.default_rng(12)
    for _ in range(50):
        x = rng.uniform(0, 1, 2)
        A = rng.uniform(0.2, 5.0, 2)
        N = int(rng.integers(2, 8))
        base = is_locally_controllable(x, A, N)
        for c in (1e-3, 7.0, 1e4):
            assert is_locally_controllable(x, c * A, N) == base


def test_reflection_invariance():
    rng = np.random.default_rng(13)
    for _ in range(50):
        x = rng.uniform(0, 1, 2)
        N = int(rng.integers(2, 8))
        base = is_locally_controllable(x, A14, N)
        assert is_locally_controllable(np.array([1 - x[0], x[1]]), A14, N) == base
        assert is_locally_controllable(np.array([x[0], 1 - x[1]]), A14, N) == base


def test_monotone_in_mode_count():
    rng = np.random.default_rng(14)
    for _ in range(30):
        x = rng.uniform(0, 1, 2)
        flags = [is_locally_controllable(x, A14, N) for N in range(2, 9)]
        for a, b in zip(flags, flags[1:]):
            assert b or not a  # once true, stays true


# ---------------------------------------------------------------- wilson

def test_wilson_pinned_cases():
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and hi > 0.0
    lo, hi = wilson_interval(50, 50)
    assert hi == 1.0 and lo < 1.0
    # 50/100 at z = 1.96: hand evaluation gives center 0.5, half-width
    # 1.96*sqrt(0.0025 + 0.00009604)/1.038416 = 0.0961702...
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038298, abs=1e-6)
    assert hi == pytest.approx(0.5961702, abs=1e-6)


def test_wilson_domain_errors():
    with pytest.raises(ValueError):
        wilson_interval(1, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 3)


# ---------------------------------------------------------------- sweeps

def test_grid_sweep_counts_and_trivial_zero():
    cfg = DeviceConfig()
    r = grid_sweep(cfg, 2, 100.0)  # 7x7 grid
    assert r.total == 49
    assert r.controllable == 0 and r.percentage == 0.0


def test_grid_sweep_spacing_validation():
    cfg = DeviceConfig()
    with pytest.raises(ConfigurationError):
        grid_sweep(cfg, 5, 800.0)
    with pytest.raises(ConfigurationError):
        grid_sweep(cfg, 5, 3.0)  # 800/3 is not an integer


def test_grid_sweep_flag_order_x1_fastest():
    cfg = DeviceConfig()
    r = grid_sweep(cfg, 3, 200.0)  # 3x3 interior grid
    assert r.total == 9
    # first three states share x2 = 1/4 while x1 sweeps
    assert np.allclose(r.states[:3, 1], 0.25)
    assert np.allclose(r.states[:3, 0], [0.25, 0.5, 0.75])


def test_grid_sweep_matches_pointwise_test():
    cfg = DeviceConfig()
    r = grid_sweep(cfg, 4, 160.0)  # 4x4 grid
    from modegraph.device import coefficients

    A = coefficients(cfg)
    for state, flag in zip(r.states, r.flags):
        assert is_locally_controllable(state, A, 4) == bool(flag)


def test_sample_sweep_reproducible_and_serializable():
    a = sample_sweep(2, 4, 200, seed=123)
    b = sample_sweep(2, 4, 200, seed=123)
    assert json.dumps(a.summary_dict(), sort_keys=True) == json.dumps(
        b.summary_dict(), sort_keys=True
    )
    assert np.array_equal(a.flags, b.flags)
    c = sample_sweep(2, 4, 200, seed=124)
    assert not np.array_equal(a.states, c.states)


def test_sample_sweep_dimension_bound():
    for p in (2, 3, 4):
        for N in range(1, p + 1):
            r = sample_sweep(p, N, 150, seed=7)
            assert r.controllable == 0


def test_sample_sweep_wilson_brackets_percentage():
    r = sample_sweep(2, 5, 400, seed=5)
    assert r.wilson_lo <= r.percentage / 100.0 <= r.wilson_hi


def test_threaded_sweep_matches_serial():
    r1 = sample_sweep(2, 5, 400, seed=9, threads=1)
    r2 = sample_sweep(2, 5, 400, seed=9, threads=2)
    assert np.array_equal(r1.flags, r2.flags)
    assert r1.summary_dict() == r2.summary_dict()


# ---------------------------------------------------------------- exports

def test_csv_export_roundtrip():
    r = sample_sweep(2, 5, 50, seed=2)
    text = sweep_to_csv(r)
    lines = text.strip().split("\n")
    assert lines[0] == "x1,x2,controllable"
    assert len(lines) == 51
    x1 = float(lines[1].split(",")[0])
    assert x1 == r.states[0, 0]  # repr round-trip is lossless


def test_svg_export_has_one_rect_per_state():
    cfg = DeviceConfig()
    r = grid_sweep(cfg, 5, 100.0)
    svg = sweep_to_svg(r)
    assert svg.count("<rect") == r.total + 1  # background plus cells
    assert "#2ca02c" in svg and "#d62728" in svg
