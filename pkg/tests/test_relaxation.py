import math

import numpy as np
import pytest

from modegraph import (
    MixSignal,
    approximation_error,
    flow_exact,
    mixed_velocity,
    reflect,
    simulate_mixed,
    switched_states,
    synthesize_switching,
    velocity_fan,
)
from modegraph.localctrl import _cone_contains

A14 = np.array([1.0, 4.0])


# ---------------------------------------------------------------- mixing

def test_vertex_weight_recovers_single_mode():
    x = np.array([0.2, 0.35])
    for j in range(3):
        w = np.zeros(3)
        w[j] = 1.0
        fan = velocity_fan(x, A14, 3)
        assert np.array_equal(mixed_velocity(x, w, A14), fan[j])


def test_center_state_is_stationary_for_every_mixture():
    rng = np.random.default_rng(1)
    x = np.array([0.5, 0.5])
    for _ in range(10):
        w = rng.dirichlet(np.ones(4))
        assert np.array_equal(mixed_velocity(x, w, A14), np.zeros(2))


def test_fifty_fifty_is_the_midpoint():
    x = np.array([0.25, 0.125])
    A = np.array([1.0, 1.0])
    fan = velocity_fan(x, A, 2)
    got = mixed_velocity(x, np.array([0.5, 0.5]), A)
    assert np.allclose(got, 0.5 * (fan[0] + fan[1]), atol=1e-15)


def test_invalid_weights_rejected():
    x = np.array([0.2, 0.3])
    with pytest.raises(ValueError):
        mixed_velocity(x, np.array([0.7, 0.7]), A14)
    with pytest.raises(ValueError):
        mixed_velocity(x, np.array([-0.1, 1.1]), A14)


def test_mixed_velocity_lies_in_hull():
    # membership re-solved as a conic problem with the affine trick
    rng = np.random.default_rng(2)
    for _ in range(25):
        x = rng.uniform(0, 1, 2)
        w = rng.dirichlet(np.ones(4))
        v = mixed_velocity(x, w, A14)
        fan = velocity_fan(x, A14, 4)
        lifted = [list(row) + [1.0] for row in fan]
        assert _cone_contains(lifted, list(v) + [1.0], tol=1e-8)


# ---------------------------------------------------------------- simulation

def test_constant_vertex_signal_matches_exact_flow():
    sig = MixSignal.constant([0.0, 1.0], 0.5)
    x0 = np.array([0.15, 0.4])
    traj = simulate_mixed(x0, sig, A14, 1e-4)
    exact = flow_exact(x0, 2, A14, 0.5)
    assert np.max(np.abs(traj.final_state - exact)) <= 1e-6


def test_mixture_rest_point_is_stationary():
    # 50/50 mix of modes 1 and 2 rests where cos(2 pi x) = -1/4,
    # between the mode-1 attractor (1/2) and the mode-2 attractor (1/4)
    x_star = math.acos(-0.25) / (2.0 * math.pi)
    assert 0.25 < x_star < 0.5
    v = mixed_velocity(np.array([x_star]), np.array([0.5, 0.5]), np.array([1.0]))
    assert abs(v[0]) <= 1e-12
    sig = MixSignal.constant([0.5, 0.5], 2.0)
    traj = simulate_mixed(np.array([x_star]), sig, np.array([1.0]), 1e-3)
    assert np.max(np.abs(traj.states - x_star)) <= 1e-6


def test_mixed_trajectories_reflect_symmetrically():
    rng = np.random.default_rng(3)
    for _ in range(5):
        x0 = rng.uniform(0.05, 0.95, 2)
        w = rng.dirichlet(np.ones(3))
        sig = MixSignal.constant(w, 0.5)
        for S in ([0], [1], [0, 1]):
            a = simulate_mixed(reflect(x0, S), sig, A14, 1e-3).final_state
            b = reflect(simulate_mixed(x0, sig, A14, 1e-3).final_state, S)
            assert np.max(np.abs(a - b)) <= 1e-8


def test_piecewise_signal_switches_value():
    sig = MixSignal(times=np.array([0.0, 1.0, 2.0]),
                    values=np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert np.array_equal(sig.value_at(0.5), [1.0, 0.0])
    assert np.array_equal(sig.value_at(1.5), [0.0, 1.0])
    assert np.array_equal(sig.value_at(2.5), [0.0, 1.0])


# ---------------------------------------------------------------- switching

def test_vertex_signal_synthesizes_single_mode():
    sig = MixSignal.constant([0.0, 0.0, 1.0], 1.0)
    sched = synthesize_switching(sig, period=0.1)
    assert all(u == 3 for u, _ in sched.segments)
    assert sched.total_duration == pytest.approx(1.0)


def test_even_split_alternates():
    sig = MixSignal.constant([0.5, 0.5], 0.02)
    sched = synthesize_switching(sig, period=0.01)
    assert sched.segments == ((1, 0.005), (2, 0.005), (1, 0.005), (2, 0.005))


def test_time_share_matches_weights():
    sig = MixSignal.constant([0.3, 0.7], 0.5)
    sched = synthesize_switching(sig, period=0.1)
    per_mode = {1: 0.0, 2: 0.0}
    for u, d in sched.segments:
        per_mode[u] += d
    assert per_mode[1] == pytest.approx(0.15, abs=1e-9)
    assert per_mode[2] == pytest.approx(0.35, abs=1e-9)


def test_switched_states_are_chained_exact_flows():
    sched = synthesize_switching(MixSignal.constant([0.5, 0.5], 0.2), period=0.2)
    x0 = np.array([0.3, 0.1])
    out = switched_states(x0, sched, A14, [0.2])
    direct = flow_exact(flow_exact(x0, 1, A14, 0.1), 2, A14, 0.1)
    assert np.array_equal(out[0], direct)


# ---------------------------------------------------------------- approximation

def test_vertex_signal_error_is_integration_noise():
    sig = MixSignal.constant([1.0, 0.0], 0.5)
    err = approximation_error(np.array([0.2, 0.3]), sig, A14, period=0.01, dt=1e-3)
    assert err <= 1e-6


def test_error_shrinks_under_period_halving():
    rng = np.random.default_rng(12)
    for _ in range(10):
        x0 = rng.uniform(0.05, 0.95, 2)
        w = rng.dirichlet(np.ones(3))
        sig = MixSignal.constant(w, 0.5)
        errs = [
            approximation_error(x0, sig, A14, 0.02 / 2**h, dt=0.02 / 2**h / 10.0)
            for h in range(4)
        ]
        for a, b in zip(errs, errs[1:]):
            assert b <= 0.7 * a
        assert errs[-1] < 1e-2
