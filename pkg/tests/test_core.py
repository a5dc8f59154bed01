from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssepwalk.core import (
    ArrowField,
    Configuration,
    Trajectory,
    Window,
    evolve,
    from_sites,
    hole_complement,
    make_trajectory,
    ones,
    sample_arrows,
    sample_config,
    stream_seed,
    swap,
    trace_many,
    trace_path,
    zeros,
)
from ssepwalk.errors import InvalidArgumentError, OutOfWindowError


def naive_config(traj: Trajectory, t: float) -> np.ndarray:
    """Reference evolution: swap the two ends of every edge event up to time t, one by one."""
    cfg = traj.eta.values.copy()
    for u, e in zip(traj.field.times.tolist(), traj.field.edges.tolist()):
        if u > t:
            break
        cfg[e], cfg[e + 1] = cfg[e + 1], cfg[e]
    return cfg


def naive_trace(field: ArrowField, x: int, t: float, s: float) -> int:
    pos = x
    lo = field.window.lo
    ev = list(zip(field.times.tolist(), (field.edges + lo).tolist()))
    if s <= t:
        for u, e in reversed(ev):
            if s < u <= t and pos in (e, e + 1):
                pos = e + 1 if pos == e else e
    else:
        for u, e in ev:
            if t < u <= s and pos in (e, e + 1):
                pos = e + 1 if pos == e else e
    return pos


# ---------------------------------------------------------------- window and arrows

def test_window_rejects_zero_horizon():
    # TRIVIAL: t_max = 0 disallowed
    with pytest.raises(InvalidArgumentError):
        Window(0, 10, 0.0)


def test_default_buffer():
    w = Window(-5, 5, 10.0)
    assert w.buffer == 40 and w.lo == -45 and w.hi == 45


def test_sample_arrows_deterministic():
    # TRIVIAL: same seed, identical events
    w = Window(0, 50, 3.0, buffer=0)
    a, b = sample_arrows(w, 7), sample_arrows(w, 7)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.edges, b.edges)
    c = sample_arrows(w, 8)
    assert not np.array_equal(a.times, c.times)


def test_small_horizon_event_mean():
    # TRIVIAL: expected count eps * edges
    w = Window(0, 1000, 1e-3, buffer=0)
    counts = [sample_arrows(w, s).n_events for s in range(400)]
    m = np.mean(counts)
    assert abs(m - 1.0) < 3 * np.sqrt(1.0 / 400) * 1.5


def test_event_count_matches_poisson_mean():
    # DERIVED: Poisson(n_edges * t_max) mean with variance equal to the mean
    w = Window(0, 1000, 10.0, buffer=0)
    counts = np.array([sample_arrows(w, stream_seed(1, i, 0)).n_events for i in range(200)])
    se = np.sqrt(10_000 / 200)
    assert abs(counts.mean() - 10_000) <= 3 * se


def test_edge_times_independent_rate_one():
    # DERIVED: each edge clock is rate 1, so per-edge counts average t_max
    w = Window(0, 400, 5.0, buffer=0)
    f = sample_arrows(w, 3)
    per = np.bincount(f.edges, minlength=w.n_edges)
    assert abs(per.mean() - 5.0) < 3 * np.sqrt(5.0 / w.n_edges)


def test_arrow_csv_roundtrip(tmp_path):
    w = Window(0, 10, 2.0, buffer=0)
    f = sample_arrows(w, 11)
    f.to_csv(tmp_path / "a.csv")
    g = ArrowField.from_csv(tmp_path / "a.csv", w)
    assert np.array_equal(f.times, g.times) and np.array_equal(f.edges, g.edges)


def test_from_edge_times_tie_lower_edge_first():
    w = Window(0, 4, 2.0, buffer=0)
    f = ArrowField.from_edge_times(w, {2: [1.0], 0: [1.0]})
    assert f.edges.tolist() == [0, 2]


# ---------------------------------------------------------------- stirring paths

def test_no_arrows_paths_vertical():
    # TRIVIAL
    w = Window(0, 10, 5.0, buffer=1)
    f = ArrowField.empty(w)
    for x in range(11):
        assert trace_path(f, x, 3.0, 1.0) == x


def test_single_arrow_forced_crossing():
    # TRIVIAL: one arrow on {0,1} at u, path from (0, 0) forward to s > u ends at 1
    w = Window(-3, 3, 5.0, buffer=0)
    f = ArrowField.from_edge_times(w, {0: [2.0]})
    assert trace_path(f, 0, 0.0, 3.0) == 1
    assert trace_path(f, 1, 3.0, 0.0) == 0
    assert trace_path(f, 0, 0.0, 1.0) == 0


def test_path_right_continuous_at_arrow_time():
    w = Window(-3, 3, 5.0, buffer=0)
    f = ArrowField.from_edge_times(w, {0: [2.0]})
    # the path through (1, 2.0) has already crossed the arrow at time 2
    assert trace_path(f, 1, 2.0, 0.0) == 0


def test_boundary_contact_raises():
    w = Window(0, 3, 5.0, buffer=0)
    f = ArrowField.from_edge_times(w, {0: [1.0]})
    with pytest.raises(OutOfWindowError):
        trace_path(f, 1, 2.0, 0.0)
    assert trace_path(f, 1, 2.0, 0.0, allow_boundary=True) == 0


@given(seed=st.integers(0, 2**32), x=st.integers(-15, 15),
       a=st.floats(0, 4), b=st.floats(0, 4))
def test_round_trip_involution(seed, x, a, b):
    # TRIVIAL: arrow crossings are involutions
    w = Window(-15, 15, 4.0, buffer=5)
    f = sample_arrows(w, seed)
    y = trace_path(f, x, a, b, allow_boundary=True)
    assert trace_path(f, y, b, a, allow_boundary=True) == x


@given(seed=st.integers(0, 2**32), x=st.integers(-10, 10), a=st.floats(0, 3), b=st.floats(0, 3))
def test_trace_matches_naive_reference(seed, x, a, b):
    w = Window(-10, 10, 3.0, buffer=3)
    f = sample_arrows(w, seed)
    assert trace_path(f, x, a, b, allow_boundary=True) == naive_trace(f, x, a, b)


@given(seed=st.integers(0, 2**32), a=st.floats(0, 3), b=st.floats(0, 3))
def test_paths_bijective(seed, a, b):
    w = Window(-10, 10, 3.0, buffer=2)
    f = sample_arrows(w, seed)
    img = trace_many(f, w.sites(), a, b, allow_boundary=True)
    assert sorted(img.tolist()) == w.sites().tolist()


# ---------------------------------------------------------------- configurations

def test_swap_examples():
    w = Window(0, 3, 1.0, buffer=0)
    c = from_sites(w, [0])
    s = swap(c, 0, 1)
    assert s[0] == 0 and s[1] == 1
    assert np.array_equal(swap(s, 0, 1).values, c.values)
    assert np.array_equal(swap(c, 2, 2).values, c.values)


@given(vals=st.lists(st.integers(0, 1), min_size=2, max_size=30), data=st.data())
def test_swap_twice_identity(vals, data):
    c = Configuration(0, np.array(vals, dtype=np.int8))
    x = data.draw(st.integers(0, len(vals) - 1))
    y = data.draw(st.integers(0, len(vals) - 1))
    assert np.array_equal(swap(swap(c, x, y), x, y).values, c.values)
    assert swap(c, x, y).count() == c.count()


def test_sample_config_rejects_degenerate_density():
    w = Window(0, 10, 1.0)
    for rho in (0.0, 1.0):
        with pytest.raises(InvalidArgumentError):
            sample_config(rho, w, 1)
    assert ones(w).count() == w.n_sites and zeros(w).count() == 0


def test_sample_config_density():
    # DERIVED: binomial oracle, sd of the mean sqrt(rho(1-rho)/n)
    w = Window(0, 100_000 - 1, 1.0, buffer=0)
    c = sample_config(0.5, w, 5)
    assert abs(c.density() - 0.5) <= 3 * np.sqrt(0.25 / w.n_sites)
    assert np.array_equal(c.values, sample_config(0.5, w, 5).values)


def test_hole_complement():
    w = Window(0, 9, 1.0, buffer=0)
    assert hole_complement(ones(w)).count() == 0
    c = Configuration(0, np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0], dtype=np.int8), 0.3)
    h = hole_complement(c)
    assert h.density() == pytest.approx(0.7) and h.rho == pytest.approx(0.7)
    assert np.array_equal(hole_complement(h).values, c.values)


# ---------------------------------------------------------------- trajectories

def test_constant_environments_stay_constant():
    w = Window(-5, 5, 3.0)
    for env, v in (("ones", 1), ("zeros", 0)):
        traj = make_trajectory(w, None, 1, 0, env)
        assert all(evolve(traj, x, t) == v for x in range(-5, 6) for t in (0.0, 1.5, 3.0))


def test_single_particle_single_arrow():
    # TRIVIAL: particle at 0, arrow on {0,1} at u; occupancy at 1 is 1 iff t >= u
    w = Window(-3, 3, 5.0, buffer=0)
    f = ArrowField.from_edge_times(w, {0: [2.0]})
    traj = Trajectory(f, from_sites(w, [0]))
    assert traj.value(1, 1.9) == 0 and traj.value(1, 2.0) == 1 and traj.value(1, 4.0) == 1
    assert evolve(traj, 1, 1.9) == 0 and evolve(traj, 1, 2.0) == 1


@given(seed=st.integers(0, 2**32), t=st.floats(0, 3))
def test_replay_matches_naive_and_duality(seed, t):
    w = Window(-10, 10, 3.0, buffer=2)
    traj = make_trajectory(w, 0.5, seed, 0)
    cfg = traj.config_at(t)
    assert np.array_equal(cfg, naive_config(traj, t))
    for x in range(w.lo, w.hi + 1):
        assert evolve(traj, x, t) == cfg[x - w.lo]


def test_small_snapshot_interval_same_answers():
    w = Window(-20, 20, 5.0)
    t1 = make_trajectory(w, 0.5, 3, 0)
    t2 = Trajectory(t1.field, t1.eta, snapshot_every=7)
    for t in (4.0, 1.0, 2.5, 5.0, 0.3):
        assert np.array_equal(t1.config_at(t), t2.config_at(t))


def test_integer_grid_rows():
    w = Window(-10, 10, 4.0)
    traj = make_trajectory(w, 0.5, 9, 0)
    g = traj.integer_grid()
    for t in range(5):
        assert np.array_equal(g[t], traj.config_at(float(t)))


def test_trajectory_csv(tmp_path):
    w = Window(0, 3, 2.0, buffer=0)
    traj = make_trajectory(w, 0.5, 1, 0)
    traj.to_csv(tmp_path / "t.csv", [0.0, 1.0])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,x,occupancy" and len(lines) == 1 + 2 * 4
