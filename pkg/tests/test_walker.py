from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssepwalk.core import ArrowField, Trajectory, Window, from_sites, make_trajectory
from ssepwalk.errors import InvalidArgumentError
from ssepwalk.walker import (
    DEFAULT_RATES,
    MarkSequences,
    RateSet,
    WalkPath,
    jump_counts,
    particle_jump_indicators,
    sample_marks,
    sandwich_range,
    sandwich_violations,
    sandwich_walks,
    simulate_replica,
    simulate_walk,
    speed_functionals,
    verify_representation,
)

rates_st = st.tuples(
    st.floats(0.05, 0.95), st.floats(0.05, 0.95)
).map(lambda ab: RateSet(0.5, 0.5, max(ab), 1.0 - max(ab)) if max(ab) > 0.5 else RateSet(0.5, 0.5, 0.9, 0.1))


def naive_walk(traj: Trajectory, rates: RateSet, marks: MarkSequences) -> list[int]:
    """Reference: replay every arrow before each clock ring, read the site, step."""
    cfg = traj.eta.values.copy()
    lo = traj.window.lo
    ev = list(zip(traj.field.times.tolist(), traj.field.edges.tolist()))
    k = 0
    pos = 0
    out = []
    for t, u in zip(marks.times.tolist(), marks.uniforms.tolist()):
        while k < len(ev) and ev[k][0] <= t:
            e = ev[k][1]
            cfg[e], cfg[e + 1] = cfg[e + 1], cfg[e]
            k += 1
        i = int(cfg[pos - lo])
        pos += 1 if u < rates.right_prob(i) else -1
        out.append(pos)
    return out


def test_rates_validation():
    with pytest.raises(InvalidArgumentError):
        RateSet(0.5, 0.5, 1.0, 0.0)  # beta1 must stay positive
    with pytest.raises(InvalidArgumentError):
        RateSet(0.5, 0.5, 0.8, 0.1)  # total rate must match
    with pytest.raises(InvalidArgumentError):
        RateSet(0.9, 0.1, 0.5, 0.5)  # v1 > v0
    r = DEFAULT_RATES
    assert (r.gamma, r.v0, r.v1) == (1.0, 0.0, pytest.approx(0.8))


@given(seed=st.integers(0, 2**32), rates=rates_st)
def test_walk_matches_naive_reference(seed, rates):
    marks = sample_marks(rates, 20.0, seed, seed + 1)
    a, b = sandwich_range(marks, rates)
    w = Window(a - 1, b + 1, 20.0, buffer=5)
    traj = make_trajectory(w, 0.5, seed, 0)
    path = simulate_walk(traj, rates, 20.0, marks=marks)
    assert path.after.tolist() == naive_walk(traj, rates, marks)


def test_same_seed_same_path():
    p1, _ = simulate_replica(DEFAULT_RATES, 0.5, 100.0, 3, 1)
    p2, _ = simulate_replica(DEFAULT_RATES, 0.5, 100.0, 3, 1)
    assert np.array_equal(p1.after, p2.after) and np.array_equal(p1.times, p2.times)


def test_no_clock_events_stays_home():
    w = Window(-3, 3, 1.0)
    traj = make_trajectory(w, 0.5, 1)
    marks = MarkSequences(np.empty(0), np.empty(0), 1.0)
    path = simulate_walk(traj, DEFAULT_RATES, 1.0, marks=marks)
    assert path.final() == 0 and path.position(0.5) == 0
    f = speed_functionals(path)
    assert (f.speed, f.particle_fraction, f.hole_fraction, f.length) == (0.0, 0.0, 0.0, 1.0)
    assert verify_representation(path)


def test_homogeneous_jump_counts():
    for env, idx in (("ones", 1), ("zeros", 0)):
        path, _ = simulate_replica(DEFAULT_RATES, None, 50.0, 1, 0, env)
        counts = jump_counts(path, 50.0)
        assert counts[idx] == 0
        lower, upper = sandwich_walks(path)
        same = upper if env == "ones" else lower
        assert np.array_equal(same.after, path.after)


def test_homogeneous_speed_matches_drift():
    # DERIVED: on all-ones the walk is a rate-1 walk with drift 0.8; sd(W_T/T) = sqrt(gamma/T)
    speeds = [simulate_replica(DEFAULT_RATES, None, 100.0, 7, i, "ones")[0].final() / 100.0 for i in range(200)]
    m, se = np.mean(speeds), np.std(speeds, ddof=1) / np.sqrt(200)
    assert abs(m - 0.8) <= 3 * se
    assert se == pytest.approx(np.sqrt(1.0 / 100.0 / 200), rel=0.2)


@given(seed=st.integers(0, 2**32), rho=st.floats(0.05, 0.95))
def test_identities_on_random_paths(seed, rho):
    path, _ = simulate_replica(DEFAULT_RATES, rho, 30.0, seed, 0)
    n1, n0 = jump_counts(path, 30.0)
    assert n1 + n0 == path.n_jumps
    assert verify_representation(path)
    assert sandwich_violations(path) == 0
    f = speed_functionals(path)
    assert f.length == 30.0 + path.n_jumps
    y = particle_jump_indicators(path, 30)
    assert y.sum() <= n1


def test_sandwich_over_100_seeds():
    # DERIVED: exhaustive pathwise check
    assert sum(sandwich_violations(simulate_replica(DEFAULT_RATES, 0.5, 100.0, s, 0)[0]) for s in range(100)) == 0


def test_all_particle_jumps_representation():
    # TRIVIAL: every jump from a particle, so W equals the partial sum of the particle steps
    path, _ = simulate_replica(DEFAULT_RATES, None, 40.0, 2, 0, "ones")
    steps = np.where(path.uniforms < DEFAULT_RATES.right_prob(1), 1, -1)
    assert np.array_equal(np.cumsum(steps), path.after)


def test_tampered_path_fails_representation():
    path, _ = simulate_replica(DEFAULT_RATES, 0.5, 40.0, 2, 0)
    bad = WalkPath(path.times, path.before, path.after + 1, path.env, path.uniforms, path.T, path.rates)
    assert not verify_representation(bad)


def test_jump_indicator_convention():
    w = Window(-3, 3, 3.0)
    traj = Trajectory(ArrowField.empty(w), from_sites(w, range(w.lo, w.hi + 1)))
    marks = MarkSequences(np.array([0.5, 2.2]), np.array([0.1, 0.1]), 3.0)
    path = simulate_walk(traj, DEFAULT_RATES, 3.0, marks=marks)
    assert particle_jump_indicators(path, 3).tolist() == [1, 0, 1]


def test_path_export(tmp_path):
    path, _ = simulate_replica(DEFAULT_RATES, 0.5, 10.0, 1, 0)
    path.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,W_t,env_state" and len(lines) == path.n_jumps + 2
    s = json.loads(path.summary_json(1))
    assert set(s) == {"T", "N", "N1", "N0", "W_T", "ell_T", "seed"}
    assert s["N1"] + s["N0"] == s["N"]
