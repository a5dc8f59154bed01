"""Random walk driven by the exclusion environment.

The walk is built from a rate-gamma Poisson clock and one uniform mark per clock
event. At the k-th ring the walker reads the occupancy under it and steps right iff
the mark is below alpha_i / gamma. Forcing the occupancy to 0 or 1 with the same
clock and marks gives the two homogeneous walks that sandwich W.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    STREAM_CLOCK,
    STREAM_MARKS,
    Trajectory,
    Window,
    make_trajectory,
    stream_seed,
)
from .errors import InvalidArgumentError, OutOfWindowError


@dataclass(frozen=True)
class RateSet:
    alpha0: float
    beta0: float
    alpha1: float
    beta1: float

    def __post_init__(self):
        rates = (self.alpha0, self.beta0, self.alpha1, self.beta1)
        if any(not (r > 0 and math.isfinite(r)) for r in rates):
            raise InvalidArgumentError(f"all jump rates must be positive, got {rates}")
        if not math.isclose(self.alpha0 + self.beta0, self.alpha1 + self.beta1, rel_tol=1e-12, abs_tol=1e-12):
            raise InvalidArgumentError("total jump rate must not depend on the occupancy")
        if not self.v1 > self.v0:
            raise InvalidArgumentError("drift on particles must exceed drift on holes")

    @property
    def gamma(self) -> float:
        return self.alpha0 + self.beta0

    @property
    def v0(self) -> float:
        return self.alpha0 - self.beta0

    @property
    def v1(self) -> float:
        return self.alpha1 - self.beta1

    def right_prob(self, i: int) -> float:
        return (self.alpha1 if i else self.alpha0) / self.gamma

    def as_dict(self) -> dict:
        return {"alpha0": self.alpha0, "beta0": self.beta0, "alpha1": self.alpha1, "beta1": self.beta1}


DEFAULT_RATES = RateSet(0.5, 0.5, 0.9, 0.1)


@dataclass(frozen=True)
class MarkSequences:
    """Clock ring times on [0, T] and one uniform per ring.

    The step drawn from sequence i at ring k is +1 iff ``uniforms[k] < alpha_i/gamma``,
    so both step sequences are read off the same uniforms.
    """

    times: np.ndarray
    uniforms: np.ndarray
    T: float

    def steps(self, rates: RateSet, i: int) -> np.ndarray:
        return np.where(self.uniforms < rates.right_prob(i), 1, -1).astype(np.int64)

    def partial_sums(self, rates: RateSet, i: int) -> np.ndarray:
        """S^i_0 = 0, S^i_n = sum of the first n steps of sequence i."""
        return np.concatenate(([0], np.cumsum(self.steps(rates, i))))


def sample_marks(rates: RateSet, T: float, clock_seed: int, mark_seed: int) -> MarkSequences:
    if not T > 0:
        raise InvalidArgumentError("horizon must be positive")
    rng = np.random.default_rng(np.uint64(clock_seed))
    n = int(rng.poisson(rates.gamma * T))
    gaps = rng.standard_exponential(n + 1)
    np.cumsum(gaps, out=gaps)
    times = gaps[:n] * (T / gaps[n])
    uniforms = np.random.default_rng(np.uint64(mark_seed)).random(n)
    return MarkSequences(times, uniforms, float(T))


@dataclass(frozen=True)
class WalkPath:
    """One record per clock ring; the walker moves at every ring."""

    times: np.ndarray
    before: np.ndarray
    after: np.ndarray
    env: np.ndarray
    uniforms: np.ndarray
    T: float
    rates: RateSet

    @property
    def n_jumps(self) -> int:
        return int(self.times.size)

    @property
    def mark_index(self) -> np.ndarray:
        return np.arange(self.n_jumps)

    def count_until(self, t: float) -> int:
        return int(np.searchsorted(self.times, t, side="right"))

    def position(self, t: float) -> int:
        n = self.count_until(t)
        return int(self.after[n - 1]) if n else 0

    def positions(self, ts) -> np.ndarray:
        n = np.searchsorted(self.times, np.asarray(ts, dtype=np.float64), side="right")
        pos = np.concatenate(([0], self.after))
        return pos[n]

    def final(self) -> int:
        return int(self.after[-1]) if self.n_jumps else 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "W_t", "env_state"])
            w.writerow([0.0, 0, ""])
            for t, a, e in zip(self.times.tolist(), self.after.tolist(), self.env.tolist()):
                w.writerow([repr(t), a, e])

    def summary(self, seed=None) -> dict:
        n1, n0 = jump_counts(self, self.T)
        return {
            "T": self.T,
            "N": self.n_jumps,
            "N1": n1,
            "N0": n0,
            "W_T": self.final(),
            "ell_T": self.T + self.n_jumps,
            "seed": seed,
        }

    def summary_json(self, seed=None) -> str:
        return json.dumps(self.summary(seed), sort_keys=True, indent=2)


def _walk_on(traj: Trajectory, rates: RateSet, marks: MarkSequences) -> WalkPath:
    w = traj.window
    if marks.T > w.t_max:
        raise InvalidArgumentError("walk horizon exceeds the trajectory horizon")
    if not w.lo < 0 < w.hi:
        raise OutOfWindowError("origin must lie strictly inside the simulated region")
    cfg = traj.eta.values.copy()
    before, env, status = _kernels.walk(
        cfg, traj.field.times, traj.field.edges, marks.times, marks.uniforms,
        rates.right_prob(1), rates.right_prob(0), -w.lo,
    )
    if status:
        raise OutOfWindowError("walker reached the edge of the simulated region")
    before = before + w.lo
    step = np.where(marks.uniforms < np.where(env == 1, rates.right_prob(1), rates.right_prob(0)), 1, -1)
    return WalkPath(marks.times, before, before + step, env.astype(np.int8), marks.uniforms, marks.T, rates)


def simulate_walk(traj: Trajectory, rates: RateSet, T: float, rng_seed=None, *, marks: MarkSequences | None = None) -> WalkPath:
    """Walk from the origin on ``traj`` up to time T.

    ``rng_seed`` is either one integer (split into a clock and a mark stream) or a
    pair (clock_seed, mark_seed). Pre-sampled ``marks`` can be given instead.
    """
    if marks is None:
        if rng_seed is None:
            raise InvalidArgumentError("either rng_seed or marks is required")
        if isinstance(rng_seed, (tuple, list)):
            cs, ms = rng_seed
        else:
            cs, ms = stream_seed(rng_seed, 0, STREAM_CLOCK), stream_seed(rng_seed, 0, STREAM_MARKS)
        marks = sample_marks(rates, T, cs, ms)
    elif not math.isclose(marks.T, T):
        raise InvalidArgumentError("marks were sampled for a different horizon")
    return _walk_on(traj, rates, marks)


def forced_walk(marks: MarkSequences, rates: RateSet, i: int) -> WalkPath:
    """Walk that always reads occupancy i (the homogeneous walk with drift v_i)."""
    steps = marks.steps(rates, i)
    after = np.cumsum(steps)
    before = after - steps
    env = np.full(marks.times.size, i, dtype=np.int8)
    return WalkPath(marks.times, before, after, env, marks.uniforms, marks.T, rates)


def sandwich_walks(path: WalkPath) -> tuple[WalkPath, WalkPath]:
    marks = MarkSequences(path.times, path.uniforms, path.T)
    return forced_walk(marks, path.rates, 0), forced_walk(marks, path.rates, 1)


def sandwich_violations(path: WalkPath) -> int:
    lower, upper = sandwich_walks(path)
    return int(np.count_nonzero((lower.after > path.after) | (path.after > upper.after)))


def jump_counts(path: WalkPath, t: float) -> tuple[int, int]:
    """(jumps made from particles, jumps made from holes) up to time t."""
    n = path.count_until(t)
    n1 = int(path.env[:n].sum())
    return n1, n - n1


def verify_representation(path: WalkPath) -> bool:
    """Check W = S1(N1) + S0(N0) at every jump, with S^i rebuilt from the marks."""
    if path.n_jumps == 0:
        return True
    marks = MarkSequences(path.times, path.uniforms, path.T)
    steps = {i: marks.steps(path.rates, i) for i in (0, 1)}
    # sequence i is consumed in order: its n-th used mark is the n-th ring spent on state i
    s = {}
    for i in (0, 1):
        used = np.flatnonzero(path.env == i)
        s[i] = np.concatenate(([0], np.cumsum(steps[i][used])))
    n1 = np.cumsum(path.env == 1)
    n0 = np.cumsum(path.env == 0)
    recon = s[1][n1] + s[0][n0]
    return bool(np.array_equal(recon, path.after)) and bool(np.all(np.abs(path.after - path.before) == 1))


def consumed_marks(path: WalkPath, i: int) -> np.ndarray:
    """Steps actually consumed from sequence i, in order."""
    used = np.flatnonzero(path.env == i)
    return np.where(path.uniforms[used] < path.rates.right_prob(i), 1, -1)


@dataclass(frozen=True)
class SpeedFunctionals:
    speed: float
    particle_fraction: float
    hole_fraction: float
    length: float


def speed_functionals(path: WalkPath) -> SpeedFunctionals:
    if not path.T > 0:
        raise InvalidArgumentError("horizon must be positive")
    n1, n0 = jump_counts(path, path.T)
    g = path.rates.gamma * path.T
    return SpeedFunctionals(path.final() / path.T, n1 / g, n0 / g, path.T + path.n_jumps)


def particle_jump_indicators(path: WalkPath, t_end: int | None = None) -> np.ndarray:
    """Y[s] = 1 iff some jump from a particle happens in (s-1, s], for s = 1..t_end."""
    t_end = int(math.floor(path.T)) if t_end is None else int(t_end)
    t1 = path.times[path.env == 1]
    counts = np.searchsorted(t1, np.arange(t_end + 1, dtype=np.float64), side="right")
    return (np.diff(counts) > 0).astype(np.int8)


def sandwich_range(marks: MarkSequences, rates: RateSet) -> tuple[int, int]:
    """Extreme positions reachable by W, read off the two forced walks."""
    lo = forced_walk(marks, rates, 0).after
    hi = forced_walk(marks, rates, 1).after
    if lo.size == 0:
        return 0, 0
    return int(min(0, lo.min())), int(max(0, hi.max()))


def simulate_replica(rates: RateSet, rho: float | None, T: float, master_seed: int, replica: int,
                     env: str = "ssep", t_max: float | None = None, buffer: int | None = None):
    """Sample marks, size the window from the sandwich range and run the walk.

    Returns (path, trajectory). The simulated region always contains every site the
    walk can reach, so only the buffer protects the environment near the walk from
    the closed boundary.
    """
    marks = sample_marks(rates, T, stream_seed(master_seed, replica, STREAM_CLOCK),
                         stream_seed(master_seed, replica, STREAM_MARKS))
    a, b = sandwich_range(marks, rates)
    horizon = float(T if t_max is None else t_max)
    window = Window(a - 1, b + 1, horizon, buffer)
    traj = make_trajectory(window, rho, master_seed, replica, env)
    return _walk_on(traj, rates, marks), traj
