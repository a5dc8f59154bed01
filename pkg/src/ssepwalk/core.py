"""Graphical construction of the symmetric exclusion process on a finite window.

Every edge of the simulated region carries a rate-1 Poisson clock. At each ring the
contents of the two endpoint sites are exchanged. The window is closed: there are no
clocks on edges leaving the simulated region, so the particle count is conserved.

Events are stored in one global time-ordered list. The position of an event in that
list (its rank) is used as the time key everywhere, which makes tie handling exact.
"""
from __future__ import annotations

import csv
import math
import threading
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError, OutOfWindowError


def stream_seed(master: int, replica: int, stream: int) -> int:
    """64-bit seed for one named stream of one replica."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(replica), int(stream)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


STREAM_ARROWS = 0
STREAM_CONFIG = 1
STREAM_CLOCK = 2
STREAM_MARKS = 3
STREAM_EXTRA = 4


@dataclass(frozen=True)
class Window:
    x_min: int
    x_max: int
    t_max: float
    buffer: int | None = None

    def __post_init__(self):
        if not (isinstance(self.t_max, (int, float)) and self.t_max > 0 and math.isfinite(self.t_max)):
            raise InvalidArgumentError(f"t_max must be positive, got {self.t_max}")
        if int(self.x_min) >= int(self.x_max):
            raise InvalidArgumentError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        object.__setattr__(self, "x_min", int(self.x_min))
        object.__setattr__(self, "x_max", int(self.x_max))
        object.__setattr__(self, "t_max", float(self.t_max))
        if self.buffer is None:
            object.__setattr__(self, "buffer", int(math.ceil(2 * self.t_max)) + 20)
        elif int(self.buffer) < 0:
            raise InvalidArgumentError("buffer must be non-negative")
        else:
            object.__setattr__(self, "buffer", int(self.buffer))

    @property
    def lo(self) -> int:
        """First site of the simulated region."""
        return self.x_min - self.buffer

    @property
    def hi(self) -> int:
        """Last site of the simulated region (inclusive)."""
        return self.x_max + self.buffer

    @property
    def n_sites(self) -> int:
        return self.hi - self.lo + 1

    @property
    def n_edges(self) -> int:
        return self.n_sites - 1

    def has_site(self, x: int) -> bool:
        return self.lo <= x <= self.hi

    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)


class ArrowField:
    """Realized arrow events of the graphical construction.

    ``times`` is sorted; ``edges[i]`` is the offset of the left endpoint of event i.
    """

    def __init__(self, window: Window, times: np.ndarray, edges: np.ndarray):
        times = np.ascontiguousarray(times, dtype=np.float64)
        edges = np.ascontiguousarray(edges, dtype=np.int32)
        if times.shape != edges.shape:
            raise InvalidArgumentError("times and edges must have equal length")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise InvalidArgumentError("event times must be sorted")
            if times[0] < 0 or times[-1] > window.t_max:
                raise InvalidArgumentError("event times must lie in [0, t_max]")
            if edges.min() < 0 or edges.max() >= window.n_edges:
                raise InvalidArgumentError("edge index outside the simulated region")
        self.window = window
        self.times = times
        self.edges = edges
        self.times.setflags(write=False)
        self.edges.setflags(write=False)
        self._lock = threading.Lock()
        self._order = None
        self._offsets = None

    @classmethod
    def empty(cls, window: Window) -> "ArrowField":
        return cls(window, np.empty(0), np.empty(0, dtype=np.int32))

    @classmethod
    def from_edge_times(cls, window: Window, per_edge: Mapping[int, Iterable[float]]) -> "ArrowField":
        """Build a field from {left_site: event times}. Ties go to the lower edge."""
        ts, es = [], []
        for left, values in per_edge.items():
            e = int(left) - window.lo
            if not 0 <= e < window.n_edges:
                raise InvalidArgumentError(f"edge {{{left}, {left + 1}}} outside the simulated region")
            vals = sorted(float(v) for v in values)
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise InvalidArgumentError(f"times on edge {left} must be strictly increasing")
            ts.extend(vals)
            es.extend([e] * len(vals))
        times = np.array(ts, dtype=np.float64)
        edges = np.array(es, dtype=np.int32)
        idx = np.lexsort((edges, times))
        return cls(window, times[idx], edges[idx])

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def rank(self, t: float) -> int:
        """Number of events at times <= t."""
        return int(np.searchsorted(self.times, t, side="right"))

    def rank_before(self, t: float) -> int:
        """Number of events at times < t."""
        return int(np.searchsorted(self.times, t, side="left"))

    def _index(self):
        if self._order is None:
            with self._lock:
                if self._order is None:
                    order = np.argsort(self.edges, kind="stable").astype(np.int64)
                    offsets = np.searchsorted(self.edges[order], np.arange(self.window.n_edges + 1)).astype(np.int64)
                    self._offsets = offsets
                    self._order = order
        return self._order, self._offsets

    def edge_times(self, left_site: int) -> np.ndarray:
        order, offsets = self._index()
        e = left_site - self.window.lo
        if not 0 <= e < self.window.n_edges:
            raise InvalidArgumentError(f"edge {left_site} outside the simulated region")
        return self.times[order[offsets[e]:offsets[e + 1]]]

    def edges_between(self, t0: float, t1: float) -> np.ndarray:
        """Left sites of edges ringing in the open interval (t0, t1), in time order."""
        a = self.rank(t0)
        b = self.rank_before(t1)
        return self.edges[a:max(a, b)].astype(np.int64) + self.window.lo

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["edge_left_site", "time"])
            lo = self.window.lo
            for e, t in zip(self.edges.tolist(), self.times.tolist()):
                w.writerow([e + lo, repr(t)])

    @classmethod
    def from_csv(cls, path, window: Window) -> "ArrowField":
        per: dict[int, list[float]] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                per.setdefault(int(row["edge_left_site"]), []).append(float(row["time"]))
        return cls.from_edge_times(window, per)


def sample_arrows(window: Window, rng_seed: int) -> ArrowField:
    """Independent rate-1 Poisson clocks on every edge of the simulated region.

    Uses superposition: the total count is Poisson(n_edges * t_max), the sorted
    times are uniform order statistics (normalized exponential partial sums) and
    each event picks its edge uniformly.
    """
    if not isinstance(window, Window):
        raise InvalidArgumentError("window must be a Window")
    rng = np.random.default_rng(np.uint64(rng_seed))
    n_edges = window.n_edges
    m = int(rng.poisson(n_edges * window.t_max))
    gaps = rng.standard_exponential(m + 1)
    np.cumsum(gaps, out=gaps)
    times = gaps[:m]
    times *= window.t_max / gaps[m]
    edges = rng.integers(0, n_edges, size=m, dtype=np.int32)
    if m > 1:
        same = times[1:] == times[:-1]
        if same.any():
            idx = np.lexsort((edges, times))
            times, edges = times[idx], edges[idx]
            same = times[1:] == times[:-1]
            dup = np.concatenate(([False], same & (edges[1:] == edges[:-1])))
            if dup.any():
                times, edges = times[~dup], edges[~dup]
    return ArrowField(window, times, edges)


@dataclass(frozen=True)
class Configuration:
    """Occupancy of the simulated region; ``values[i]`` is the site ``lo + i``."""

    lo: int
    values: np.ndarray
    rho: float | None = None

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.int8)
        if vals.ndim != 1:
            raise InvalidArgumentError("occupancy must be one-dimensional")
        if vals.size and (vals.min() < 0 or vals.max() > 1):
            raise InvalidArgumentError("occupancy values must be 0 or 1")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def hi(self) -> int:
        return self.lo + self.values.size - 1

    def __getitem__(self, x: int) -> int:
        if not self.lo <= x <= self.hi:
            raise InvalidArgumentError(f"site {x} outside [{self.lo}, {self.hi}]")
        return int(self.values[x - self.lo])

    def count(self) -> int:
        return int(self.values.sum())

    def density(self) -> float:
        return float(self.values.mean())


def sample_config(rho: float, window: Window, rng_seed: int) -> Configuration:
    if not 0.0 < rho < 1.0:
        raise InvalidArgumentError(f"density must lie in (0, 1), got {rho}")
    rng = np.random.default_rng(np.uint64(rng_seed))
    vals = (rng.random(window.n_sites) < rho).astype(np.int8)
    return Configuration(window.lo, vals, float(rho))


def ones(window: Window) -> Configuration:
    return Configuration(window.lo, np.ones(window.n_sites, dtype=np.int8))


def zeros(window: Window) -> Configuration:
    return Configuration(window.lo, np.zeros(window.n_sites, dtype=np.int8))


def from_sites(window: Window, occupied: Iterable[int]) -> Configuration:
    vals = np.zeros(window.n_sites, dtype=np.int8)
    for x in occupied:
        if not window.has_site(x):
            raise InvalidArgumentError(f"site {x} outside the simulated region")
        vals[x - window.lo] = 1
    return Configuration(window.lo, vals)


def swap(config: Configuration, x: int, y: int) -> Configuration:
    for z in (x, y):
        if not config.lo <= z <= config.hi:
            raise InvalidArgumentError(f"site {z} outside [{config.lo}, {config.hi}]")
    vals = config.values.copy()
    i, j = x - config.lo, y - config.lo
    vals[i], vals[j] = vals[j], vals[i]
    return Configuration(config.lo, vals, config.rho)


def hole_complement(config: Configuration) -> Configuration:
    rho = None if config.rho is None else 1.0 - config.rho
    return Configuration(config.lo, (1 - config.values).astype(np.int8), rho)


def trace_path(field: ArrowField, x: int, t: float, s: float, *, allow_boundary: bool = False) -> int:
    """Position at time ``s`` of the stirring path through (x, t).

    Paths are right-continuous: an arrow at exactly time t has already been crossed
    by the path through (x, t). Raises OutOfWindowError when the path touches an
    outermost site of the simulated region, where the closed boundary could have
    altered it, unless ``allow_boundary`` is set.
    """
    w = field.window
    if not w.has_site(x):
        raise InvalidArgumentError(f"site {x} outside the simulated region")
    for u in (t, s):
        if not 0 <= u <= w.t_max:
            raise InvalidArgumentError(f"time {u} outside [0, {w.t_max}]")
    order, offsets = field._index()
    pos, touched = _kernels.trace(x - w.lo, field.rank(t), field.rank(s), order, offsets, w.n_sites)
    if touched and not allow_boundary:
        raise OutOfWindowError(f"path through ({x}, {t}) reached the edge of the simulated region")
    return int(pos) + w.lo


def trace_many(field: ArrowField, xs: Iterable[int], t: float, s: float, *, allow_boundary: bool = False) -> np.ndarray:
    return np.array([trace_path(field, int(x), t, s, allow_boundary=allow_boundary) for x in xs], dtype=np.int64)


class Trajectory:
    """Initial configuration plus arrow field; serves occupancy at any time in [0, t_max].

    Snapshots are cached by event rank; a query replays arrows forward from the
    nearest cached snapshot at or below the requested rank.
    """

    def __init__(self, field: ArrowField, eta: Configuration, snapshot_every: int = 200_000):
        w = field.window
        if eta.lo != w.lo or eta.values.size != w.n_sites:
            raise InvalidArgumentError("configuration does not cover the simulated region")
        self.field = field
        self.eta = eta
        self.window = w
        self._lock = threading.Lock()
        self._ranks = [0]
        self._snaps = {0: eta.values.copy()}
        self._snapshot_every = int(snapshot_every)
        self._grid = None
        self.cache: dict = {}

    def _check_time(self, t: float) -> None:
        if not 0 <= t <= self.window.t_max:
            raise InvalidArgumentError(f"time {t} outside [0, {self.window.t_max}]")

    def config_at_rank(self, rank: int) -> np.ndarray:
        with self._lock:
            i = bisect_right(self._ranks, rank) - 1
            base = self._ranks[i]
            cur = self._snaps[base].copy()
        edges = self.field.edges
        step = self._snapshot_every
        while base < rank:
            nxt = min(rank, base + step)
            _kernels.apply_swaps(cur, edges, base, nxt)
            base = nxt
            if base - self._ranks[i] >= step and base < rank:
                with self._lock:
                    if base not in self._snaps:
                        self._snaps[base] = cur.copy()
                        self._ranks.insert(bisect_right(self._ranks, base), base)
        return cur

    def config_at(self, t: float) -> np.ndarray:
        """Occupancy array of the simulated region at time t (a fresh copy)."""
        self._check_time(t)
        return self.config_at_rank(self.field.rank(t))

    def configuration(self, t: float) -> Configuration:
        return Configuration(self.window.lo, self.config_at(t))

    def value(self, x: int, t: float) -> int:
        self._check_time(t)
        if not self.window.has_site(x):
            raise InvalidArgumentError(f"site {x} outside the simulated region")
        return int(self.config_at(t)[x - self.window.lo])

    def particle_count(self, t: float) -> int:
        return int(self.config_at(t).sum())

    def integer_grid(self) -> np.ndarray:
        """Rows t = 0..floor(t_max): occupancy of the whole simulated region at integer times."""
        if self._grid is None:
            n_rows = int(math.floor(self.window.t_max)) + 1
            ranks = np.searchsorted(self.field.times, np.arange(n_rows, dtype=np.float64), side="right")
            grid = _kernels.snapshot_rows(self.eta.values.copy(), self.field.edges, ranks.astype(np.int64))
            grid.setflags(write=False)
            with self._lock:
                if self._grid is None:
                    self._grid = grid
        return self._grid

    def to_csv(self, path, times: Iterable[float], x_range: tuple[int, int] | None = None) -> None:
        lo = self.window.lo
        a, b = x_range if x_range is not None else (self.window.x_min, self.window.x_max)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "occupancy"])
            for t in times:
                cfg = self.config_at(t)
                for x in range(a, b + 1):
                    w.writerow([repr(float(t)), x, int(cfg[x - lo])])


def evolve(traj: Trajectory, x: int, t: float) -> int:
    """Occupancy at (x, t), read off the initial configuration along the backward path."""
    w = traj.window
    if not w.has_site(x):
        raise InvalidArgumentError(f"site {x} outside the simulated region")
    if not 0 <= t <= w.t_max:
        raise InvalidArgumentError(f"time {t} outside [0, {w.t_max}]")
    y = trace_path(traj.field, x, t, 0.0, allow_boundary=True)
    return int(traj.eta.values[y - w.lo])


def make_trajectory(window: Window, rho: float | None, master_seed: int, replica: int = 0, env: str = "ssep") -> Trajectory:
    """Stationary trajectory with per-replica arrow and configuration streams.

    ``env`` selects the initial law: "ssep" (Bernoulli(rho)), "ones" or "zeros".
    The constant presets carry no arrows since stirring does not change them.
    """
    if env == "ones":
        return Trajectory(ArrowField.empty(window), ones(window))
    if env == "zeros":
        return Trajectory(ArrowField.empty(window), zeros(window))
    if env != "ssep":
        raise InvalidArgumentError(f"unknown environment preset {env!r}")
    field = sample_arrows(window, stream_seed(master_seed, replica, STREAM_ARROWS))
    eta = sample_config(rho, window, stream_seed(master_seed, replica, STREAM_CONFIG))
    return Trajectory(field, eta)
