"""Independent simple random walks as a comparison system for the exclusion process.

Walkers jump at rate 1 to each side (total rate 2), matching the stirring rate an
exclusion particle sees on its two incident edges. On a closed window a jump across
the boundary is suppressed, as for exclusion particles.

Exact quantities are computed by uniformization: a continuous-time chain with
jump-rate bound L is a Poisson(L t) number of steps of the discrete chain I + Q/L.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from .core import ArrowField, Configuration, Trajectory, Window
from .errors import InvalidArgumentError, OutOfWindowError, ResourceLimitError
from .scales import (
    BlockId,
    ScaleSchedule,
    _window_counts,
    check_block,
    confined_rows,
    geometry,
)

JUMP_RATE = 2.0
STEP_CAP = 1_000_000


def _poisson_cutoff(mean: float, tol: float) -> tuple[int, float]:
    """Smallest n with P(Poisson(mean) > n) <= tol, and that tail."""
    if mean == 0:
        return 0, 0.0
    n = int(stats.poisson.isf(tol, mean))
    while stats.poisson.sf(n, mean) > tol:
        n += 1
    if n > STEP_CAP:
        raise ResourceLimitError(f"uniformization needs {n} steps, cap is {STEP_CAP}")
    return n, float(stats.poisson.sf(n, mean))


def _poisson_weights(mean: float, n: int) -> np.ndarray:
    return stats.poisson.pmf(np.arange(n + 1), mean)


def _sites(window) -> tuple[int, int]:
    if isinstance(window, Window):
        return window.lo, window.hi
    lo, hi = window
    if not lo <= hi:
        raise InvalidArgumentError("window needs lo <= hi")
    return int(lo), int(hi)


@dataclass(frozen=True)
class SrwKernel:
    """matrix[y - lo, z - lo] = P(S^y_t = z) for sites lo..hi."""

    t: float
    lo: int
    hi: int
    matrix: np.ndarray
    error: float
    closed: bool

    def prob(self, y: int, z: int) -> float:
        return float(self.matrix[y - self.lo, z - self.lo])

    def interval_prob(self, y: int, a: int, b: int) -> float:
        """P(S^y_t in [a, b))."""
        a, b = max(a, self.lo), min(b, self.hi + 1)
        if a >= b:
            return 0.0
        return float(self.matrix[y - self.lo, a - self.lo:b - self.lo].sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "z", "p"])
            for i, j in zip(*np.nonzero(self.matrix)):
                w.writerow([self.lo + i, self.lo + j, repr(float(self.matrix[i, j]))])


def srw_pmf(t: float, reach: int | None = None, tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """P(S^0_t = k) for k = -K..K on the infinite lattice (index k + K), and the
    truncation error bound. K defaults to the number of uniformized steps."""
    if t < 0:
        raise InvalidArgumentError("t must be non-negative")
    n_max, tail = _poisson_cutoff(JUMP_RATE * t, tol)
    K = n_max if reach is None else int(reach)
    size = 2 * max(K, n_max) + 1
    mid = size // 2
    weights = _poisson_weights(JUMP_RATE * t, n_max)
    cur = np.zeros(size)
    cur[mid] = 1.0
    out = weights[0] * cur
    for n in range(1, n_max + 1):
        nxt = np.zeros(size)
        nxt[1:] += 0.5 * cur[:-1]
        nxt[:-1] += 0.5 * cur[1:]
        cur = nxt
        out += weights[n] * cur
    big = max(K, n_max)
    return out[big - K:big + K + 1], tail


def srw_kernel(t: float, window, tolerance: float = 1e-12, closed: bool = True) -> SrwKernel:
    """Transition probabilities of the rate-(1,1) walk between sites of the window.

    ``closed`` suppresses jumps out of the window; otherwise entries are those of
    the walk on all of Z (rows then sum to at most 1).
    """
    lo, hi = _sites(window)
    if t < 0:
        raise InvalidArgumentError("t must be non-negative")
    n = hi - lo + 1
    if not closed:
        pmf, tail = srw_pmf(t, n - 1, tolerance)
        idx = np.arange(n)
        mat = pmf[(idx[None, :] - idx[:, None]) + (n - 1)]
        return SrwKernel(float(t), lo, hi, mat, tail, False)
    n_max, tail = _poisson_cutoff(JUMP_RATE * t, tolerance)
    weights = _poisson_weights(JUMP_RATE * t, n_max)
    cur = np.eye(n)
    out = weights[0] * cur
    for k in range(1, n_max + 1):
        nxt = np.empty_like(cur)
        # one step of the discrete chain: half the mass tries each side
        nxt[:, 1:] = 0.5 * cur[:, :-1]
        nxt[:, 0] = 0.5 * cur[:, 0]
        nxt[:, :-1] += 0.5 * cur[:, 1:]
        nxt[:, -1] += 0.5 * cur[:, -1]
        cur = nxt
        out += weights[k] * cur
    return SrwKernel(float(t), lo, hi, out, tail, True)


# ---------------------------------------------------------------- simulation

@njit(cache=True)
def _blocked_walk(start, steps, lo, hi, closed):
    pos = np.empty(steps.size, dtype=np.int64)
    p = start
    for i in range(steps.size):
        q = p + steps[i]
        if not closed or (lo <= q <= hi):
            p = q
        pos[i] = p
    return pos


@dataclass(frozen=True)
class IsrwSystem:
    starts: np.ndarray
    times: tuple
    positions: tuple
    lo: int
    hi: int
    T: float
    closed: bool

    @property
    def n_walkers(self) -> int:
        return int(self.starts.size)

    def positions_at(self, t: float) -> np.ndarray:
        if not 0 <= t <= self.T:
            raise InvalidArgumentError("time outside the simulated horizon")
        out = self.starts.copy()
        for i, (ts, ps) in enumerate(zip(self.times, self.positions)):
            n = int(np.searchsorted(ts, t, side="right"))
            if n:
                out[i] = ps[n - 1]
        return out

    def occupation(self, t: float) -> np.ndarray:
        """Walker counts per site of [lo, hi]; walkers outside are not counted."""
        pos = self.positions_at(t)
        pos = pos[(pos >= self.lo) & (pos <= self.hi)]
        return np.bincount(pos - self.lo, minlength=self.hi - self.lo + 1)

    def interval_count(self, a: int, b: int, t: float) -> int:
        pos = self.positions_at(t)
        return int(np.count_nonzero((pos >= a) & (pos < b)))


def simulate_isrw(eta_bar: Configuration, window, T: float, rng_seed: int, closed: bool = True) -> IsrwSystem:
    """One independent walker from every occupied site of ``eta_bar``."""
    lo, hi = _sites(window)
    if T < 0:
        raise InvalidArgumentError("T must be non-negative")
    rng = np.random.default_rng(np.uint64(rng_seed))
    starts = np.flatnonzero(eta_bar.values) + eta_bar.lo
    times, positions = [], []
    for z in starts.tolist():
        if closed and not lo <= z <= hi:
            raise OutOfWindowError(f"walker start {z} lies outside [{lo}, {hi}]")
        n = int(rng.poisson(JUMP_RATE * T))
        ts = np.sort(rng.random(n) * T)
        steps = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int64)
        times.append(ts)
        positions.append(_blocked_walk(z, steps, lo, hi, closed))
    return IsrwSystem(starts.astype(np.int64), tuple(times), tuple(positions), lo, hi, float(T), closed)


# ---------------------------------------------------------------- exact moments

def _walkers(eta: Configuration) -> list[int]:
    return (np.flatnonzero(eta.values) + eta.lo).tolist()


def _kernel_for(eta: Configuration, t: float, closed: bool, window, tol: float) -> SrwKernel:
    if window is None:
        window = (eta.lo, eta.hi)
    return srw_kernel(t, window, tol, closed)


def mean_isrw(eta_bar: Configuration, x: int, t: float, width: int, *, closed: bool = True, window=None,
              kernel: SrwKernel | None = None, tol: float = 1e-12) -> float:
    """E[number of walkers in [x, x + width) at time t]."""
    k = kernel or _kernel_for(eta_bar, t, closed, window, tol)
    return sum(k.interval_prob(z, x, x + width) for z in _walkers(eta_bar))


def exp_moment_isrw_exact(eta_bar: Configuration, x: int, t: float, width: int, lam: float, *,
                          closed: bool = True, window=None, kernel: SrwKernel | None = None,
                          tol: float = 1e-12) -> float:
    """E[exp(lam * walkers in [x, x + width) at time t)] = prod_z (1 + (e^lam - 1) P(S^z_t in I))."""
    k = kernel or _kernel_for(eta_bar, t, closed, window, tol)
    a = math.expm1(lam)
    out = 1.0
    for z in _walkers(eta_bar):
        out *= 1.0 + a * k.interval_prob(z, x, x + width)
    return out


def jensen_bound(eta_bar: Configuration, x: int, t: float, width: int, lam: float, **kw) -> float:
    """exp((e^lam - 1) * E[count]); dominates the product formula factor by factor."""
    return math.exp(math.expm1(lam) * mean_isrw(eta_bar, x, t, width, **kw))


MAX_EXACT_SITES = 10


@dataclass(frozen=True)
class SsepChain:
    """Exclusion process on a closed window, restricted to a fixed particle number."""

    n_sites: int
    states: np.ndarray
    index: dict
    step: np.ndarray

    @property
    def rate_bound(self) -> int:
        return self.n_sites - 1


def ssep_chain(n_sites: int, n_particles: int) -> SsepChain:
    if n_sites > MAX_EXACT_SITES:
        raise ResourceLimitError(f"exact evolution is limited to {MAX_EXACT_SITES} sites")
    if not 0 <= n_particles <= n_sites:
        raise InvalidArgumentError("particle number out of range")
    states = np.array(sorted(sum(1 << i for i in c) for c in itertools.combinations(range(n_sites), n_particles)),
                      dtype=np.int64)
    index = {int(s): i for i, s in enumerate(states)}
    m = states.size
    L = max(n_sites - 1, 1)
    P = np.zeros((m, m))
    for i, s in enumerate(states.tolist()):
        for e in range(n_sites - 1):
            a, b = (s >> e) & 1, (s >> (e + 1)) & 1
            if a != b:
                j = index[s ^ (0b11 << e)]
                P[i, j] += 1.0 / L
        P[i, i] += 1.0 - P[i].sum()
    return SsepChain(n_sites, states, index, P)


def _mask(eta: Configuration) -> int:
    return sum(1 << i for i, v in enumerate(eta.values.tolist()) if v)


def _evolve_function(chain: SsepChain, f: np.ndarray, t: float, tol: float) -> np.ndarray:
    """(e^{tQ} f) by uniformization, error <= tol * max|f|."""
    L = max(chain.n_sites - 1, 1)
    n_max, _ = _poisson_cutoff(L * t, tol)
    w = _poisson_weights(L * t, n_max)
    cur = f.astype(np.float64)
    out = w[0] * cur
    for n in range(1, n_max + 1):
        cur = chain.step @ cur
        out = out + w[n] * cur
    return out


def ssep_distribution(eta: Configuration, t: float, tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """(states as bitmasks over the window, probabilities at time t) starting from eta."""
    chain = ssep_chain(eta.values.size, eta.count())
    L = max(chain.n_sites - 1, 1)
    n_max, _ = _poisson_cutoff(L * t, tol)
    w = _poisson_weights(L * t, n_max)
    cur = np.zeros(chain.states.size)
    cur[chain.index[_mask(eta)]] = 1.0
    out = w[0] * cur
    for n in range(1, n_max + 1):
        cur = cur @ chain.step
        out = out + w[n] * cur
    return chain.states.copy(), out


def ssep_exp_moment_exact(eta: Configuration, x: int, t: float, width: int, lam: float,
                          tol: float = 1e-13) -> float:
    """E_eta[exp(lam * particles in [x, x + width) at time t)] on the closed window of eta."""
    n = eta.values.size
    if n > MAX_EXACT_SITES:
        raise ResourceLimitError(f"exact evolution is limited to {MAX_EXACT_SITES} sites")
    chain = ssep_chain(n, eta.count())
    a, b = max(x - eta.lo, 0), min(x + width - eta.lo, n)
    sel = sum(1 << i for i in range(a, b))
    counts = np.array([bin(int(s) & sel).count("1") for s in chain.states])
    f = np.exp(lam * counts)
    g = _evolve_function(chain, f, t, tol / max(float(f.max()), 1.0))
    return float(g[chain.index[_mask(eta)]])


@dataclass
class DominationReport:
    n_sites: int
    particle_budget: int
    t_set: tuple
    lam_set: tuple
    n_checked: int = 0
    violations: list = field(default_factory=list)
    max_excess: float = -math.inf
    single_particle_max_gap: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "particle_budget": self.particle_budget,
            "t_set": list(self.t_set),
            "lam_set": list(self.lam_set),
            "n_checked": self.n_checked,
            "n_violations": len(self.violations),
            "violations": self.violations[:20],
            "max_excess": self.max_excess,
            "single_particle_max_gap": self.single_particle_max_gap,
            "walker_jump_rate": JUMP_RATE,
        }


def domination_check(n_sites: int = 6, particle_budget: int = 3, t_set=(0.5, 1.0, 2.0),
                     lam_set=(0.25, 0.5, 1.0), slack: float = 1e-9) -> DominationReport:
    """Exclusion vs independent walkers, every configuration with at most ``particle_budget``
    particles on a closed window of ``n_sites`` sites and every interval of it."""
    rep = DominationReport(n_sites, particle_budget, tuple(t_set), tuple(lam_set))
    window = (0, n_sites - 1)
    kernels = {t: srw_kernel(t, window, 1e-14, closed=True) for t in t_set}
    for k in range(particle_budget + 1):
        chain = ssep_chain(n_sites, k)
        for occ in itertools.combinations(range(n_sites), k):
            vals = np.zeros(n_sites, dtype=np.int8)
            vals[list(occ)] = 1
            eta = Configuration(0, vals)
            start = chain.index[_mask(eta)]
            for t in t_set:
                for lam in lam_set:
                    for x in range(n_sites):
                        for width in range(1, n_sites - x + 1):
                            sel = sum(1 << i for i in range(x, x + width))
                            counts = np.array([bin(int(s) & sel).count("1") for s in chain.states])
                            f = np.exp(lam * counts)
                            lhs = float(_evolve_function(chain, f, t, 1e-14 / float(f.max()))[start])
                            rhs = exp_moment_isrw_exact(eta, x, t, width, lam, kernel=kernels[t])
                            rep.n_checked += 1
                            rep.max_excess = max(rep.max_excess, lhs - rhs)
                            if k == 1:
                                rep.single_particle_max_gap = max(rep.single_particle_max_gap, abs(lhs - rhs))
                            if lhs > rhs + slack:
                                rep.violations.append({"occupied": list(occ), "t": t, "lam": lam, "x": x,
                                                       "width": width, "lhs": lhs, "rhs": rhs})
    return rep


# ---------------------------------------------------------------- random walk facts

@dataclass
class SrwFactsReport:
    K2_tail: float
    tail: dict
    K1_tail: float
    tail_stable: bool
    smooth: dict
    K1_smooth: float
    smooth_stable: bool

    def as_dict(self) -> dict:
        return {
            "K2_tail": self.K2_tail,
            "tail": {str(k): v for k, v in self.tail.items()},
            "K1_tail": self.K1_tail,
            "tail_stable": self.tail_stable,
            "smooth": {str(k): v for k, v in self.smooth.items()},
            "K1_smooth": self.K1_smooth,
            "smooth_stable": self.smooth_stable,
        }


def srw_tail(t: float, tol: float = 1e-14) -> float:
    """P(|S_t| > 2 sqrt(t) log t)."""
    pmf, _ = srw_pmf(t, None, tol)
    K = pmf.size // 2
    a = 2.0 * math.sqrt(t) * math.log(t) if t > 0 else 0.0
    k = np.arange(-K, K + 1)
    return float(pmf[np.abs(k) > a].sum())


def srw_smoothing(t: float, tol: float = 1e-14) -> float:
    """t * max_k |P(S_t = k) - P(S_t = k + 1)|."""
    pmf, _ = srw_pmf(t, None, tol)
    return float(t * np.abs(np.diff(pmf)).max())


def srw_facts_check(t_set=(1, 4, 16, 64, 100, 256), K2: float = 0.5) -> SrwFactsReport:
    """Smallest constants for the Gaussian tail and local smoothing facts on a grid of times.

    The tail constant is K1 = max_t P(|S_t| > 2 sqrt(t) log t) e^{K2 (log t)^2} for the
    given K2; it is stable when the maximum is not at the largest t. The smoothing
    constant is stable when t * max |p_t(k) - p_t(k+1)| does not grow over the grid.
    """
    ts = sorted(t_set)
    tail = {t: srw_tail(t) for t in ts}
    scaled = {t: tail[t] * math.exp(K2 * math.log(t) ** 2) for t in ts}
    smooth = {t: srw_smoothing(t) for t in ts}
    K1_tail = max(scaled.values())
    K1_smooth = max(smooth.values())
    tail_stable = len(ts) < 2 or scaled[ts[-1]] < K1_tail or K1_tail == scaled[ts[0]]
    smooth_stable = len(ts) < 2 or smooth[ts[-1]] <= max(smooth[t] for t in ts[:-1]) * (1 + 1e-9)
    return SrwFactsReport(K2, tail, K1_tail, tail_stable, smooth, K1_smooth, smooth_stable)


# ---------------------------------------------------------------- moment bound at a block

@dataclass
class MomentBoundReport:
    parent: BlockId
    skipped: bool
    notice: str = ""
    rows: list = field(default_factory=list)
    bound: float = math.nan
    max_mean: float = math.nan
    tail_term_max: float = math.nan
    smoothing_term_max: float = math.nan
    terms_small: bool = False
    holds: bool = False

    @property
    def asserted(self) -> bool:
        """The comparison is a pass/fail check only when both intermediate terms are <= 1/2."""
        return not self.skipped and self.terms_small

    def as_dict(self) -> dict:
        return {
            "parent": [self.parent.r, self.parent.k, self.parent.s],
            "skipped": self.skipped,
            "notice": self.notice,
            "bound": self.bound,
            "max_mean": self.max_mean,
            "margin": self.bound - self.max_mean if not self.skipped else None,
            "tail_term_max": self.tail_term_max,
            "smoothing_term_max": self.smoothing_term_max,
            "terms_small": self.terms_small,
            "asserted": self.asserted,
            "holds": self.holds,
            "rows": self.rows,
        }


def moment_bound_check(schedule: ScaleSchedule, eta: Configuration, parent: BlockId, sample_grid,
                       K1_smooth: float | None = None) -> MomentBoundReport:
    """Expected walker count from the holes of ``eta`` at the parent's base time, for
    child-scale windows (x, t) of the parent's neighborhood, against 1 + rho_bar_{r+1} omega_r.

    ``eta`` must cover the base's sites; holes are assumed everywhere outside it, which
    can only raise the expectation. Reports the exact walker-escape term and the
    smoothing term of the argument next to the comparison.
    """
    d = check_block(parent, schedule)
    r = parent.r - 1
    if r < 1:
        raise InvalidArgumentError("parent must be at scale >= 2")
    base = geometry(parent, "base", schedule)
    nb = geometry(parent, "neighborhood", schedule)
    rep = MomentBoundReport(parent, False)
    if eta.lo > base.x_lo or eta.hi < base.x_hi - 1:
        raise OutOfWindowError("configuration does not cover the base")
    vals = eta.values[base.x_lo - eta.lo:base.x_hi - eta.lo]
    w1 = schedule.omega(r + 1)
    counts = np.convolve(vals.astype(np.int64), np.ones(w1, dtype=np.int64), mode="valid")
    if (counts < schedule.dense_min(r + 1)).any():
        rep.skipped = True
        rep.notice = "base is not dense at the parent scale; comparison skipped"
        return rep
    w = schedule.omega(r)
    rep.bound = 1.0 + schedule.rho_bar(r + 1) * w
    if K1_smooth is None:
        K1_smooth = srw_facts_check((d, 2 * d, 3 * d)).K1_smooth
    holes = 1 - vals.astype(np.int64)
    t0 = base.t_lo
    pmf_cache = {}
    means = []
    tail_terms, smooth_terms = [], []
    for x, t in sample_grid:
        if not (nb.x_lo <= x and x + w <= nb.x_hi and nb.t_lo <= t < nb.t_hi):
            raise InvalidArgumentError(f"({x}, {t}) is not a window of the neighborhood")
        tau = float(t - t0)
        if tau not in pmf_cache:
            pmf_cache[tau] = srw_pmf(tau, None, 1e-14)[0]
        pmf = pmf_cache[tau]
        K = pmf.size // 2
        # P(S^z_tau in [x, x+w)) as a function of the offset z
        cdf = np.concatenate(([0.0], np.cumsum(pmf)))

        def interval_from(z_arr):
            lo_k = np.clip(x - z_arr + K, 0, pmf.size)
            hi_k = np.clip(x + w - z_arr + K, 0, pmf.size)
            return cdf[hi_k] - cdf[lo_k]

        z_in = np.arange(base.x_lo, base.x_hi)
        inside = float((holes * interval_from(z_in)).sum())
        # holes everywhere outside the base: total hitting mass outside it
        z_all = np.arange(x - K - w, x + K + w + 1)
        outside_mask = (z_all < base.x_lo) | (z_all >= base.x_hi)
        outside = float(interval_from(z_all[outside_mask]).sum())
        mean = inside + outside
        # escape term: sum over y in the window of P(S^y_tau outside A)
        k_t = math.ceil(2 * math.sqrt(tau) * math.log(tau) / w1) if tau > 1 else 0
        a_lo, a_hi = x - k_t * w1, x + (k_t + 1) * w1
        ys = np.arange(x, x + w)
        esc = 0.0
        for y in ys.tolist():
            lo_k = a_lo - y + K
            hi_k = a_hi - y + K
            esc += 1.0 - (cdf[min(max(hi_k, 0), pmf.size)] - cdf[min(max(lo_k, 0), pmf.size)])
        smooth = w * (a_hi - a_lo) * K1_smooth * w1 / tau
        tail_terms.append(float(esc))
        smooth_terms.append(smooth)
        means.append(mean)
        rep.rows.append({"x": int(x), "t": int(t), "mean": mean, "bound": rep.bound,
                         "margin": rep.bound - mean, "tail_term": float(esc), "smoothing_term": smooth})
    rep.max_mean = max(means) if means else 0.0
    rep.tail_term_max = max(tail_terms) if tail_terms else 0.0
    rep.smoothing_term_max = max(smooth_terms) if smooth_terms else 0.0
    rep.terms_small = rep.tail_term_max <= 0.5 and rep.smoothing_term_max <= 0.5
    rep.holds = rep.max_mean <= rep.bound
    return rep


# ---------------------------------------------------------------- boundary paths

def _forced_path(field_: ArrowField, start: int, t0: float, t1: float, direction: int) -> list[tuple[float, int]]:
    """Path from (start, t0) that jumps across every arrow on its right edge (direction +1)
    or its left edge (direction -1) up to time t1; returns (time, new position) jumps."""
    w = field_.window
    y = start
    t = t0
    jumps = []
    while True:
        edge = y if direction > 0 else y - 1
        if edge < w.lo or edge >= w.hi:
            raise OutOfWindowError("boundary path left the simulated region")
        times = field_.edge_times(edge)
        i = int(np.searchsorted(times, t, side="right"))
        if i >= times.size or times[i] >= t1:
            return jumps
        t = float(times[i])
        y += direction
        jumps.append((t, y))


def _position(start: int, jumps, t: float) -> int:
    y = start
    for s, p in jumps:
        if s > t:
            break
        y = p
    return y


@dataclass
class BoundaryReport:
    parent: BlockId
    event_A: bool
    left_max: int
    right_min: int
    sigma_equal: bool | None
    n_windows: int
    n_mismatch: int

    def as_dict(self) -> dict:
        return {
            "parent": [self.parent.r, self.parent.k, self.parent.s],
            "event_A": self.event_A,
            "left_max": self.left_max,
            "right_min": self.right_min,
            "sigma_equal": self.sigma_equal,
            "n_windows": self.n_windows,
            "n_mismatch": self.n_mismatch,
        }


def boundary_path_check(traj: Trajectory, parent: BlockId, schedule: ScaleSchedule,
                        compare: bool = True) -> BoundaryReport:
    """Run the two one-sided paths from the outer corners of the parent's base and test
    whether they stay out of the neighborhood; when they do, compare the confined and
    full window counts on every child-scale window of the neighborhood."""
    d = check_block(parent, schedule)
    k, s = parent.k, parent.s
    nb = geometry(parent, "neighborhood", schedule)
    t0 = float(s - 2 * d)
    t1 = float(nb.t_hi)
    if t0 < 0 or t1 > traj.window.t_max:
        raise OutOfWindowError("parent superblock leaves the simulated horizon")
    left0, right0 = k - 5 * d, k + 6 * d - 1
    left = _forced_path(traj.field, left0, t0, t1, +1)
    right = _forced_path(traj.field, right0, t0, t1, -1)
    # both paths are monotone, so their extreme positions before t1 decide the event
    left_max = left[-1][1] if left else left0
    right_min = right[-1][1] if right else right0
    event = left_max < nb.x_lo and right_min >= nb.x_hi
    n_windows = n_mismatch = 0
    equal = None
    if compare and event:
        r = parent.r - 1
        w = schedule.omega(r)
        conf = confined_rows(traj, parent, schedule)
        lo = traj.window.lo
        full = traj.integer_grid()[nb.t_lo:nb.t_hi, nb.x_lo - lo:nb.x_hi - lo]
        a = _window_counts(conf, w)
        b = _window_counts(full, w)
        n_windows = int(a.size)
        n_mismatch = int(np.count_nonzero(a != b))
        equal = n_mismatch == 0
    return BoundaryReport(parent, event, int(left_max), int(right_min), equal, n_windows, n_mismatch)
