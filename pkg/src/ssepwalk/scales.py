"""Multiscale blocks over the space-time picture of the exclusion process.

Scale r uses windows of width omega_r = N0**r and square blocks of side
Delta_r = N0**(E*r). A window is dense at scale r when it holds at least
rho_r * omega_r particles, with 1 - rho_r = prod_{k<=r} (1 - N0**(-k/4)).

Coordinates are (space, time). All rectangles are half-open; trajectories start
at time 0, so callers place blocks high enough that every base lies at t >= 0.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import _kernels
from .core import ArrowField, Trajectory
from .errors import InvalidArgumentError, OutOfWindowError, ScheduleInfeasibleError
from .percolation import Polyline, blocks_intersected

KINDS = ("block", "superblock", "neighborhood", "base", "interior")


def _fourth_root(n: int) -> int | None:
    r = round(n ** 0.25)
    for c in (r - 1, r, r + 1):
        if c > 0 and c ** 4 == n:
            return c
    return None


@dataclass(frozen=True)
class ScaleSchedule:
    N0: int
    E: int = 6
    rho_minus: float = 0.5
    r_max: int = 4
    rho_bar_inf_lower: float = field(default=0.0, compare=False)
    rho_bar_inf_upper: float = field(default=1.0, compare=False)

    def omega(self, r: int) -> int:
        return self.N0 ** r

    def delta(self, r: int) -> int:
        return self.N0 ** (self.E * r)

    def eps(self, r: int) -> float:
        return math.exp(-self.delta(r))

    def rho_bar(self, r: int) -> float:
        return float(self._rho_bar_mp(r))

    def rho(self, r: int) -> float:
        return 1.0 - self.rho_bar(r)

    def _rho_bar_mp(self, r: int):
        with mpmath.workdps(60):
            out = mpmath.mpf(1)
            for k in range(1, r + 1):
                out *= 1 - mpmath.power(self.N0, mpmath.mpf(-k) / 4)
            return out

    def dense_min(self, r: int) -> int:
        """Smallest particle count c with c >= rho_r * omega_r (a window is rarefied iff count < this)."""
        if r == 0:
            return 0
        root = _fourth_root(self.N0)
        if root is not None:
            prod = Fraction(1)
            for k in range(1, r + 1):
                prod *= 1 - Fraction(1, root ** k)
            return math.ceil((1 - prod) * self.omega(r))
        with mpmath.workdps(120):
            bar = mpmath.mpf(1)
            for k in range(1, r + 1):
                bar *= 1 - mpmath.power(self.N0, mpmath.mpf(-k) / 4)
            target = (1 - bar) * self.omega(r)
            c = int(mpmath.ceil(target))
            if abs(target - mpmath.nint(target)) < mpmath.mpf(10) ** -100:
                raise ArithmeticError("density threshold numerically indistinguishable from an integer")
            return c

    def table(self) -> list[dict]:
        return [
            {
                "r": r,
                "omega": self.omega(r),
                "Delta": self.delta(r),
                "rho_bar": self.rho_bar(r),
                "rho": self.rho(r),
                "eps": self.eps(r),
                "dense_min": self.dense_min(r),
            }
            for r in range(1, self.r_max + 1)
        ]

    @property
    def knobs(self) -> tuple:
        return (self.N0, self.E, self.rho_minus, self.r_max)


def rho_bar_infinite_bounds(N0: int, tol: float = 1e-15) -> tuple[float, float, int]:
    """Certified bracket for prod_{k>=1} (1 - N0**(-k/4)).

    With q = N0**(-1/4), prod_{k>R} (1 - q^k) >= 1 - q^(R+1)/(1-q), so the truncated
    product P_R gives P_R * (1 - q^(R+1)/(1-q)) <= value <= P_R.
    """
    with mpmath.workdps(50):
        q = mpmath.power(N0, mpmath.mpf(-1) / 4)
        prod = mpmath.mpf(1)
        R = 0
        while True:
            R += 1
            prod *= 1 - q ** R
            tail = q ** (R + 1) / (1 - q)
            if tail < tol or R > 100_000:
                break
        lower = prod * (1 - tail)
        # round outward so the float bracket stays valid
        return float(mpmath.nstr(lower * (1 - mpmath.mpf(10) ** -14), 20)), float(prod * (1 + mpmath.mpf(10) ** -14)), R


def make_schedule(N0: int, E: int = 6, rho_minus: float = 0.5, r_max: int = 4) -> ScaleSchedule:
    if not isinstance(N0, (int, np.integer)) or N0 < 2:
        raise InvalidArgumentError("N0 must be an integer >= 2")
    if not isinstance(E, (int, np.integer)) or E < 1 or N0 ** E < 8:
        raise InvalidArgumentError("need N0**E >= 8 so that child superblocks fit in parent neighborhoods")
    if not 0.0 < rho_minus < 1.0:
        raise InvalidArgumentError("rho_minus must lie in (0, 1)")
    if r_max < 1:
        raise InvalidArgumentError("r_max must be >= 1")
    lower, upper, _ = rho_bar_infinite_bounds(int(N0))
    if lower < 1.0 - rho_minus:
        raise ScheduleInfeasibleError(
            f"infinite product {lower:.6g} is below 1 - rho_minus = {1 - rho_minus:.6g}", lower
        )
    return ScaleSchedule(int(N0), int(E), float(rho_minus), int(r_max), lower, upper)


DESK_SCHEDULE_KNOBS = dict(N0=2, E=3, rho_minus=0.9996, r_max=3)


def desk_schedule(r_max: int = 3) -> ScaleSchedule:
    return make_schedule(2, 3, 0.9996, r_max)


@dataclass(frozen=True)
class Rect:
    """Half-open [x_lo, x_hi) x [t_lo, t_hi); a zero-height rect is the time slice {t_lo}."""

    x_lo: int
    x_hi: int
    t_lo: int
    t_hi: int

    @property
    def is_slice(self) -> bool:
        return self.t_hi == self.t_lo

    def times(self) -> range:
        if self.is_slice:
            return range(self.t_lo, self.t_lo + 1)
        return range(self.t_lo, self.t_hi)

    def contains_rect(self, other: "Rect") -> bool:
        if not (self.x_lo <= other.x_lo and other.x_hi <= self.x_hi):
            return False
        if other.is_slice:
            t = other.t_lo
            return (self.t_lo <= t < self.t_hi) or (self.is_slice and t == self.t_lo)
        return self.t_lo <= other.t_lo and other.t_hi <= self.t_hi


@dataclass(frozen=True, order=True)
class BlockId:
    r: int
    k: int
    s: int


def check_block(id: BlockId, schedule: ScaleSchedule) -> int:
    d = schedule.delta(id.r)
    if id.r < 1 or id.k % d or id.s % d:
        raise InvalidArgumentError(f"{id} is not a block corner at scale {id.r}")
    return d


def geometry(id: BlockId, kind: str, schedule: ScaleSchedule) -> Rect:
    d = check_block(id, schedule)
    k, s = id.k, id.s
    if kind == "block":
        return Rect(k, k + d, s, s + d)
    if kind == "superblock":
        return Rect(k - 5 * d, k + 6 * d, s - 2 * d, s + d)
    if kind == "neighborhood":
        return Rect(k - d, k + 2 * d, s - d, s + d)
    if kind == "base":
        return Rect(k - 5 * d, k + 6 * d, s - 2 * d, s - 2 * d)
    if kind == "interior":
        return Rect(k - 5 * d + 1, k + 6 * d - 1, s - 2 * d, s + d)
    raise InvalidArgumentError(f"unknown geometry kind {kind!r}")


def block_of(r: int, x: float, t: float, schedule: ScaleSchedule) -> BlockId:
    d = schedule.delta(r)
    return BlockId(r, math.floor(x / d) * d, math.floor(t / d) * d)


def parent_of(id: BlockId, schedule: ScaleSchedule) -> BlockId:
    return block_of(id.r + 1, id.k, id.s, schedule)


def partition_class(id: BlockId, schedule: ScaleSchedule) -> tuple[int, int]:
    """Residue class ((k/Delta) mod 11, (s/Delta) mod 3); 33 classes."""
    d = check_block(id, schedule)
    return ((id.k // d) % 11, (id.s // d) % 3)


def stuck_partition_class(id: BlockId, schedule: ScaleSchedule) -> str:
    d = check_block(id, schedule)
    return "odd" if (id.k // d) % 2 else "even"


def rects_disjoint(a: Rect, b: Rect) -> bool:
    return a.x_hi <= b.x_lo or b.x_hi <= a.x_lo or a.t_hi <= b.t_lo or b.t_hi <= a.t_lo


# ---------------------------------------------------------------- bounds checks

def _check_region(traj: Trajectory, region: Rect, headroom: float = 0.0) -> None:
    w = traj.window
    if region.x_lo < w.lo or region.x_hi - 1 > w.hi:
        raise OutOfWindowError(f"region {region} leaves the simulated sites [{w.lo}, {w.hi}]")
    times = region.times()
    if len(times) and (times[0] < 0 or times[-1] + headroom > w.t_max):
        raise OutOfWindowError(f"region {region} leaves the simulated horizon [0, {w.t_max}]")


def _grid_rows(traj: Trajectory, region: Rect) -> np.ndarray:
    grid = traj.integer_grid()
    lo = traj.window.lo
    t = region.times()
    return grid[t.start:t.stop, region.x_lo - lo:region.x_hi - lo]


def _window_counts(rows: np.ndarray, width: int) -> np.ndarray:
    c = np.zeros((rows.shape[0], rows.shape[1] + 1), dtype=np.int64)
    np.cumsum(rows, axis=1, out=c[:, 1:])
    return c[:, width:] - c[:, :-width]


# ---------------------------------------------------------------- occupancy counts

def window_sum(traj: Trajectory, x: int, t: float, r: int, schedule: ScaleSchedule) -> int:
    w = schedule.omega(r)
    win = traj.window
    if x < win.lo or x + w - 1 > win.hi:
        raise OutOfWindowError(f"window [{x}, {x + w}) leaves the simulated region")
    if float(t).is_integer() and 0 <= t <= win.t_max:
        row = traj.integer_grid()[int(t)]
    else:
        row = traj.config_at(t)
    return int(row[x - win.lo:x - win.lo + w].sum())


def is_rarefied(traj: Trajectory, region: Rect, r: int, schedule: ScaleSchedule) -> bool:
    w = schedule.omega(r)
    if region.x_hi - region.x_lo < w or len(region.times()) == 0:
        return False
    _check_region(traj, region)
    counts = _window_counts(_grid_rows(traj, region), w)
    return bool((counts < schedule.dense_min(r)).any())


def rarefied_windows(traj: Trajectory, region: Rect, r: int, schedule: ScaleSchedule) -> list[tuple[int, int]]:
    """All (x, t) whose window witnesses rarefaction inside the region."""
    w = schedule.omega(r)
    if region.x_hi - region.x_lo < w or len(region.times()) == 0:
        return []
    _check_region(traj, region)
    counts = _window_counts(_grid_rows(traj, region), w)
    ts, xs = np.nonzero(counts < schedule.dense_min(r))
    t0 = region.times().start
    return [(int(x) + region.x_lo, int(t) + t0) for t, x in zip(ts, xs)]


def is_turbulent(traj: Trajectory, region: Rect, r: int, schedule: ScaleSchedule) -> bool:
    """Some integer point of the region changes occupancy within time (0, eps_r)."""
    eps = schedule.eps(r)
    _check_region(traj, region, headroom=eps)
    field_ = traj.field
    lo = traj.window.lo
    grid = traj.integer_grid()
    a_site, b_site = region.x_lo - lo, region.x_hi - lo
    for t in region.times():
        a = field_.rank(t)
        b = field_.rank_before(t + eps)
        if b <= a:
            continue
        e = field_.edges[a:b]
        if not ((e >= a_site - 1) & (e < b_site)).any():
            continue
        if _kernels.flip_sites(grid[t], field_.edges, a, b, a_site, b_site):
            return True
    return False


def point_is_stuck(field_: ArrowField, x: int, t: float, eps: float) -> bool:
    ringing = field_.edges_between(t, t + eps)
    return not bool(((ringing == x - 1) | (ringing == x)).any())


def is_stuck(field_: ArrowField, id: BlockId, schedule: ScaleSchedule) -> bool:
    d = check_block(id, schedule)
    eps = schedule.eps(id.r)
    w = field_.window
    if id.k - 1 < w.lo or id.k + d > w.hi:
        raise OutOfWindowError(f"{id} needs edges outside the simulated region")
    if id.s < 0 or id.s + d - 1 + eps > w.t_max:
        raise OutOfWindowError(f"{id} needs times outside [0, {w.t_max}]")
    for t in range(id.s, id.s + d):
        ringing = field_.edges_between(t, t + eps)
        if ((ringing >= id.k - 1) & (ringing <= id.k + d - 1)).any():
            return False
    return True


def is_bad(traj: Trajectory, id: BlockId, schedule: ScaleSchedule) -> bool:
    return is_rarefied(traj, geometry(id, "superblock", schedule), id.r, schedule)


def confined_rows(traj: Trajectory, parent: BlockId, schedule: ScaleSchedule) -> np.ndarray:
    """Occupancy on the parent's neighborhood counting only particles confined to its interior.

    Row j is integer time s - Delta + j, column c is site k - Delta + c.
    """
    key = ("confined", parent, schedule.knobs)
    cached = traj.cache.get(key)
    if cached is not None:
        return cached
    d = check_block(parent, schedule)
    sup = geometry(parent, "superblock", schedule)
    _check_region(traj, sup)
    inner = geometry(parent, "interior", schedule)
    nb = geometry(parent, "neighborhood", schedule)
    lo = traj.window.lo
    base_t = parent.s - 2 * d
    field_ = traj.field
    row_ranks = np.searchsorted(field_.times, np.arange(nb.t_lo, nb.t_hi, dtype=np.float64), side="right")
    rows = _kernels.confined_rows(
        traj.integer_grid()[base_t].copy(), field_.edges, field_.rank(base_t), row_ranks.astype(np.int64),
        inner.x_lo - lo, inner.x_hi - lo, nb.x_lo - lo, nb.x_hi - lo,
    )
    rows.setflags(write=False)
    traj.cache[key] = rows
    return rows


def hat_sigma(traj: Trajectory, parent: BlockId, x: int, t: int, schedule: ScaleSchedule) -> int:
    """Particles in the child-scale window [x, x + omega_{r}) at integer time t whose stirring
    path stayed inside the parent's interior since the parent's base time (r = parent.r - 1)."""
    r = parent.r - 1
    w = schedule.omega(r)
    nb = geometry(parent, "neighborhood", schedule)
    if not float(t).is_integer():
        raise InvalidArgumentError("confined counts are defined at integer times")
    t = int(t)
    if not (nb.x_lo <= x and x + w <= nb.x_hi and nb.t_lo <= t < nb.t_hi):
        raise InvalidArgumentError(f"window at ({x}, {t}) is not inside the neighborhood {nb}")
    rows = confined_rows(traj, parent, schedule)
    c = x - nb.x_lo
    return int(rows[t - nb.t_lo, c:c + w].sum())


def base_is_dense(traj: Trajectory, id: BlockId, schedule: ScaleSchedule) -> bool:
    return not is_rarefied(traj, geometry(id, "base", schedule), id.r, schedule)


def is_locally_spoiled(traj: Trajectory, id: BlockId, schedule: ScaleSchedule) -> bool:
    """Dense base at scale id.r, yet some child-scale window of the neighborhood is
    under-filled by particles confined to the interior."""
    check_block(id, schedule)
    _check_region(traj, geometry(id, "superblock", schedule))
    if not base_is_dense(traj, id, schedule):
        return False
    r = id.r - 1
    need = schedule.dense_min(r)
    if need == 0:
        return False
    rows = confined_rows(traj, id, schedule)
    counts = _window_counts(rows, schedule.omega(r))
    return bool((counts < need).any())


@dataclass(frozen=True)
class BlockVerdict:
    id: BlockId
    rarefied: bool
    turbulent: bool
    bad: bool
    locally_spoiled: bool
    stuck: bool

    @property
    def rough(self) -> bool:
        return self.rarefied or self.turbulent

    def row(self) -> list:
        return [self.id.r, self.id.k, self.id.s, int(self.rarefied), int(self.turbulent), int(self.bad),
                int(self.locally_spoiled), int(self.stuck)]


def classify(traj: Trajectory, id: BlockId, schedule: ScaleSchedule) -> BlockVerdict:
    key = ("verdict", id, schedule.knobs)
    got = traj.cache.get(key)
    if got is not None:
        return got
    rect = geometry(id, "block", schedule)
    v = BlockVerdict(
        id,
        is_rarefied(traj, rect, id.r, schedule),
        is_turbulent(traj, rect, id.r, schedule),
        is_bad(traj, id, schedule),
        is_locally_spoiled(traj, id, schedule),
        is_stuck(traj.field, id, schedule),
    )
    traj.cache[key] = v
    return v


def write_verdicts_csv(path, verdicts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "k", "s", "rarefied", "turbulent", "bad", "locally_spoiled", "stuck"])
        for v in verdicts:
            w.writerow(v.row())


# ---------------------------------------------------------------- path counters

def path_blocks(path: Polyline, r: int, schedule: ScaleSchedule) -> list[BlockId]:
    d = schedule.delta(r)
    return [BlockId(r, i * d, j * d) for i, j in sorted(blocks_intersected(path, d, 2))]


def _kind_test(kind: str):
    tests = {
        "rarefied": lambda tr, b, sc: is_rarefied(tr, geometry(b, "block", sc), b.r, sc),
        "turbulent": lambda tr, b, sc: is_turbulent(tr, geometry(b, "block", sc), b.r, sc),
        "bad": is_bad,
        "locally_spoiled": is_locally_spoiled,
        "not_stuck": lambda tr, b, sc: not is_stuck(tr.field, b, sc),
        "rough": lambda tr, b, sc: is_rarefied(tr, geometry(b, "block", sc), b.r, sc)
        or is_turbulent(tr, geometry(b, "block", sc), b.r, sc),
    }
    if kind not in tests:
        raise InvalidArgumentError(f"unknown block kind {kind!r}")
    return tests[kind]


def path_counts(path: Polyline, traj: Trajectory, r: int, kind: str, schedule: ScaleSchedule) -> int:
    test = _kind_test(kind)
    memo = traj.cache.setdefault(("kind", kind, schedule.knobs), {})
    n = 0
    for b in path_blocks(path, r, schedule):
        if b not in memo:
            memo[b] = bool(test(traj, b, schedule))
        n += memo[b]
    return n


@dataclass
class RecursionReport:
    r: int
    n_children: int = 0
    n_bad_children: int = 0
    n_parent_bad: int = 0
    n_parent_spoiled_only: int = 0
    counterexamples: list = field(default_factory=list)
    path_checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples and all(c["ok"] for c in self.path_checks)

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "n_children": self.n_children,
            "n_bad_children": self.n_bad_children,
            "n_parent_bad": self.n_parent_bad,
            "n_parent_spoiled_only": self.n_parent_spoiled_only,
            "counterexamples": [list(map(int, (c.r, c.k, c.s))) for c in self.counterexamples],
            "path_checks": self.path_checks,
            "ok": self.ok,
        }


def blocks_in(region: Rect, r: int, schedule: ScaleSchedule) -> list[BlockId]:
    d = schedule.delta(r)
    k0 = -(-region.x_lo // d) * d
    s0 = -(-region.t_lo // d) * d
    return [
        BlockId(r, k, s)
        for s in range(s0, region.t_hi - d + 1, d)
        for k in range(k0, region.x_hi - d + 1, d)
    ]


def recursion_check(traj: Trajectory, region: Rect, r: int, schedule: ScaleSchedule, paths=()) -> RecursionReport:
    """Every bad r-block inside ``region`` must sit in a bad or locally spoiled (r+1)-block;
    along each supplied path, Phi_r <= N0**(2E) * (Phi_{r+1} + Psi_{r+1})."""
    if r + 1 > schedule.r_max:
        raise InvalidArgumentError("parent scale exceeds the schedule")
    rep = RecursionReport(r)
    for child in blocks_in(region, r, schedule):
        rep.n_children += 1
        if not is_bad(traj, child, schedule):
            continue
        rep.n_bad_children += 1
        parent = parent_of(child, schedule)
        if is_bad(traj, parent, schedule):
            rep.n_parent_bad += 1
        elif is_locally_spoiled(traj, parent, schedule):
            rep.n_parent_spoiled_only += 1
        else:
            rep.counterexamples.append(child)
    factor = schedule.N0 ** (2 * schedule.E)
    for p in paths:
        phi = path_counts(p, traj, r, "bad", schedule)
        phi_up = path_counts(p, traj, r + 1, "bad", schedule)
        psi_up = path_counts(p, traj, r + 1, "locally_spoiled", schedule)
        rep.path_checks.append(
            {"phi_r": phi, "phi_r1": phi_up, "psi_r1": psi_up, "ok": phi <= factor * (phi_up + psi_up)}
        )
    return rep


# ---------------------------------------------------------------- walk diagnostics

def walk_polyline(path, t_end: float | None = None) -> Polyline:
    """Space-time path of a walk: vertical while waiting, unit horizontal steps at jumps."""
    t_end = path.T if t_end is None else float(t_end)
    verts = [(0.0, 0.0)]
    x = 0
    for t, a in zip(path.times.tolist(), path.after.tolist()):
        if t > t_end:
            break
        verts.append((float(x), t))
        verts.append((float(a), t))
        x = a
    verts.append((float(x), t_end))
    return Polyline(tuple(verts))


@dataclass(frozen=True)
class ThetaReport:
    theta: int
    rough_blocks_on_path: int
    bound: int
    visited_blocks: int

    @property
    def ok(self) -> bool:
        return self.theta <= self.bound


def theta_star(path, traj: Trajectory, r_star: int, schedule: ScaleSchedule, t: float | None = None) -> ThetaReport:
    """Integer times s <= t at which the r*-block containing (W_s, s) is rough, with the bound
    Delta_{r*} * (rarefied + turbulent blocks met by the walk's space-time path)."""
    t = path.T if t is None else float(t)
    n = int(math.floor(t))
    test = _kind_test("rough")
    memo = traj.cache.setdefault(("kind", "rough", schedule.knobs), {})

    def rough(b):
        if b not in memo:
            memo[b] = bool(test(traj, b, schedule))
        return memo[b]

    pos = path.positions(np.arange(n + 1, dtype=np.float64))
    theta = 0
    for s in range(n + 1):
        theta += rough(block_of(r_star, int(pos[s]), s, schedule))
    poly = walk_polyline(path, t)
    visited = path_blocks(poly, r_star, schedule)
    n_rar = path_counts(poly, traj, r_star, "rarefied", schedule)
    n_turb = path_counts(poly, traj, r_star, "turbulent", schedule)
    d = schedule.delta(r_star)
    return ThetaReport(theta, n_rar + n_turb, d * (n_rar + n_turb), len(visited))
