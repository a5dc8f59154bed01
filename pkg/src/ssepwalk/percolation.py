"""Block percolation: open/closed fields of Delta-blocks and path counting.

A block with index k (an integer vector) is the half-open cube prod [k_i*Delta, (k_i+1)*Delta).
Polylines are intersected with blocks exactly: floats decide the generic cases and
rational arithmetic takes over whenever a crossing lies near a grid line or corner.
"""
from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import _tour
from .errors import DomainError, InvalidArgumentError, ResourceLimitError


@dataclass(frozen=True)
class Polyline:
    vertices: tuple

    def __post_init__(self):
        verts = tuple(tuple(v) for v in self.vertices)
        if not verts:
            raise InvalidArgumentError("a polyline needs at least one vertex")
        d = len(verts[0])
        if any(len(v) != d for v in verts):
            raise InvalidArgumentError("all vertices must have the same dimension")
        object.__setattr__(self, "vertices", verts)

    @property
    def d(self) -> int:
        return len(self.vertices[0])

    @property
    def length(self) -> float:
        return sum(math.dist(map(float, a), map(float, b)) for a, b in zip(self.vertices, self.vertices[1:]))

    def segments(self):
        if len(self.vertices) == 1:
            yield self.vertices[0], self.vertices[0]
        else:
            yield from zip(self.vertices, self.vertices[1:])

    def translated(self, offset) -> "Polyline":
        return Polyline(tuple(tuple(a + b for a, b in zip(v, offset)) for v in self.vertices))


def _q(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _floor_div(v, delta) -> int:
    # exact floor(v / delta) for ints, floats and Fractions
    if isinstance(v, Fraction) or isinstance(delta, Fraction):
        return math.floor(_q(v) / _q(delta))
    return int(v // delta)


def _closure_indices(q: Fraction) -> tuple[int, ...]:
    f = math.floor(q)
    return (f - 1, f) if q == f else (f,)


def _segment_blocks(a, b, delta, closure: bool) -> set:
    d = len(a)
    axis_aligned = sum(1 for i in range(d) if a[i] != b[i]) <= 1
    if axis_aligned and not closure and not any(isinstance(v, Fraction) for v in (*a, *b, delta)):
        # fast exact path: only one coordinate varies
        base = [_floor_div(v, delta) for v in a]
        out = {tuple(base)}
        for i in range(d):
            if a[i] != b[i]:
                lo_i = _floor_div(min(a[i], b[i]), delta)
                hi_i = _floor_div(max(a[i], b[i]), delta)
                for j in range(lo_i, hi_i + 1):
                    base[i] = j
                    out.add(tuple(base))
        return out
    if not closure:
        got = _segment_blocks_float(a, b, delta)
        if got is not None:
            return got
    A = [_q(v) for v in a]
    B = [_q(v) for v in b]
    D = _q(delta)
    us = {Fraction(0), Fraction(1)}
    for i in range(d):
        if A[i] != B[i]:
            lo_i, hi_i = sorted((A[i], B[i]))
            for m in range(math.ceil(lo_i / D), math.floor(hi_i / D) + 1):
                us.add((m * D - A[i]) / (B[i] - A[i]))
    us = sorted(u for u in us if 0 <= u <= 1)
    samples = list(us) + [(u + v) / 2 for u, v in zip(us, us[1:])]
    out = set()
    for u in samples:
        p = [A[i] + u * (B[i] - A[i]) for i in range(d)]
        if closure:
            out.update(itertools.product(*(_closure_indices(c / D) for c in p)))
        else:
            out.add(tuple(math.floor(c / D) for c in p))
    return out


_GUARD = 1e-9


def _segment_blocks_float(a, b, delta):
    """Float version of the half-open case; None when a crossing or an endpoint lies too
    close to a grid line or to another crossing for floats to decide it. Endpoints
    exactly on a grid line are decided exactly."""
    if any(isinstance(v, Fraction) for v in (*a, *b, delta)):
        return None
    d = len(a)
    delta = float(delta)
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    scale = max(1.0, max(abs(v) for v in (*a, *b)) / delta)
    tol = _GUARD * scale
    for v in (*a, *b):
        q = v / delta
        if q != math.floor(q) and abs(q - round(q)) < tol:
            return None
    us = []
    for i in range(d):
        ai, bi = a[i], b[i]
        if ai != bi:
            lo_i, hi_i = sorted((ai, bi))
            for m in range(math.ceil(lo_i / delta), math.floor(hi_i / delta) + 1):
                if m * delta in (ai, bi):
                    continue
                us.append((m * delta - ai) / (bi - ai))
    us = [0.0, *sorted(us), 1.0]
    if any(v - u < tol for u, v in zip(us, us[1:])):
        return None
    out = {tuple(math.floor(v / delta) for v in a), tuple(math.floor(v / delta) for v in b)}
    for u, v in zip(us, us[1:]):
        mid = (u + v) / 2
        out.add(tuple(math.floor((a[i] + mid * (b[i] - a[i])) / delta) for i in range(d)))
    return out


def blocks_intersected(w: Polyline, delta, d: int | None = None) -> set:
    """Indices of the half-open Delta-blocks met by the polyline (corner = index * Delta)."""
    if d is not None and w.d != d:
        raise InvalidArgumentError(f"polyline has dimension {w.d}, expected {d}")
    if w.d not in (1, 2, 3):
        raise InvalidArgumentError("only dimensions 1 to 3 are supported")
    if not delta > 0:
        raise InvalidArgumentError("block size must be positive")
    out = set()
    for a, b in w.segments():
        out |= _segment_blocks(a, b, delta, closure=False)
    return out


def blocks_touched(w: Polyline, delta) -> set:
    """Indices of blocks whose closure meets the polyline."""
    out = set()
    for a, b in w.segments():
        out |= _segment_blocks(a, b, delta, closure=True)
    return out


@dataclass(frozen=True)
class PercSystem:
    """Open/closed field on the box of block indices lo <= k < lo + shape."""

    d: int
    delta: float
    lo: tuple
    open: np.ndarray
    labels: np.ndarray | None = None
    p: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.open, dtype=bool)
        if arr.ndim != self.d or len(self.lo) != self.d:
            raise InvalidArgumentError("field shape does not match the dimension")
        arr.setflags(write=False)
        object.__setattr__(self, "open", arr)
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != arr.shape:
                raise InvalidArgumentError("labels must cover every block")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def shape(self) -> tuple:
        return self.open.shape

    @property
    def hi(self) -> tuple:
        return tuple(a + n for a, n in zip(self.lo, self.shape))

    def contains(self, k) -> bool:
        return all(a <= v < b for v, a, b in zip(k, self.lo, self.hi))

    def is_open(self, k) -> bool:
        if not self.contains(k):
            raise DomainError(f"block {k} outside the materialized domain")
        return bool(self.open[tuple(v - a for v, a in zip(k, self.lo))])

    def open_blocks(self) -> list[tuple]:
        return [tuple(int(v) + a for v, a in zip(idx, self.lo)) for idx in np.argwhere(self.open)]

    def blocks(self) -> Iterable[tuple]:
        return itertools.product(*(range(a, b) for a, b in zip(self.lo, self.hi)))

    def with_open(self, extra: Iterable) -> "PercSystem":
        arr = self.open.copy()
        for k in extra:
            if not self.contains(k):
                raise DomainError(f"block {k} outside the materialized domain")
            arr[tuple(v - a for v, a in zip(k, self.lo))] = True
        return PercSystem(self.d, self.delta, self.lo, arr, self.labels, self.p)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"k{i}" for i in range(self.d)] + ["open", "label"])
            for k in self.blocks():
                idx = tuple(v - a for v, a in zip(k, self.lo))
                label = "" if self.labels is None else int(self.labels[idx])
                w.writerow([v * self.delta for v in k] + [int(self.open[idx]), label])

    @classmethod
    def from_csv(cls, path, delta) -> "PercSystem":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, rows = rows[0], rows[1:]
        d = len(header) - 2
        ks = [tuple(round(float(r[i]) / delta) for i in range(d)) for r in rows]
        lo = tuple(min(k[i] for k in ks) for i in range(d))
        hi = tuple(max(k[i] for k in ks) + 1 for i in range(d))
        arr = np.zeros(tuple(b - a for a, b in zip(lo, hi)), dtype=bool)
        has_labels = all(r[d + 1] != "" for r in rows)
        labels = np.zeros(arr.shape, dtype=np.int64) if has_labels else None
        for k, r in zip(ks, rows):
            idx = tuple(v - a for v, a in zip(k, lo))
            arr[idx] = r[d] == "1"
            if has_labels:
                labels[idx] = int(r[d + 1])
        return cls(d, delta, lo, arr, labels)


def sample_pps(d: int, delta: float, p: float, lo: Sequence[int], shape: Sequence[int], rng_seed: int,
               labels: np.ndarray | None = None) -> PercSystem:
    """Homogeneous field: every block open independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError("p must lie in [0, 1]")
    rng = np.random.default_rng(np.uint64(rng_seed))
    return PercSystem(d, delta, tuple(lo), rng.random(tuple(shape)) < p, labels, p)


def psi(w: Polyline, sys: PercSystem) -> int:
    n = 0
    for k in blocks_intersected(w, sys.delta, sys.d):
        n += sys.is_open(k)
    return n


# ---------------------------------------------------------------- sup oracle

@dataclass(frozen=True)
class SupResult:
    value: int
    witness: Polyline
    witness_psi: int
    tight: bool
    nodes: int

    @property
    def attained(self) -> bool:
        return self.witness_psi == self.value


def _closure_dist(box, pt=(0.0, 0.0)) -> float:
    x0, x1, y0, y1 = box
    dx = max(x0 - pt[0], 0.0, pt[0] - x1)
    dy = max(y0 - pt[1], 0.0, pt[1] - y1)
    return math.hypot(dx, dy)


def _domain_box(sys: PercSystem, domain):
    if domain is None:
        return sys.lo, sys.hi
    lo, hi = domain
    lo, hi = tuple(lo), tuple(hi)
    if not (all(a >= b for a, b in zip(lo, sys.lo)) and all(a <= b for a, b in zip(hi, sys.hi))):
        raise DomainError("requested domain exceeds the materialized field")
    return lo, hi


def psi_sup_oracle(ell: float, sys: PercSystem, domain=None, max_blocks: int = 1000,
                   max_nodes: int = 2_000_000, tol: float = 1e-9) -> SupResult:
    """Largest number of open blocks a path of length <= ell from the origin can meet,
    over paths staying in the domain box.

    Depth-first search over ordered sequences of open blocks. A sequence is admissible
    when the shortest path from the origin touching the closed blocks in that order has
    length <= ell (certified bounds from the touring solver). Since dropping stops never
    lengthens a tour, children that are infeasible now stay infeasible deeper down,
    which gives the pruning bound |stops| + |feasible children|.

    Closed blocks are used, so the value is the right limit of the half-open count
    at ell; the two agree unless some optimal tour has length exactly ell. The
    witness is pushed into the half-open blocks when there is slack, and ``tight``
    reports when there was none.
    """
    if sys.d != 2:
        raise InvalidArgumentError("the exact oracle is implemented for d = 2")
    if ell < 0:
        raise InvalidArgumentError("ell must be non-negative")
    lo, hi = _domain_box(sys, domain)
    n_blocks = math.prod(b - a for a, b in zip(lo, hi))
    if n_blocks > max_blocks:
        raise ResourceLimitError(f"domain has {n_blocks} blocks, cap is {max_blocks}")
    if not all(a <= 0 < b for a, b in zip(lo, hi)):
        raise DomainError("the domain must contain the origin block")
    L = ell / sys.delta
    cands = []
    for k in itertools.product(*(range(a, b) for a, b in zip(lo, hi))):
        if sys.is_open(k):
            box = (float(k[0]), k[0] + 1.0, float(k[1]), k[1] + 1.0)
            dist = _closure_dist(box)
            if dist <= L + tol:
                cands.append((dist, k, box))
    cands.sort()
    keys = [c[1] for c in cands]
    boxes = np.array([c[2] for c in cands], dtype=np.float64).reshape(-1, 4)
    n = len(keys)
    best = {"value": 0, "seq": (), "pts": np.empty((0, 2)), "len": 0.0}
    nodes = 0
    stats = {"conic": 0}

    def feasible(seq_idx):
        b = boxes[list(seq_idx)]
        if _tour.chain_bound(0.0, 0.0, b) > L + tol:
            return False, math.inf, None
        up, pts = _tour.tour(0.0, 0.0, b)
        if up <= L + tol:
            return True, up, pts
        if _tour.lower_bound(0.0, 0.0, b, pts) > L + tol or _tour.dual_ascent(0.0, 0.0, b, pts, L + tol) > L + tol:
            return False, up, pts
        stats["conic"] += 1
        up, low, pts = _tour.certified_tour((0.0, 0.0), b)
        return low <= L + tol, up, pts

    def dfs(seq, used, length, pts):
        nonlocal nodes
        nodes += 1
        if nodes > max_nodes:
            raise ResourceLimitError("search node cap exceeded")
        if len(seq) > best["value"]:
            best.update(value=len(seq), seq=tuple(seq), pts=pts, len=length)
            if best["value"] == n:
                return
        children = []
        for j in range(n):
            if used[j]:
                continue
            ok, up, cpts = feasible(seq + [j])
            if ok:
                children.append((up, j, cpts))
        if len(seq) + len(children) <= best["value"]:
            return
        children.sort(key=lambda c: c[0])
        for up, j, cpts in children:
            used[j] = True
            dfs(seq + [j], used, up, cpts)
            used[j] = False
            if best["value"] == n:
                return

    dfs([], [False] * n, 0.0, np.empty((0, 2)))
    witness, wpsi, tight = _witness(best["pts"], best["seq"], boxes, best["len"], L, sys, best["value"])
    return SupResult(best["value"], witness, wpsi, tight, nodes)


def _witness(pts, seq, boxes, length, L, sys: PercSystem, value):
    """Polyline through the touch points, with short detours into each block interior
    when the length budget allows, so that the half-open count reaches ``value``."""
    delta = sys.delta
    verts = [(0.0, 0.0)]
    slack = L - length
    m = len(seq)
    eta = min(1e-3, slack / (2 * m + 2)) if m and slack > 0 else 0.0
    for (x, y), j in zip(pts, seq):
        verts.append((x, y))
        if eta > 0:
            cx = 0.5 * (boxes[j, 0] + boxes[j, 1])
            cy = 0.5 * (boxes[j, 2] + boxes[j, 3])
            r = math.hypot(cx - x, cy - y)
            if r > 0:
                verts.append((x + eta * (cx - x) / r, y + eta * (cy - y) / r))
                verts.append((x, y))
    poly = Polyline(tuple((a * delta, b * delta) for a, b in verts))
    got = psi(poly, sys) if _inside(poly, sys) else -1
    return poly, got, got < value


def _inside(poly: Polyline, sys: PercSystem) -> bool:
    try:
        for k in blocks_intersected(poly, sys.delta, sys.d):
            if not sys.contains(k):
                return False
    except DomainError:
        return False
    return True


def psi_sup_lattice(ell: float, sys: PercSystem, domain=None, tol: float = 1e-9) -> int:
    """Exhaustive enumeration over polylines whose vertices are block corners.

    Counts open blocks whose closure meets the path. From a corner, the nearest point
    of any closed block is again a corner, so corner paths reach every touch pattern
    that needs no bends off the lattice.
    """
    if sys.d != 2:
        raise InvalidArgumentError("lattice enumeration is implemented for d = 2")
    lo, hi = _domain_box(sys, domain)
    L = ell / sys.delta
    pts = [(x, y) for x in range(lo[0], hi[0] + 1) for y in range(lo[1], hi[1] + 1) if math.hypot(x, y) <= L + tol]
    open_set = {k for k in itertools.product(range(lo[0], hi[0]), range(lo[1], hi[1])) if sys.is_open(k)}

    @lru_cache(maxsize=None)
    def seg_touch(a, b):
        return frozenset(k for k in blocks_touched(Polyline((a, b)), 1) if k in open_set)

    # label-setting search: shortest length for every (vertex, touched set)
    start = (0, 0)
    first = seg_touch(start, start)
    dist = {(start, first): 0.0}
    heap = [(0.0, start, first)]
    best = len(first)
    while heap:
        used, p, got = heapq.heappop(heap)
        if used > dist[(p, got)]:
            continue
        best = max(best, len(got))
        for q in pts:
            if q == p:
                continue
            nxt = used + math.dist(p, q)
            if nxt > L + tol:
                continue
            key = (q, got | seg_touch(p, q))
            if nxt < dist.get(key, math.inf) - 1e-12:
                dist[key] = nxt
                heapq.heappush(heap, (nxt, q, key[1]))
    return best


def sample_psi_lower_bound(ell: float, sys: PercSystem, n_paths: int, rng: np.random.Generator,
                           n_legs: int = 4) -> tuple[int, Polyline]:
    """Best psi over random polylines of length ell from the origin inside the field."""
    best, best_w = psi(Polyline(((0.0,) * sys.d,)), sys), Polyline(((0.0,) * sys.d,))
    for _ in range(n_paths):
        cuts = np.sort(rng.random(n_legs - 1))
        legs = np.diff(np.concatenate(([0.0], cuts, [1.0]))) * ell
        verts = [np.zeros(sys.d)]
        for leg in legs:
            v = rng.normal(size=sys.d)
            verts.append(verts[-1] + leg * v / np.linalg.norm(v))
        w = Polyline(tuple(tuple(float(c) for c in v) for v in verts))
        if not _inside(w, sys):
            continue
        val = psi(w, sys)
        if val > best:
            best, best_w = val, w
    return best, best_w


# ---------------------------------------------------------------- tail bounds

def bernstein_bound(n: int, variance: float, sup_bound: float, x: float) -> float:
    """exp(-(x/2) / (sup_bound + n*variance/x)) for P(sum - mean > x)."""
    if not x > 0:
        raise InvalidArgumentError("x must be positive")
    if n < 1 or variance < 0 or not sup_bound > 0:
        raise InvalidArgumentError("need n >= 1, variance >= 0 and sup_bound > 0")
    return math.exp(-(x / 2) / (sup_bound + n * variance / x))


def binomial_excess_tail(n: int, p: Fraction | float, x: Fraction | float) -> Fraction:
    """Exact P(Bin(n, p) - n p > x) for rational p."""
    p = _q(p)
    thr = n * p + _q(x)
    tot = Fraction(0)
    for j in range(n + 1):
        if j > thr:
            tot += math.comb(n, j) * p ** j * (1 - p) ** (n - j)
    return tot


@dataclass(frozen=True)
class GeomConstants:
    d: int
    K1: int
    K2: int
    report: dict = field(default_factory=dict, compare=False)

    @property
    def c2(self) -> int:
        return 2 ** self.d * self.K1 * self.K2

    @property
    def c1(self) -> int:
        return 16 * self.c2


def king_neighbors(d: int) -> list[tuple]:
    return [v for v in itertools.product((-1, 0, 1), repeat=d) if any(v)]


@lru_cache(maxsize=None)
def count_fixed_animals(n_max: int, d: int) -> tuple:
    """Fixed animals (up to translation) of sizes 1..n_max under king adjacency (Redelmeier)."""
    nbrs = king_neighbors(d)
    origin = (0,) * d

    def allowed(c):
        # cells after the origin in lexicographic order of reversed coordinates
        return tuple(reversed(c)) >= tuple(reversed(origin))

    counts = [0] * (n_max + 1)

    def grow(untried: list, cluster_size: int, reached: set):
        while untried:
            c = untried.pop()
            size = cluster_size + 1
            counts[size] += 1
            if size < n_max:
                new = []
                for v in nbrs:
                    q = tuple(a + b for a, b in zip(c, v))
                    if allowed(q) and q not in reached:
                        new.append(q)
                for q in new:
                    reached.add(q)
                grow(untried + new, size, reached)
                for q in new:
                    reached.discard(q)

    grow([origin], 0, {origin})
    return tuple(counts[1:])


def animals_containing_origin(n: int, d: int) -> int:
    """Connected unions of n blocks containing the origin block (king adjacency)."""
    return n * count_fixed_animals(n, d)[n - 1]


def brute_force_animals(n: int, d: int) -> int:
    """Independent count by scanning all n-subsets of a box around the origin."""
    nbrs = king_neighbors(d)
    cells = list(itertools.product(range(-(n - 1), n), repeat=d))
    origin = (0,) * d
    others = [c for c in cells if c != origin]
    total = 0
    for rest in itertools.combinations(others, n - 1):
        group = set(rest) | {origin}
        seen = {origin}
        stack = [origin]
        while stack:
            c = stack.pop()
            for v in nbrs:
                q = tuple(a + b for a, b in zip(c, v))
                if q in group and q not in seen:
                    seen.add(q)
                    stack.append(q)
        total += len(seen) == n
    return total


def k1_witness(d: int, delta: float) -> Polyline:
    """Length-Delta/2 polyline around the origin corner meeting all 2**d adjacent blocks."""
    if d == 1:
        return Polyline(((-delta / 4,), (delta / 4,)))
    h = delta / 8
    if d == 2:
        return Polyline(((-h, -h), (h, -h), (h, h), (-h, h)))
    raise InvalidArgumentError("witness implemented for d <= 2")


@lru_cache(maxsize=None)
def fit_geom_constants(d: int, delta: float = 1.0, n_enum: int = 8, rng_seed: int = 0, n_search: int = 2000) -> GeomConstants:
    if d not in (1, 2):
        raise InvalidArgumentError("d must be 1 or 2")
    # K1: a path of length <= delta has extent <= delta per axis, so it meets at most
    # 2 blocks per axis; cutting a path of length ell into ceil(ell/delta) such pieces
    # gives at most 2**d * ceil(ell/delta) blocks.
    K1 = 2 ** d
    witness = k1_witness(d, delta)
    witness_blocks = len(blocks_intersected(witness, delta, d))
    rng = np.random.default_rng(rng_seed)
    worst_ratio = 0.0
    for _ in range(n_search):
        ell = delta * float(rng.uniform(0.05, 3.0))
        start = rng.uniform(-0.01, 0.01, size=d) * delta
        legs = np.diff(np.concatenate(([0.0], np.sort(rng.random(3)), [1.0]))) * ell
        verts = [start]
        for leg in legs:
            v = rng.normal(size=d)
            verts.append(verts[-1] + leg * v / np.linalg.norm(v))
        w = Polyline(tuple(tuple(float(c) for c in v) for v in verts))
        ratio = len(blocks_intersected(w, delta, d)) / math.ceil(w.length / delta - 1e-12)
        worst_ratio = max(worst_ratio, ratio)
    # K2: exact counts for n <= n_enum, growth bound (e(D-1))^(n-1) beyond, D = 3**d - 1
    counts = [animals_containing_origin(n, d) for n in range(1, n_enum + 1)]
    growth = math.log(math.e * (3 ** d - 2))
    K2 = 1
    while not (all(c <= math.exp(K2 * n) for n, c in enumerate(counts, 1)) and growth <= K2):
        K2 += 1
    report = {
        "K1_witness_blocks": witness_blocks,
        "K1_search_worst_ratio": worst_ratio,
        "animal_counts": counts,
        "growth_log_base": growth,
    }
    if witness_blocks < K1 or worst_ratio > K1:
        raise AssertionError(f"K1 certification failed: {report}")
    return GeomConstants(d, K1, K2, report)


@dataclass(frozen=True)
class TailBound:
    threshold: float
    bound: float
    vacuous: bool


def tail_psi_rhs(n_classes: int, consts: GeomConstants, theta: float, ell: float, delta: float,
                 p: float | None = None) -> TailBound:
    """Threshold |P| c1 theta ell/Delta and bound |P| exp(-c2 (theta ell/Delta - 1))."""
    if not 0 < theta <= 1:
        raise InvalidArgumentError("theta must lie in (0, 1]")
    if p is not None and theta < p ** (1.0 / consts.d) - 1e-15:
        raise InvalidArgumentError("theta must be at least p**(1/d)")
    u = theta * ell / delta
    bound = n_classes * math.exp(-consts.c2 * (u - 1))
    return TailBound(n_classes * consts.c1 * u, bound, u <= 1)


# ---------------------------------------------------------------- sequence diagnostics

@dataclass
class SeqDiagnostic:
    r_values: list
    m_hat: float
    M_hat: float
    kappa: float
    condition: bool
    kappa_ok: bool
    sums: dict
    decaying: bool

    def as_dict(self) -> dict:
        return {
            "r_values": self.r_values,
            "m_hat": self.m_hat,
            "M_hat": self.M_hat,
            "kappa": self.kappa,
            "condition": self.condition,
            "kappa_ok": self.kappa_ok,
            "sums": {str(k): v for k, v in self.sums.items()},
            "decaying": self.decaying,
        }


def pps_seq_diagnostic(entries, kappa: float, ell_values, d: int = 2, rng_seed: int = 0) -> SeqDiagnostic:
    """Finite-range checks for a sequence of percolation systems.

    ``entries`` holds (r, log Delta_r, log p_r, |P_r|) with logs so that huge scales
    stay representable. Reports m = max log(Delta_r)/r, M = -max log(p_r)/r over the
    range, whether M > m d and kappa < 1/(m d), and the sums
    ell^-1 sum_{r=r0}^{floor(kappa log ell)} Delta_r^d psi_r(ell), with psi_r(ell)
    sampled along a straight path (a lower bound on the sup).
    """
    entries = sorted(entries)
    rs = [int(e[0]) for e in entries]
    m_hat = max(e[1] / e[0] for e in entries)
    M_hat = -max(e[2] / e[0] for e in entries)
    condition = M_hat > m_hat * d
    kappa_ok = m_hat > 0 and kappa < 1.0 / (m_hat * d)
    rng = np.random.default_rng(rng_seed)
    sums = {}
    r0 = rs[0]
    for ell in ell_values:
        top = math.floor(kappa * math.log(ell))
        tot = 0.0
        for r, log_delta, log_p, _ in entries:
            if r < r0 or r > top:
                continue
            delta = math.exp(log_delta)
            n_blocks = len(blocks_intersected(Polyline(((0.0,) * d, (float(ell),) + (0.0,) * (d - 1))), delta, d))
            p = math.exp(min(log_p, 0.0))
            tot += delta ** d * int(rng.binomial(n_blocks, p))
        sums[ell] = tot / ell
    vals = [sums[e] for e in ell_values]
    decaying = len(vals) < 2 or vals[-1] <= vals[0]
    return SeqDiagnostic(rs, m_hat, M_hat, kappa, condition, kappa_ok, sums, decaying)


def stochdom_log_bounds(N0: int, E: int, rho_bar_inf: float, r_values, C1: float | None = None,
                        C2: float | None = None) -> list[tuple]:
    """(r, log Delta_r, log p_r, 33) with p_{r} = 6 C1 Delta_r^2 exp(-C2 sqrt(omega_{r-1})).

    Defaults take C1 = exp(sqrt(e) - 1) and C2 = rho_bar_inf sqrt(e) / 4 from the
    exponential-moment estimate for unconfined counts.
    """
    C1 = math.exp(math.sqrt(math.e) - 1) if C1 is None else C1
    C2 = rho_bar_inf * math.sqrt(math.e) / 4 if C2 is None else C2
    out = []
    for r in r_values:
        log_delta = E * r * math.log(N0)
        log_p = math.log(6 * C1) + 2 * log_delta - C2 * math.sqrt(N0 ** (r - 1))
        out.append((r, log_delta, log_p, 33))
    return out
