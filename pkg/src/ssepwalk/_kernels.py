"""Compiled inner loops.

All arrays use offset coordinates: site offset ``i`` is the site ``lo + i`` of the
simulated region and edge ``e`` joins offsets ``e`` and ``e + 1``.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def apply_swaps(config, edges, start, stop):
    for i in range(start, stop):
        e = edges[i]
        tmp = config[e]
        config[e] = config[e + 1]
        config[e + 1] = tmp


@njit(cache=True)
def undo_swaps(config, edges, start, stop):
    for i in range(stop - 1, start - 1, -1):
        e = edges[i]
        tmp = config[e]
        config[e] = config[e + 1]
        config[e + 1] = tmp


@njit(cache=True)
def snapshot_rows(config0, edges, row_ranks):
    """Configurations after the first ``row_ranks[j]`` events, for each j (ranks non-decreasing)."""
    n_rows = row_ranks.shape[0]
    out = np.empty((n_rows, config0.shape[0]), dtype=np.int8)
    cur = config0.copy()
    done = 0
    for j in range(n_rows):
        target = row_ranks[j]
        for i in range(done, target):
            e = edges[i]
            tmp = cur[e]
            cur[e] = cur[e + 1]
            cur[e + 1] = tmp
        done = target
        out[j, :] = cur
    return out


@njit(cache=True)
def _first_at_least(order, lo, hi, c):
    # smallest index j in [lo, hi) with order[j] >= c, or hi
    while lo < hi:
        mid = (lo + hi) // 2
        if order[mid] < c:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def trace(pos, c, target, order, offsets, n_sites):
    """Follow a stirring path through event ranks.

    Forward when ``target >= c``: applies events with rank in [c, target).
    Backward otherwise: undoes events with rank in [target, c) from the latest one.
    Returns the final offset and whether the path touched an outermost site.
    """
    touched = pos == 0 or pos == n_sites - 1
    if target >= c:
        while True:
            best = target
            step = 0
            if pos > 0:
                e = pos - 1
                j = _first_at_least(order, offsets[e], offsets[e + 1], c)
                if j < offsets[e + 1] and order[j] < best:
                    best = order[j]
                    step = -1
            if pos < n_sites - 1:
                e = pos
                j = _first_at_least(order, offsets[e], offsets[e + 1], c)
                if j < offsets[e + 1] and order[j] < best:
                    best = order[j]
                    step = 1
            if step == 0:
                break
            pos += step
            c = best + 1
            if pos == 0 or pos == n_sites - 1:
                touched = True
    else:
        while True:
            best = target - 1
            step = 0
            if pos > 0:
                e = pos - 1
                j = _first_at_least(order, offsets[e], offsets[e + 1], c) - 1
                if j >= offsets[e] and order[j] > best:
                    best = order[j]
                    step = -1
            if pos < n_sites - 1:
                e = pos
                j = _first_at_least(order, offsets[e], offsets[e + 1], c) - 1
                if j >= offsets[e] and order[j] > best:
                    best = order[j]
                    step = 1
            if step == 0:
                break
            pos += step
            c = best
            if pos == 0 or pos == n_sites - 1:
                touched = True
    return pos, touched


@njit(cache=True)
def walk(config, times, edges, clock, uniforms, thr1, thr0, start):
    """Event-driven walker on the stirring environment.

    ``config`` is consumed (mutated). Returns (before, env, status) where status is
    0 on success and 1 if the walker reached an outermost site.
    """
    n = clock.shape[0]
    n_sites = config.shape[0]
    n_events = times.shape[0]
    before = np.empty(n, dtype=np.int64)
    env = np.empty(n, dtype=np.int8)
    pos = start
    a = 0
    for k in range(n):
        tk = clock[k]
        while a < n_events and times[a] <= tk:
            e = edges[a]
            tmp = config[e]
            config[e] = config[e + 1]
            config[e + 1] = tmp
            a += 1
        i = config[pos]
        before[k] = pos
        env[k] = i
        thr = thr1 if i == 1 else thr0
        if uniforms[k] < thr:
            pos += 1
        else:
            pos -= 1
        if pos <= 0 or pos >= n_sites - 1:
            return before[: k + 1], env[: k + 1], 1
    return before, env, 0


@njit(cache=True)
def confined_rows(config, edges, start_rank, row_ranks, in_lo, in_hi, col_lo, col_hi):
    """Occupancy restricted to particles whose stirring path stayed in [in_lo, in_hi).

    Starts from ``config`` (state at rank ``start_rank``), replays events and records
    columns [col_lo, col_hi) of occupancy*tag after each rank in ``row_ranks``.
    """
    n_sites = config.shape[0]
    cur = config.copy()
    tag = np.zeros(n_sites, dtype=np.int8)
    for i in range(in_lo, in_hi):
        tag[i] = 1
    n_rows = row_ranks.shape[0]
    out = np.empty((n_rows, col_hi - col_lo), dtype=np.int8)
    done = start_rank
    for j in range(n_rows):
        target = row_ranks[j]
        for r in range(done, target):
            e = edges[r]
            tmp = cur[e]
            cur[e] = cur[e + 1]
            cur[e + 1] = tmp
            tmp = tag[e]
            tag[e] = tag[e + 1]
            tag[e + 1] = tmp
            if e < in_lo or e >= in_hi:
                tag[e] = 0
            if e + 1 < in_lo or e + 1 >= in_hi:
                tag[e + 1] = 0
        done = target
        for c in range(col_lo, col_hi):
            out[j, c - col_lo] = cur[c] * tag[c]
    return out


@njit(cache=True)
def flip_sites(config, edges, start, stop, site_lo, site_hi):
    """Whether any offset in [site_lo, site_hi) changes value while replaying [start, stop).

    ``config`` is not modified. A site counts as flipped if at any moment its value
    differs from the initial one.
    """
    cur = config.copy()
    for r in range(start, stop):
        e = edges[r]
        a = cur[e]
        b = cur[e + 1]
        cur[e] = b
        cur[e + 1] = a
        if a != b:
            if (e >= site_lo and e < site_hi and cur[e] != config[e]) or (
                e + 1 >= site_lo and e + 1 < site_hi and cur[e + 1] != config[e + 1]
            ):
                return True
    return False
