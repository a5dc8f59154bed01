"""Shortest path from a fixed start visiting a sequence of closed axis-aligned
rectangles in order (2D).

Block-coordinate descent: each visiting point is moved to the exact minimizer of
|p - a| + |p - b| over its rectangle given its neighbours. Runs of coincident
points are also moved jointly inside the intersection of their rectangles, which
removes the stalls that plain coordinate descent has at kinks.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _dist(ax, ay, bx, by):
    return math.sqrt((ax - bx) ** 2 + (ay - by) ** 2)


@njit(cache=True)
def _clamp(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True)
def _on_vertical(c, y0, y1, ax, ay, bx, by, cy):
    # minimize |(c,y)-a| + |(c,y)-b| over y in [y0, y1]; ties broken towards cy
    da = ax - c
    db = bx - c
    if da == 0.0 and db == 0.0:
        lo_ = min(ay, by)
        hi_ = max(ay, by)
        return _clamp(_clamp(cy, lo_, hi_), y0, y1)
    if da * db > 0.0:
        db = -db
    # a and (reflected) b on opposite sides or on the line
    t = da / (da - db)
    y = ay + t * (by - ay)
    return _clamp(y, y0, y1)


@njit(cache=True)
def best_in_box(ax, ay, bx, by, x0, x1, y0, y1, cx, cy, mode=0):
    """Minimizer of |p-a| + |p-b| over [x0,x1]x[y0,y1].

    When a whole piece of the segment a-b is optimal, ``mode`` picks the point:
    0 closest to (cx, cy), 1 the end nearest b, 2 the end nearest a.
    """
    # clip segment a->b to the box
    u0 = 0.0
    u1 = 1.0
    dx = bx - ax
    dy = by - ay
    ok = True
    for k in range(4):
        if k == 0:
            p, q = -dx, ax - x0
        elif k == 1:
            p, q = dx, x1 - ax
        elif k == 2:
            p, q = -dy, ay - y0
        else:
            p, q = dy, y1 - ay
        if p == 0.0:
            if q < 0.0:
                ok = False
                break
        else:
            r = q / p
            if p < 0.0:
                if r > u1:
                    ok = False
                    break
                if r > u0:
                    u0 = r
            else:
                if r < u0:
                    ok = False
                    break
                if r < u1:
                    u1 = r
    if ok and u0 <= u1:
        L2 = dx * dx + dy * dy
        if mode == 1:
            u = u1
        elif mode == 2:
            u = u0
        elif L2 > 0.0:
            u = _clamp(((cx - ax) * dx + (cy - ay) * dy) / L2, u0, u1)
        else:
            u = u0
        return _clamp(ax + u * dx, x0, x1), _clamp(ay + u * dy, y0, y1)
    best = 1e300
    bxo = x0
    byo = y0
    for k in range(4):
        if k < 2:
            c = x0 if k == 0 else x1
            y = _on_vertical(c, y0, y1, ax, ay, bx, by, cy)
            px, py = c, y
        else:
            c = y0 if k == 2 else y1
            x = _on_vertical(c, x0, x1, ay, ax, by, bx, cx)
            px, py = x, c
        v = _dist(px, py, ax, ay) + _dist(px, py, bx, by)
        if v < best - 1e-15:
            best = v
            bxo = px
            byo = py
    return bxo, byo


@njit(cache=True)
def _length(sx, sy, pts):
    m = pts.shape[0]
    tot = 0.0
    px, py = sx, sy
    for i in range(m):
        tot += _dist(px, py, pts[i, 0], pts[i, 1])
        px, py = pts[i, 0], pts[i, 1]
    return tot


@njit(cache=True)
def _descend(sx, sy, boxes, pts, max_sweeps):
    m = boxes.shape[0]
    cur = _length(sx, sy, pts)
    idle = 0
    for sweep in range(max_sweeps):
        mode = sweep % 3
        # single-point moves
        for i in range(m):
            if i == 0:
                ax, ay = sx, sy
            else:
                ax, ay = pts[i - 1, 0], pts[i - 1, 1]
            if i == m - 1:
                pts[i, 0] = _clamp(ax, boxes[i, 0], boxes[i, 1])
                pts[i, 1] = _clamp(ay, boxes[i, 2], boxes[i, 3])
            else:
                px, py = best_in_box(ax, ay, pts[i + 1, 0], pts[i + 1, 1], boxes[i, 0], boxes[i, 1],
                                     boxes[i, 2], boxes[i, 3], pts[i, 0], pts[i, 1], mode)
                pts[i, 0] = px
                pts[i, 1] = py
        # joint moves of coincident runs
        i = 0
        while i < m:
            j = i
            x0, x1, y0, y1 = boxes[i, 0], boxes[i, 1], boxes[i, 2], boxes[i, 3]
            while j + 1 < m and _dist(pts[j, 0], pts[j, 1], pts[j + 1, 0], pts[j + 1, 1]) < 1e-12:
                nx0 = max(x0, boxes[j + 1, 0])
                nx1 = min(x1, boxes[j + 1, 1])
                ny0 = max(y0, boxes[j + 1, 2])
                ny1 = min(y1, boxes[j + 1, 3])
                if nx0 > nx1 or ny0 > ny1:
                    break
                x0, x1, y0, y1 = nx0, nx1, ny0, ny1
                j += 1
            if j > i:
                if i == 0:
                    ax, ay = sx, sy
                else:
                    ax, ay = pts[i - 1, 0], pts[i - 1, 1]
                if j == m - 1:
                    px = _clamp(ax, x0, x1)
                    py = _clamp(ay, y0, y1)
                else:
                    px, py = best_in_box(ax, ay, pts[j + 1, 0], pts[j + 1, 1], x0, x1, y0, y1,
                                         pts[i, 0], pts[i, 1], mode)
                for q in range(i, j + 1):
                    pts[q, 0] = px
                    pts[q, 1] = py
            i = j + 1
        new = _length(sx, sy, pts)
        if cur - new <= 1e-15 * (1.0 + cur):
            idle += 1
            if idle >= 3:
                return new
        else:
            idle = 0
        cur = new
    return cur


@njit(cache=True)
def tour(sx, sy, boxes, max_sweeps=20000):
    """boxes[i] = (x0, x1, y0, y1). Returns (length, points)."""
    m = boxes.shape[0]
    best_pts = np.empty((m, 2))
    if m == 0:
        return 0.0, best_pts
    best = 1e300
    for init in range(2):
        pts = np.empty((m, 2))
        px, py = sx, sy
        for i in range(m):
            if init == 0:
                px = _clamp(px, boxes[i, 0], boxes[i, 1])
                py = _clamp(py, boxes[i, 2], boxes[i, 3])
            else:
                px = 0.5 * (boxes[i, 0] + boxes[i, 1])
                py = 0.5 * (boxes[i, 2] + boxes[i, 3])
            pts[i, 0] = px
            pts[i, 1] = py
        v = _descend(sx, sy, boxes, pts, max_sweeps)
        if v < best:
            best = v
            best_pts[:, :] = pts
    return best, best_pts


def tour_length(start, boxes) -> tuple[float, np.ndarray]:
    b = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    return tour(float(start[0]), float(start[1]), b)


@njit(cache=True)
def _support_min(vx, vy, x0, x1, y0, y1):
    # min over the box of v . p
    return (vx * x0 if vx >= 0.0 else vx * x1) + (vy * y0 if vy >= 0.0 else vy * y1)


@njit(cache=True)
def dual_value(sx, sy, boxes, ys):
    """Lower bound from unit-ball multipliers ys[i] on the i-th leg:
    sum |p_i - p_{i-1}| >= sum_i p_i.(y_i - y_{i+1}) - y_1.p_0."""
    m = boxes.shape[0]
    tot = -(ys[0, 0] * sx + ys[0, 1] * sy)
    for i in range(m):
        vx = ys[i, 0]
        vy = ys[i, 1]
        if i + 1 < m:
            vx -= ys[i + 1, 0]
            vy -= ys[i + 1, 1]
        tot += _support_min(vx, vy, boxes[i, 0], boxes[i, 1], boxes[i, 2], boxes[i, 3])
    return tot


@njit(cache=True)
def lower_bound(sx, sy, boxes, pts):
    """Best dual bound over a few multiplier guesses derived from a primal solution."""
    m = boxes.shape[0]
    dirs = np.zeros((m, 2))
    live = np.zeros(m, dtype=np.bool_)
    px, py = sx, sy
    for i in range(m):
        dx = pts[i, 0] - px
        dy = pts[i, 1] - py
        n = math.sqrt(dx * dx + dy * dy)
        if n > 1e-12:
            dirs[i, 0] = dx / n
            dirs[i, 1] = dy / n
            live[i] = True
        px, py = pts[i, 0], pts[i, 1]
    best = -1e300
    for guess in range(3):
        ys = dirs.copy()
        if guess == 1:
            for i in range(m - 2, -1, -1):
                if not live[i]:
                    ys[i, 0] = ys[i + 1, 0]
                    ys[i, 1] = ys[i + 1, 1]
        elif guess == 2:
            for i in range(1, m):
                if not live[i]:
                    ys[i, 0] = ys[i - 1, 0]
                    ys[i, 1] = ys[i - 1, 1]
        v = dual_value(sx, sy, boxes, ys)
        if v > best:
            best = v
    return best


def _cvx_tour(start, boxes):
    """Conic solve; returns primal points and leg multipliers taken from the cone duals."""
    import cvxpy as cp

    m = boxes.shape[0]
    P = cp.Variable((m, 2))
    t = cp.Variable(m)
    s0 = np.asarray(start, dtype=float)
    legs = [P[0] - s0] + [P[i] - P[i - 1] for i in range(1, m)]
    cones = [cp.SOC(t[i], legs[i]) for i in range(m)]
    cons = cones + [P[:, 0] >= boxes[:, 0], P[:, 0] <= boxes[:, 1], P[:, 1] >= boxes[:, 2], P[:, 1] <= boxes[:, 3]]
    prob = cp.Problem(cp.Minimize(cp.sum(t)), cons)
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-13, tol_gap_rel=1e-13, tol_feas=1e-13)
    pts = np.clip(np.asarray(P.value, dtype=float), boxes[:, [0, 2]], boxes[:, [1, 3]])
    ys = np.zeros((m, 2))
    for i, c in enumerate(cones):
        dv = c.dual_value
        u = float(np.ravel(dv[0])[0])
        v = np.ravel(dv[1]).astype(float)
        if u > 0:
            v = v / u
        n = np.linalg.norm(v)
        ys[i] = v / n if n > 1.0 else v
    return pts, ys


def certified_tour(start, boxes, gap: float = 1e-9) -> tuple[float, float, np.ndarray]:
    """(upper, lower, points): a feasible tour of length ``upper`` and a certified bound
    ``lower`` <= optimum. Falls back to a conic solver when descent leaves a gap."""
    b = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    sx, sy = float(start[0]), float(start[1])
    if b.shape[0] == 0:
        return 0.0, 0.0, np.empty((0, 2))
    up, pts = tour(sx, sy, b)
    lo = lower_bound(sx, sy, b, pts)
    if up - lo <= gap:
        return up, lo, pts
    pts2, ys = _cvx_tour((sx, sy), b)
    # polish from the conic solution; descent never increases the length
    up2 = _descend(sx, sy, b, pts2, 20000)
    lo2 = max(lower_bound(sx, sy, b, pts2), dual_value(sx, sy, b, ys), dual_value(sx, sy, b, -ys))
    if up2 < up:
        up, pts = up2, pts2
    return up, max(lo, lo2), pts


@njit(cache=True)
def _box_gap(a, b):
    dx = max(a[0] - b[1], 0.0, b[0] - a[1])
    dy = max(a[2] - b[3], 0.0, b[2] - a[3])
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def chain_bound(sx, sy, boxes):
    """Lower bound: best chain of box-to-box gaps along an ordered subsequence."""
    m = boxes.shape[0]
    f = np.empty(m)
    best = 0.0
    for j in range(m):
        dx = max(boxes[j, 0] - sx, 0.0, sx - boxes[j, 1])
        dy = max(boxes[j, 2] - sy, 0.0, sy - boxes[j, 3])
        v = math.sqrt(dx * dx + dy * dy)
        for i in range(j):
            w = f[i] + _box_gap(boxes[i], boxes[j])
            if w > v:
                v = w
        f[j] = v
        if v > best:
            best = v
    return best


@njit(cache=True)
def dual_ascent(sx, sy, boxes, pts, target, iters=300):
    """Projected supergradient ascent on the dual, started from the leg directions of
    ``pts``; stops early once the bound exceeds ``target``. Returns the best bound."""
    m = boxes.shape[0]
    ys = np.zeros((m, 2))
    px, py = sx, sy
    for i in range(m):
        dx = pts[i, 0] - px
        dy = pts[i, 1] - py
        n = math.sqrt(dx * dx + dy * dy)
        if n > 1e-12:
            ys[i, 0] = dx / n
            ys[i, 1] = dy / n
        px, py = pts[i, 0], pts[i, 1]
    q = np.empty((m, 2))
    best = -1e300
    for it in range(iters):
        val = -(ys[0, 0] * sx + ys[0, 1] * sy)
        for i in range(m):
            vx = ys[i, 0]
            vy = ys[i, 1]
            if i + 1 < m:
                vx -= ys[i + 1, 0]
                vy -= ys[i + 1, 1]
            q[i, 0] = boxes[i, 0] if vx >= 0.0 else boxes[i, 1]
            q[i, 1] = boxes[i, 2] if vy >= 0.0 else boxes[i, 3]
            val += vx * q[i, 0] + vy * q[i, 1]
        if val > best:
            best = val
            if best > target:
                return best
        step = 0.5 / math.sqrt(it + 1.0)
        px, py = sx, sy
        for i in range(m):
            ys[i, 0] += step * (q[i, 0] - px)
            ys[i, 1] += step * (q[i, 1] - py)
            n = math.sqrt(ys[i, 0] ** 2 + ys[i, 1] ** 2)
            if n > 1.0:
                ys[i, 0] /= n
                ys[i, 1] /= n
            px, py = q[i, 0], q[i, 1]
    return best
