"""Minimal hand-written SVG: space-time occupancy with the walk overlaid, and line curves."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _doc(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def spacetime_svg(grid: np.ndarray, x0: int, walk_t=None, walk_x=None, cell: int = 4, title: str = "") -> str:
    """grid[t, c] is the occupancy of site x0 + c at integer time t; time runs upward."""
    grid = np.asarray(grid)
    n_t, n_x = grid.shape
    w, h = n_x * cell + 20, n_t * cell + 40
    body = []
    if title:
        body.append(f'<text x="10" y="15" font-size="12">{escape(title)}</text>')
    top = 25
    for t in range(n_t):
        y = top + (n_t - 1 - t) * cell
        row = grid[t]
        c = 0
        while c < n_x:
            if row[c]:
                start = c
                while c < n_x and row[c]:
                    c += 1
                body.append(f'<rect x="{10 + start * cell}" y="{y}" width="{(c - start) * cell}" '
                            f'height="{cell}" fill="#444"/>')
            else:
                c += 1
    if walk_t is not None and len(walk_t):
        pts = []
        for t, x in zip(walk_t, walk_x):
            px = 10 + (x - x0 + 0.5) * cell
            py = top + (n_t - t) * cell
            pts.append(f"{px:.2f},{py:.2f}")
        body.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="#d62728" stroke-width="1.5"/>')
    return _doc(w, h, body)


def curve_svg(series: dict, xlabel: str = "", ylabel: str = "", logx: bool = False,
              width: int = 480, height: int = 320, title: str = "") -> str:
    """series maps a label to (xs, ys[, errs]); error bars are drawn when given."""
    pad = 50
    xs_all, ys_all = [], []
    for vals in series.values():
        xs = np.asarray(vals[0], dtype=float)
        ys = np.asarray(vals[1], dtype=float)
        es = np.asarray(vals[2], dtype=float) if len(vals) > 2 else np.zeros_like(ys)
        es = np.nan_to_num(es)
        xs_all.extend(np.log10(xs) if logx else xs)
        ys_all.extend(ys - es)
        ys_all.extend(ys + es)
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(0.0, min(ys_all)), max(ys_all)
    x_hi = x_hi if x_hi > x_lo else x_lo + 1
    y_hi = y_hi if y_hi > y_lo else y_lo + 1

    def px(x):
        x = np.log10(x) if logx else x
        return pad + (x - x_lo) / (x_hi - x_lo) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad)

    body = [
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{height / 2:.0f}" font-size="12" transform="rotate(-90 14 {height / 2:.0f})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
        f'<text x="{pad - 4}" y="{py(y_lo):.1f}" font-size="10" text-anchor="end">{y_lo:.3g}</text>',
        f'<text x="{pad - 4}" y="{py(y_hi):.1f}" font-size="10" text-anchor="end">{y_hi:.3g}</text>',
    ]
    if title:
        body.append(f'<text x="{pad}" y="20" font-size="13">{escape(title)}</text>')
    for j, (label, vals) in enumerate(series.items()):
        colour = _PALETTE[j % len(_PALETTE)]
        xs, ys = list(vals[0]), list(vals[1])
        es = list(vals[2]) if len(vals) > 2 else [0.0] * len(ys)
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        for x, y, e in zip(xs, ys, es):
            body.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" fill="{colour}"/>')
            if e == e and e > 0:
                body.append(f'<line x1="{px(x):.2f}" y1="{py(y - e):.2f}" x2="{px(x):.2f}" y2="{py(y + e):.2f}" '
                            f'stroke="{colour}"/>')
        body.append(f'<text x="{width - pad - 100}" y="{pad + 14 * j}" font-size="11" fill="{colour}">'
                    f'{escape(str(label))}</text>')
    return _doc(width, height, body)


def zeta_polyline(field, x: int, t: float) -> list[tuple[float, float]]:
    """Vertices (site, time) of the stirring path through (x, t), followed back to time 0."""
    lo = field.window.lo
    pos = x
    pts = [(float(pos), float(t))]
    n = field.rank(t)
    for i in range(n - 1, -1, -1):
        e = int(field.edges[i]) + lo
        if e == pos or e + 1 == pos:
            u = float(field.times[i])
            pts.append((float(pos), u))
            pos = e + 1 if e == pos else e
            pts.append((float(pos), u))
    pts.append((float(pos), 0.0))
    return pts


def arrows_svg(field, x_lo: int, x_hi: int, t_max: float | None = None, zeta_from=None,
               dx: int = 24, dt: float = 60.0) -> str:
    """Graphical construction: one vertical time line per site, a two-headed arrow per
    edge event, and optionally the stirring path through zeta_from = (x, t)."""
    lo = field.window.lo
    t_max = field.window.t_max if t_max is None else float(t_max)
    n = x_hi - x_lo + 1
    w, h = n * dx + 40, int(t_max * dt) + 60
    top = 30

    def px(x):
        return 20 + (x - x_lo) * dx

    def py(t):
        return top + (t_max - t) * dt

    body = ['<defs><marker id="a" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto-start-reverse">'
            '<path d="M0,0 L6,3 L0,6 z" fill="#333"/></marker></defs>']
    for x in range(x_lo, x_hi + 1):
        body.append(f'<line x1="{px(x)}" y1="{py(t_max):.1f}" x2="{px(x)}" y2="{py(0):.1f}" stroke="#bbb"/>')
        body.append(f'<text x="{px(x)}" y="{py(0) + 16:.1f}" font-size="10" text-anchor="middle">{x}</text>')
    stop = field.rank(t_max)
    for i in range(stop):
        e = int(field.edges[i]) + lo
        if x_lo <= e and e + 1 <= x_hi:
            y = py(float(field.times[i]))
            body.append(f'<line x1="{px(e) + 3}" y1="{y:.2f}" x2="{px(e + 1) - 3}" y2="{y:.2f}" stroke="#333" '
                        'marker-start="url(#a)" marker-end="url(#a)"/>')
    if zeta_from is not None:
        pts = zeta_polyline(field, int(zeta_from[0]), float(zeta_from[1]))
        coords = " ".join(f"{px(x):.2f},{py(t):.2f}" for x, t in pts)
        body.append(f'<polyline points="{coords}" fill="none" stroke="#d62728" stroke-width="2.5"/>')
    return _doc(w, h, body)


_VERDICT_COLOURS = {"bad": "#d62728", "rough": "#ff7f0e", "spoiled": "#9467bd", "good": "#2ca02c"}


def verdict_heatmap_svg(verdicts, cell: int = 10) -> str:
    """One cell per block verdict; red bad, orange rarefied or turbulent, purple locally spoiled."""
    verdicts = list(verdicts)
    if not verdicts:
        return _doc(40, 40, [])
    ks = sorted({v.id.k for v in verdicts})
    ss = sorted({v.id.s for v in verdicts})
    ki = {k: i for i, k in enumerate(ks)}
    si = {s: i for i, s in enumerate(ss)}
    body = []
    for v in verdicts:
        kind = "bad" if v.bad else "rough" if v.rough else "spoiled" if v.locally_spoiled else "good"
        x = 10 + ki[v.id.k] * cell
        y = 10 + (len(ss) - 1 - si[v.id.s]) * cell
        body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_VERDICT_COLOURS[kind]}" '
                    'stroke="white" stroke-width="0.5"/>')
    return _doc(len(ks) * cell + 20, len(ss) * cell + 20, body)
