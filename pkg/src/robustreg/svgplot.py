"""Static SVG convergence plots written directly as text.

Output bytes depend only on the input rows: coordinates are rounded to two
decimals and series are ordered by first appearance in the CSV.
"""
from __future__ import annotations

import math
import os
from collections import OrderedDict
from xml.sax.saxutils import escape

from .evaluation import mean_ci

WIDTH, HEIGHT = 700, 440
LEFT, RIGHT, TOP, BOTTOM = 72, 236, 40, 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _scale(lo, hi, a, b, log):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo

    def f(v):
        v = math.log10(v) if log else v
        return a + (v - lo) / span * (b - a)

    return f


def _ticks(lo, hi, log):
    if log:
        return [10.0**k for k in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)
                if lo <= 10.0**k <= hi] or [lo, hi]
    step = (hi - lo) / 4 if hi > lo else 1.0
    return [lo + i * step for i in range(5)]


def series_stats(rows, y="est_error", group_by="algorithm"):
    """``{group: [(T, mean, half_width), ...]}`` sorted by T."""
    grouped: OrderedDict[str, dict[int, list[float]]] = OrderedDict()
    for row in rows:
        grouped.setdefault(str(row[group_by]), {}).setdefault(row["T"], []).append(row[y])
    out = OrderedDict()
    for key, by_t in grouped.items():
        pts = []
        for T in sorted(by_t):
            s = mean_ci(by_t[T])
            pts.append((T, s.mean, 0.0 if math.isnan(s.half_width) else s.half_width))
        out[key] = pts
    return out


def render_svg(series, title, y_label, logx=True, logy=True, x_label="T") -> str:
    xs = [p[0] for pts in series.values() for p in pts]
    ys = []
    for pts in series.values():
        for _, m, hw in pts:
            ys.extend([m - hw, m + hw, m])
    if logy:
        positive = [v for v in ys if v > 0]
        floor = min(positive) if positive else 1e-12
        ys = [max(v, floor) for v in ys]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    fx = _scale(x0, x1, LEFT, WIDTH - RIGHT, logx and x0 > 0)
    fy = _scale(y0, y1, HEIGHT - BOTTOM, TOP, logy and y0 > 0)

    def clamp(v):
        return max(v, y0) if logy else v

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{(LEFT + WIDTH - RIGHT) / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    # axes and grid
    for t in _ticks(y0, y1, logy and y0 > 0):
        y = fy(t)
        out.append(f'<line x1="{LEFT}" y1="{y:.2f}" x2="{WIDTH - RIGHT}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">{t:.3g}</text>')
    for t in sorted(set(xs)):
        x = fx(t)
        out.append(f'<line x1="{x:.2f}" y1="{TOP}" x2="{x:.2f}" y2="{HEIGHT - BOTTOM}" stroke="#eeeeee"/>')
        out.append(f'<text x="{x:.2f}" y="{HEIGHT - BOTTOM + 16}" text-anchor="middle">{t:g}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{WIDTH - RIGHT - LEFT}" height="{HEIGHT - BOTTOM - TOP}" '
               'fill="none" stroke="black"/>')
    out.append(f'<text x="{(LEFT + WIDTH - RIGHT) / 2:.2f}" y="{HEIGHT - 14}" text-anchor="middle">'
               f'{escape(x_label)}{" (log)" if logx else ""}</text>')
    out.append(f'<text transform="translate(18 {(TOP + HEIGHT - BOTTOM) / 2:.2f}) rotate(-90)" '
               f'text-anchor="middle">{escape(y_label)}{" (log)" if logy else ""}</text>')

    for i, (name, pts) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        upper = [(fx(T), fy(clamp(m + hw))) for T, m, hw in pts]
        lower = [(fx(T), fy(clamp(m - hw))) for T, m, hw in reversed(pts)]
        band = " ".join(f"{x:.2f},{y:.2f}" for x, y in upper + lower)
        out.append(f'<polygon class="ci" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{fx(T):.2f},{fy(clamp(m)):.2f}" for T, m, _ in pts)
        out.append(f'<polyline class="mean" points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        for T, m, _ in pts:
            out.append(f'<circle cx="{fx(T):.2f}" cy="{fy(clamp(m)):.2f}" r="2.5" fill="{color}"/>')
        ly = TOP + 14 + 20 * i
        lx = WIDTH - RIGHT + 12
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/><text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def alpha_path(out_path, alpha, n_alphas):
    """Single alpha writes ``out_path``; several get an ``_alpha<value>`` suffix."""
    if n_alphas == 1:
        return out_path
    stem, ext = os.path.splitext(out_path)
    return f"{stem}_alpha{alpha:g}{ext or '.svg'}"


def plot_csv_rows(rows, out_path, y="est_error", logx=True, logy=True, group_by="algorithm"):
    """Write one SVG per alpha; returns the written paths in alpha order."""
    if not rows:
        raise ValueError("no data rows")
    alphas = sorted({r["alpha"] for r in rows})
    paths = []
    for a in alphas:
        subset = [r for r in rows if r["alpha"] == a]
        svg = render_svg(series_stats(subset, y, group_by), f"alpha = {a:g}", y, logx, logy)
        path = alpha_path(out_path, a, len(alphas))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
        paths.append(path)
    return paths
