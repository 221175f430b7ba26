"""Minimal standalone SVG charts: line charts (optionally log-log) and planar paths.

Output is plain text with fixed number formatting, so identical data gives
byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Axes:
    def __init__(self, xs, ys, logx: bool, logy: bool, equal: bool = False):
        self.logx, self.logy = logx, logy
        tx = self._tx(np.asarray(xs, dtype=float), logx)
        ty = self._tx(np.asarray(ys, dtype=float), logy)
        self.x0, self.x1 = self._span(tx)
        self.y0, self.y1 = self._span(ty)
        if equal:
            half = max(self.x1 - self.x0, self.y1 - self.y0) / 2
            cx, cy = (self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2
            self.x0, self.x1, self.y0, self.y1 = cx - half, cx + half, cy - half, cy + half

    @staticmethod
    def _tx(v, log):
        if log:
            v = v[v > 0]
            return np.log10(v)
        return v[np.isfinite(v)]

    @staticmethod
    def _span(v):
        if v.size == 0:
            return 0.0, 1.0
        lo, hi = float(np.min(v)), float(np.max(v))
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        return lo - pad, hi + pad

    def px(self, x: float) -> float:
        v = math.log10(x) if self.logx else x
        return MARGIN + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * MARGIN)

    def py(self, y: float) -> float:
        v = math.log10(y) if self.logy else y
        return HEIGHT - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2 * MARGIN)

    def scale(self, length: float) -> float:
        return length / (self.x1 - self.x0) * (WIDTH - 2 * MARGIN)

    def ticks(self, lo, hi, log):
        if log:
            return [10.0**e for e in range(math.ceil(lo), math.floor(hi) + 1)]
        return list(np.linspace(lo, hi, 5))


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        'fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 15 {HEIGHT / 2})">'
        f"{escape(ylabel)}</text>",
    ]
    for t in ax.ticks(ax.x0, ax.x1, ax.logx):
        x = ax.px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{HEIGHT - MARGIN}" x2="{_fmt(x)}" y2="{HEIGHT - MARGIN + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle">{t:.3g}</text>')
    for t in ax.ticks(ax.y0, ax.y1, ax.logy):
        y = ax.py(t)
        out.append(f'<line x1="{MARGIN - 5}" y1="{_fmt(y)}" x2="{MARGIN}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{MARGIN - 8}" y="{_fmt(y + 4)}" text-anchor="end">{t:.3g}</text>')
    return out


def _polyline(ax: _Axes, xs, ys, color: str, width: float = 1.5) -> str:
    pts = " ".join(f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(xs, ys)
                   if (not ax.logx or x > 0) and (not ax.logy or y > 0) and np.isfinite(x) and np.isfinite(y))
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'


def line_chart(series: dict, path, title: str = "", xlabel: str = "", ylabel: str = "",
               logx: bool = False, logy: bool = False) -> None:
    """Write one polyline with markers per ``name -> (xs, ys)`` entry of ``series``."""
    all_x = np.concatenate([np.asarray(xs, dtype=float) for xs, _ in series.values()]) if series else np.zeros(0)
    all_y = np.concatenate([np.asarray(ys, dtype=float) for _, ys in series.values()]) if series else np.zeros(0)
    ax = _Axes(all_x, all_y, logx, logy)
    out = _frame(ax, title, xlabel, ylabel)
    for j, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[j % len(PALETTE)]
        out.append(_polyline(ax, xs, ys, color))
        for x, y in zip(xs, ys):
            if (logx and x <= 0) or (logy and y <= 0) or not (np.isfinite(x) and np.isfinite(y)):
                continue
            out.append(f'<circle cx="{_fmt(ax.px(x))}" cy="{_fmt(ax.py(y))}" r="3" fill="{color}"/>')
        ly = MARGIN + 15 + 16 * j
        out.append(f'<line x1="{WIDTH - MARGIN - 150}" y1="{ly}" x2="{WIDTH - MARGIN - 130}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 125}" y="{ly + 4}">{escape(str(name))}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def path_plot(xy, path, title: str = "", goal=None, circles=()) -> None:
    """Planar path ``xy`` (shape ``(T, 2)``) with an optional goal marker and ``(center, radius)`` disks."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    pts_x = [xy[:, 0]]
    pts_y = [xy[:, 1]]
    if goal is not None:
        pts_x.append([goal[0]])
        pts_y.append([goal[1]])
    for (cx, cy), rad in circles:
        pts_x.append([cx - rad, cx + rad])
        pts_y.append([cy - rad, cy + rad])
    ax = _Axes(np.concatenate(pts_x), np.concatenate(pts_y), False, False, equal=True)
    out = _frame(ax, title, "x1", "x2")
    for (cx, cy), rad in circles:
        out.append(f'<circle cx="{_fmt(ax.px(cx))}" cy="{_fmt(ax.py(cy))}" r="{_fmt(ax.scale(rad))}" '
                   'fill="#cccccc" stroke="black"/>')
    out.append(_polyline(ax, xy[:, 0], xy[:, 1], PALETTE[0], 2.0))
    if goal is not None:
        out.append(f'<circle cx="{_fmt(ax.px(goal[0]))}" cy="{_fmt(ax.py(goal[1]))}" r="5" fill="{PALETTE[2]}"/>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
