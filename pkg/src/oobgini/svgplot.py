"""Dependency-free SVG boxplots for long-format score tables.

Boxes show the quartiles (linear interpolation, as ``numpy.percentile``) and
the median; whiskers reach the most extreme points within 1.5 IQR of the box,
and points beyond are drawn individually.  Output depends only on the input
rows, so the same CSV always yields the same bytes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from html import escape

import numpy as np

PANEL_H = 300
PLOT_TOP = 40
PLOT_H = 220
BOX_W = 26
BOX_STEP = 44
LEFT_PAD = 64
RIGHT_PAD = 16


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple[float, ...]


def box_stats(values) -> BoxStats:
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("no values for box")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    out = v[(v < lo_fence) | (v > hi_fence)]
    return BoxStats(float(q1), float(med), float(q3), float(inside.min()), float(inside.max()),
                    tuple(float(x) for x in out))


def read_long_csv(text: str) -> tuple[list[dict], list[str]]:
    """Parse a long CSV; returns ``(rows, comment_lines)``. ``#`` lines are comments."""
    comments, body = [], []
    for line in text.splitlines():
        (comments if line.startswith("#") else body).append(line)
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    return rows, comments


def group_scores(rows: list[dict], panel_key: str = "measure", box_key: str = "feature"):
    """``{panel: {box: [scores]}}`` preserving first-seen order."""
    groups: dict[str, dict[str, list[float]]] = {}
    for r in rows:
        try:
            panel, box, score = r[panel_key], r[box_key], float(r["score"])
        except KeyError as exc:
            raise ValueError(f"input lacks column {exc.args[0]!r}") from None
        groups.setdefault(panel, {}).setdefault(box, []).append(score)
    return groups


@dataclass(frozen=True)
class Glyph:
    """Pixel geometry of one box; y grows downward."""

    label: str
    x: float
    stats: BoxStats
    y_q1: float
    y_median: float
    y_q3: float
    y_lo: float
    y_hi: float
    y_outliers: tuple[float, ...]


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


def layout_panel(boxes: dict[str, list[float]]):
    """Compute glyphs plus the value->pixel mapping for one panel."""
    stats = {k: box_stats(v) for k, v in boxes.items()}
    lo = min(min(s.whisker_lo, *s.outliers) if s.outliers else s.whisker_lo for s in stats.values())
    hi = max(max(s.whisker_hi, *s.outliers) if s.outliers else s.whisker_hi for s in stats.values())
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def ypix(v: float) -> float:
        return PLOT_TOP + PLOT_H * (hi - v) / (hi - lo)

    glyphs = []
    for i, (label, s) in enumerate(stats.items()):
        x = LEFT_PAD + BOX_STEP * i + BOX_STEP / 2
        glyphs.append(Glyph(label, x, s, ypix(s.q1), ypix(s.median), ypix(s.q3),
                            ypix(s.whisker_lo), ypix(s.whisker_hi), tuple(ypix(o) for o in s.outliers)))
    return glyphs, (lo, hi), ypix


def _f(v: float) -> str:
    return f"{v:.2f}"


def render(groups: dict[str, dict[str, list[float]]], title: str | None = None,
           metadata: list[str] | None = None) -> str:
    if not groups or not any(groups.values()):
        raise ValueError("empty input: nothing to plot")
    panels = []
    x_off = 0.0
    for name, boxes in groups.items():
        glyphs, (lo, hi), ypix = layout_panel(boxes)
        width = LEFT_PAD + BOX_STEP * len(glyphs) + RIGHT_PAD
        parts = [f'<g transform="translate({_f(x_off)},0)">',
                 f'<text x="{_f(LEFT_PAD + (width - LEFT_PAD) / 2)}" y="24" text-anchor="middle" '
                 f'font-size="14">{escape(name)}</text>',
                 f'<line x1="{LEFT_PAD}" y1="{PLOT_TOP}" x2="{LEFT_PAD}" y2="{PLOT_TOP + PLOT_H}" stroke="#000"/>']
        for t in _nice_ticks(lo, hi):
            y = ypix(t)
            parts.append(f'<line x1="{LEFT_PAD - 4}" y1="{_f(y)}" x2="{LEFT_PAD}" y2="{_f(y)}" stroke="#000"/>')
            parts.append(f'<text x="{LEFT_PAD - 6}" y="{_f(y + 4)}" text-anchor="end" font-size="10">{t:.3g}</text>')
        y0 = ypix(0.0)
        parts.append(f'<line x1="{LEFT_PAD}" y1="{_f(y0)}" x2="{_f(width - RIGHT_PAD)}" y2="{_f(y0)}" '
                     f'stroke="#999" stroke-dasharray="4,3"/>')
        for g in glyphs:
            half = BOX_W / 2
            parts += [
                f'<line x1="{_f(g.x)}" y1="{_f(g.y_hi)}" x2="{_f(g.x)}" y2="{_f(g.y_q3)}" stroke="#000"/>',
                f'<line x1="{_f(g.x)}" y1="{_f(g.y_q1)}" x2="{_f(g.x)}" y2="{_f(g.y_lo)}" stroke="#000"/>',
                f'<line x1="{_f(g.x - half / 2)}" y1="{_f(g.y_hi)}" x2="{_f(g.x + half / 2)}" y2="{_f(g.y_hi)}" stroke="#000"/>',
                f'<line x1="{_f(g.x - half / 2)}" y1="{_f(g.y_lo)}" x2="{_f(g.x + half / 2)}" y2="{_f(g.y_lo)}" stroke="#000"/>',
                f'<rect x="{_f(g.x - half)}" y="{_f(g.y_q3)}" width="{_f(BOX_W)}" '
                f'height="{_f(g.y_q1 - g.y_q3)}" fill="#cfe0f3" stroke="#000"/>',
                f'<line class="median" x1="{_f(g.x - half)}" y1="{_f(g.y_median)}" x2="{_f(g.x + half)}" '
                f'y2="{_f(g.y_median)}" stroke="#000" stroke-width="2"/>',
            ]
            for yo in g.y_outliers:
                parts.append(f'<circle cx="{_f(g.x)}" cy="{_f(yo)}" r="2.5" fill="none" stroke="#000"/>')
            parts.append(f'<text x="{_f(g.x)}" y="{PLOT_TOP + PLOT_H + 16}" text-anchor="middle" '
                         f'font-size="11">{escape(g.label)}</text>')
        parts.append("</g>")
        panels.append("\n".join(parts))
        x_off += width
    total_w = x_off
    height = PANEL_H + (20 if title else 0)
    head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(total_w)}" height="{height}" '
            f'viewBox="0 0 {_f(total_w)} {height}" font-family="sans-serif">']
    if metadata:
        head.append("<metadata>" + escape("\n".join(metadata)) + "</metadata>")
    body = "\n".join(panels)
    if title:
        head.append(f'<text x="{_f(total_w / 2)}" y="16" text-anchor="middle" font-size="15">{escape(title)}</text>')
        body = f'<g transform="translate(0,20)">\n{body}\n</g>'
    return "\n".join(head) + "\n" + body + "\n</svg>\n"


def emit_boxplot(long_csv: str, group_keys: tuple[str, str] = ("measure", "feature"),
                 title: str | None = None) -> str:
    """Render a long-format CSV (text) as one boxplot panel per ``group_keys[0]``."""
    rows, comments = read_long_csv(long_csv)
    if not rows:
        raise ValueError("empty input: no data rows")
    return render(group_scores(rows, *group_keys), title, comments)
