"""Minimal SVG line plot with a +/- one standard deviation band per series."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 440
MARGIN = dict(left=70, right=170, top=40, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
MAX_POINTS = 400


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 1e-9, step)]


def write_line_plot(path, series: dict, title: str, ylabel: str) -> None:
    """``series`` maps label -> (mean, std) arrays indexed by round 1..T."""
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    T = max((len(m) for m, _ in series.values()), default=1)
    ymax = max((float(np.max(m + s)) for m, s in series.values() if len(m)), default=1.0)
    ymin = min((float(np.min(m - s)) for m, s in series.values() if len(m)), default=0.0)
    ymin = min(ymin, 0.0)
    if ymax <= ymin:
        ymax = ymin + 1.0

    def sx(t):
        return MARGIN["left"] + (t - 1) / max(T - 1, 1) * pw

    def sy(v):
        return MARGIN["top"] + (1 - (v - ymin) / (ymax - ymin)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"] + ph}" x2="{MARGIN["left"] + pw}" '
        f'y2="{MARGIN["top"] + ph}" stroke="black"/>',
        f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"]}" x2="{MARGIN["left"]}" '
        f'y2="{MARGIN["top"] + ph}" stroke="black"/>',
    ]
    for v in _ticks(ymin, ymax):
        y = sy(v)
        parts.append(f'<line x1="{MARGIN["left"] - 4}" y1="{y:.1f}" x2="{MARGIN["left"] + pw}" '
                     f'y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{MARGIN["left"] - 8}" y="{y + 4:.1f}" text-anchor="end">{v:g}</text>')
    for v in _ticks(1, T):
        x = sx(v)
        parts.append(f'<text x="{x:.1f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{v:g}</text>')
    parts.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 10}" '
                 f'text-anchor="middle">round</text>')
    parts.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>')

    for n, (label, (mean, std)) in enumerate(series.items()):
        color = COLORS[n % len(COLORS)]
        mean, std = np.asarray(mean, float), np.asarray(std, float)
        idx = np.unique(np.linspace(0, len(mean) - 1, min(len(mean), MAX_POINTS)).astype(int))
        ts = idx + 1
        upper = " ".join(f"{sx(t):.1f},{sy(v):.1f}" for t, v in zip(ts, mean[idx] + std[idx]))
        lower = " ".join(f"{sx(t):.1f},{sy(v):.1f}" for t, v in zip(ts[::-1], (mean[idx] - std[idx])[::-1]))
        parts.append(f'<polygon points="{upper} {lower}" fill="{color}" fill-opacity="0.18" stroke="none"/>')
        line = " ".join(f"{sx(t):.1f},{sy(v):.1f}" for t, v in zip(ts, mean[idx]))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        ly = MARGIN["top"] + 14 + 18 * n
        lx = MARGIN["left"] + pw + 12
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="3"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly}">{escape(label)}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
