"""
pycorv.svg - Minimal SVG plots

Log-log line charts for error scaling and histogram bars with the exact
density overlaid. Plain string assembly; no plotting dependency.
"""

import math
from typing import Dict, List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

WIDTH = 640
HEIGHT = 420
MARGIN = 60

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _frame(title: str, body: List[str], x_label: str, y_label: str) -> str:
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="18" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {HEIGHT / 2})">{escape(y_label)}</text>',
        *body,
        "</svg>",
        "",
    ])


def _scale(lo: float, hi: float, out_lo: float, out_hi: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: out_lo + (v - lo) / span * (out_hi - out_lo)


def loglog_svg(series: Dict[str, Tuple[Sequence[float], Sequence[float]]], title: str,
               x_label: str = "stepsize", y_label: str = "error") -> str:
    """One polyline per series; non-positive or non-finite points are skipped."""
    cleaned = {}
    for name, (xs, ys) in series.items():
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        keep = np.isfinite(xs) & np.isfinite(ys) & (xs > 0) & (ys > 0)
        cleaned[name] = (np.log10(xs[keep]), np.log10(ys[keep]))
    all_x = np.concatenate([x for x, _ in cleaned.values()] or [np.zeros(1)])
    all_y = np.concatenate([y for _, y in cleaned.values()] or [np.zeros(1)])
    if all_x.size == 0:
        all_x = all_y = np.zeros(1)
    sx = _scale(math.floor(all_x.min()), math.ceil(all_x.max()), MARGIN, WIDTH - MARGIN)
    sy = _scale(math.floor(all_y.min()), math.ceil(all_y.max()), HEIGHT - MARGIN, MARGIN)

    body = []
    for k in range(math.floor(all_x.min()), math.ceil(all_x.max()) + 1):
        body.append(f'<text x="{sx(k):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">1e{k}</text>')
    for k in range(math.floor(all_y.min()), math.ceil(all_y.max()) + 1):
        body.append(f'<text x="{MARGIN - 6}" y="{sy(k) + 4:.1f}" text-anchor="end">1e{k}</text>')
    for i, (name, (xs, ys)) in enumerate(cleaned.items()):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, ys))
        body.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in zip(xs, ys):
            body.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        body.append(f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 16 * (i + 1)}" text-anchor="end" '
                    f'fill="{color}">{escape(name)}</text>')
    return _frame(title, body, f"{x_label} (log10)", f"{y_label} (log10)")


def histogram_svg(edges: Sequence[float], empirical: Sequence[float], exact: Sequence[float],
                  title: str) -> str:
    """Bars of empirical bin mass with the exact bin mass as a line."""
    edges = np.asarray(edges, dtype=np.float64)
    empirical = np.asarray(empirical, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    top = float(max(empirical.max(initial=0.0), exact.max(initial=0.0))) or 1.0
    sx = _scale(float(edges[0]), float(edges[-1]), MARGIN, WIDTH - MARGIN)
    sy = _scale(0.0, top * 1.05, HEIGHT - MARGIN, MARGIN)

    body = []
    for lo, hi, mass in zip(edges[:-1], edges[1:], empirical):
        x0, x1, y = sx(lo), sx(hi), sy(mass)
        body.append(f'<rect x="{x0:.1f}" y="{y:.1f}" width="{max(x1 - x0 - 1, 0.5):.1f}" '
                    f'height="{HEIGHT - MARGIN - y:.1f}" fill="#9ecae1"/>')
    centers = 0.5 * (edges[:-1] + edges[1:])
    points = " ".join(f"{sx(c):.1f},{sy(m):.1f}" for c, m in zip(centers, exact))
    body.append(f'<polyline points="{points}" fill="none" stroke="#d62728" stroke-width="2"/>')
    body.append(f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{edges[0]:g}</text>')
    body.append(f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{edges[-1]:g}</text>')
    return _frame(title, body, "theta", "bin mass")
