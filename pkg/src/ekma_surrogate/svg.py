"""Dependency-free SVG heatmap of an EKMA surface with isopleth overlay."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .ekma import EkmaSurface
from .isopleths import Isopleth

# viridis anchors; colours between them are interpolated linearly in sRGB
RAMP = ("#440154", "#3b528b", "#21918c", "#5ec962", "#fde725")

PLOT_W, PLOT_H = 440, 440
MARGIN_L, MARGIN_T, MARGIN_B = 70, 30, 60
LEGEND_GAP, LEGEND_W = 30, 18
WIDTH = MARGIN_L + PLOT_W + LEGEND_GAP + LEGEND_W + 70
HEIGHT = MARGIN_T + PLOT_H + MARGIN_B


def _rgb(hex_colour: str) -> np.ndarray:
    return np.array([int(hex_colour[k:k + 2], 16) for k in (1, 3, 5)], dtype=np.float64)


_ANCHORS = np.array([_rgb(c) for c in RAMP])


def ramp_colour(t: float) -> str:
    """Colour at position t in [0, 1] along the ramp."""
    t = min(max(float(t), 0.0), 1.0)
    pos = t * (len(RAMP) - 1)
    k = min(int(pos), len(RAMP) - 2)
    f = pos - k
    c = _ANCHORS[k] * (1.0 - f) + _ANCHORS[k + 1] * f
    r, g, b = (int(round(v)) for v in c)
    return f"#{r:02x}{g:02x}{b:02x}"


def _f(v: float) -> str:
    return f"{v:.2f}"


def _edges(centres: np.ndarray) -> np.ndarray:
    """Cell boundaries halfway between grid points, extended at both ends."""
    if centres.size == 1:
        return np.array([centres[0] - 0.5, centres[0] + 0.5])
    mid = (centres[:-1] + centres[1:]) / 2.0
    return np.concatenate(([2 * centres[0] - mid[0]], mid, [2 * centres[-1] - mid[-1]]))


def render_heatmap(surface: EkmaSurface, isopleths: Sequence[Isopleth], dest: str | Path,
                   title: str = "Surrogate O3 response (ppm)") -> Path:
    return render_grid(surface.o3_mean, surface.alphas, surface.betas, isopleths, dest,
                       title, "α (NO2 scale)", "β (CO scale)")


def render_grid(z, xs: Sequence[float], ys: Sequence[float], isopleths: Sequence[Isopleth],
                dest: str | Path, title: str, xlabel: str, ylabel: str,
                tick_format: tuple[str, str] = (".1f", ".1f")) -> Path:
    """Heatmap of z[i][j] at (xs[i], ys[j]) with cell colours on a linear min-max ramp."""
    z = np.asarray(z, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if z.shape != (xs.size, ys.size):
        raise ValueError("grid coordinates do not match surface shape")
    if z.size == 0 or not np.isfinite(z).all():
        raise ValueError("surface must be non-empty and finite")
    lo, hi = float(z.min()), float(z.max())
    span = hi - lo

    def norm(v: float) -> float:
        return 0.5 if span == 0 else (v - lo) / span

    ax_edges, by_edges = _edges(xs), _edges(ys)
    x0, x1 = ax_edges[0], ax_edges[-1]
    y0, y1 = by_edges[0], by_edges[-1]

    def px(a: float) -> float:
        return MARGIN_L + (a - x0) / (x1 - x0) * PLOT_W

    def py(b: float) -> float:
        return MARGIN_T + PLOT_H - (b - y0) / (y1 - y0) * PLOT_H

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<title>{escape(title)}</title>',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        '<g id="cells" shape-rendering="crispEdges">',
    ]
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            xa, xb = px(ax_edges[i]), px(ax_edges[i + 1])
            ya, yb = py(by_edges[j + 1]), py(by_edges[j])
            out.append(f'<rect x="{_f(xa)}" y="{_f(ya)}" width="{_f(xb - xa)}" '
                       f'height="{_f(yb - ya)}" fill="{ramp_colour(norm(z[i, j]))}"/>')
    out.append("</g>")

    out.append('<g id="isopleths" fill="none" stroke="#ffffff" stroke-width="1.5">')
    for iso in isopleths:
        pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in iso.points)
        out.append(f'<polyline data-level="{iso.level:.6g}" points="{pts}"/>')
    out.append("</g>")

    # axes, ticks at grid points
    bottom = MARGIN_T + PLOT_H
    out.append('<g id="axes" stroke="#000000" fill="#000000">')
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{PLOT_W}" height="{PLOT_H}" '
               f'fill="none"/>')
    xf, yf = tick_format
    for a in xs:
        x = px(a)
        out.append(f'<line x1="{_f(x)}" y1="{bottom}" x2="{_f(x)}" y2="{bottom + 5}"/>')
        out.append(f'<text x="{_f(x)}" y="{bottom + 18}" stroke="none" '
                   f'text-anchor="middle">{a:{xf}}</text>')
    for b in ys:
        y = py(b)
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_f(y)}" x2="{MARGIN_L}" y2="{_f(y)}"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_f(y + 4)}" stroke="none" '
                   f'text-anchor="end">{b:{yf}}</text>')
    out.append(f'<text x="{MARGIN_L + PLOT_W / 2:.2f}" y="{bottom + 42}" stroke="none" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="20" y="{MARGIN_T + PLOT_H / 2:.2f}" stroke="none" '
               f'text-anchor="middle" transform="rotate(-90 20 {MARGIN_T + PLOT_H / 2:.2f})">'
               f'{escape(ylabel)}</text>')
    out.append(f'<text x="{MARGIN_L + PLOT_W / 2:.2f}" y="{MARGIN_T - 10}" stroke="none" '
               f'text-anchor="middle">{escape(title)}</text>')
    out.append("</g>")

    # legend: 50 stacked bands from min (bottom) to max (top)
    lx = MARGIN_L + PLOT_W + LEGEND_GAP
    bands = 50
    h = PLOT_H / bands
    out.append('<g id="legend" shape-rendering="crispEdges">')
    for k in range(bands):
        t = 0.5 if span == 0 else (k + 0.5) / bands
        y = MARGIN_T + PLOT_H - (k + 1) * h
        out.append(f'<rect x="{lx}" y="{_f(y)}" width="{LEGEND_W}" height="{_f(h)}" '
                   f'fill="{ramp_colour(t)}"/>')
    out.append(f'<rect x="{lx}" y="{MARGIN_T}" width="{LEGEND_W}" height="{PLOT_H}" '
               f'fill="none" stroke="#000000"/>')
    out.append(f'<text x="{lx + LEGEND_W + 4}" y="{MARGIN_T + 10}">{hi:.4f}</text>')
    out.append(f'<text x="{lx + LEGEND_W + 4}" y="{MARGIN_T + PLOT_H}">{lo:.4f}</text>')
    out.append("</g>")
    out.append("</svg>")

    dest = Path(dest)
    dest.write_text("\n".join(out) + "\n", encoding="utf-8")
    return dest
