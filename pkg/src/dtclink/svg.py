"""Native SVG rendering for sweep and trajectory outputs (no plotting deps)."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 28, 44
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#17becf", "#7f7f7f"]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or lo == hi:
        return [lo]
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** math.floor(math.log10(abs(raw)))
    step = min(s for s in (1 * mag, 2 * mag, 5 * mag, 10 * mag) if s >= raw)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * abs(step):
        out.append(round(t, 12))
        t += step
    return out or [lo]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


class _Canvas:
    def __init__(self, width: int, height: int, title: str):
        self.w, self.h = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width/2:.1f}" y="16" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>',
        ]

    def add(self, fragment: str) -> None:
        self.parts.append(fragment)

    def finish(self, header_comment: str | None = None) -> str:
        body = "\n".join(self.parts + ["</svg>"])
        if header_comment:
            head, rest = body.split("\n", 1)
            body = f"{head}\n<!-- {header_comment} -->\n{rest}"
        return body + "\n"


def _axes(canvas: _Canvas, xlo, xhi, ylo, yhi, xlabel, ylabel, logy=False):
    px0, px1 = MARGIN_L, canvas.w - MARGIN_R
    py0, py1 = canvas.h - MARGIN_B, MARGIN_T

    def sx(x):
        return px0 + (x - xlo) / (xhi - xlo or 1.0) * (px1 - px0)

    def sy(y):
        return py0 + (y - ylo) / (yhi - ylo or 1.0) * (py1 - py0)

    canvas.add(f'<rect x="{px0}" y="{py1}" width="{px1-px0}" height="{py0-py1}" '
               f'fill="none" stroke="#333" stroke-width="1"/>')
    for t in _ticks(xlo, xhi):
        canvas.add(f'<line x1="{sx(t):.1f}" y1="{py0}" x2="{sx(t):.1f}" '
                   f'y2="{py0+4}" stroke="#333"/>')
        canvas.add(f'<text x="{sx(t):.1f}" y="{py0+16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        label = _fmt(10.0 ** t) if logy else _fmt(t)
        canvas.add(f'<line x1="{px0-4}" y1="{sy(t):.1f}" x2="{px0}" '
                   f'y2="{sy(t):.1f}" stroke="#333"/>')
        canvas.add(f'<text x="{px0-6}" y="{sy(t)+3:.1f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{label}</text>')
    canvas.add(f'<text x="{(px0+px1)/2:.1f}" y="{canvas.h-8}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="11">{xlabel}</text>')
    canvas.add(f'<text x="14" y="{(py0+py1)/2:.1f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="11" '
               f'transform="rotate(-90 14 {(py0+py1)/2:.1f})">{ylabel}</text>')
    return sx, sy


def line_plot(series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
              xlabel: str, ylabel: str, title: str, logy: bool = False,
              width: int = 640, height: int = 420,
              header_comment: str | None = None) -> str:
    """Render named (x, y) series as polylines; logy plots log10 of |y|."""
    canvas = _Canvas(width, height, title)
    xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series])
    ys = []
    for _, _, y in series:
        y = np.asarray(y, dtype=float)
        if logy:
            with np.errstate(divide="ignore"):
                y = np.log10(np.abs(y))
        ys.append(y)
    yall = np.concatenate(ys)
    finite = np.isfinite(yall)
    ylo, yhi = (yall[finite].min(), yall[finite].max()) if finite.any() else (0, 1)
    if ylo == yhi:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.05 * (yhi - ylo)
    sx, sy = _axes(canvas, xs.min(), xs.max(), ylo - pad, yhi + pad,
                   xlabel, ylabel, logy=logy)
    for i, ((name, x, _), y) in enumerate(zip(series, ys)):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(float(xi)):.2f},{sy(float(yi)):.2f}"
                       for xi, yi in zip(x, y) if math.isfinite(float(yi)))
        canvas.add(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        canvas.add(f'<text x="{width-MARGIN_R-6}" y="{MARGIN_T+14+13*i}" '
                   f'text-anchor="end" font-family="sans-serif" font-size="10" '
                   f'fill="{color}">{name}</text>')
    return canvas.finish(header_comment)


def _diverging_color(u: float) -> str:
    """Blue-white-red map on u in [0, 1]."""
    u = min(max(u, 0.0), 1.0)
    if u < 0.5:
        s = u / 0.5
        r, g, b = int(40 + 215 * s), int(60 + 195 * s), 255
    else:
        s = (u - 0.5) / 0.5
        r, g, b = 255, int(255 - 195 * s), int(255 - 215 * s)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(x: Sequence[float], y: Sequence[float], z: np.ndarray,
            xlabel: str, ylabel: str, title: str, zlabel: str = "",
            width: int = 560, height: int = 480,
            header_comment: str | None = None) -> str:
    """Render a dense grid z[i, j] over (x[i], y[j]) as colored cells."""
    z = np.asarray(z, dtype=float)
    canvas = _Canvas(width, height, title)
    finite = np.isfinite(z)
    zlo, zhi = (z[finite].min(), z[finite].max()) if finite.any() else (0.0, 1.0)
    if zlo == zhi:
        zhi = zlo + 1.0
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx, sy = _axes(canvas, x.min(), x.max(), y.min(), y.max(), xlabel, ylabel)

    def edges(v):
        mids = np.concatenate([[v[0] - (v[1] - v[0]) / 2 if len(v) > 1 else v[0] - 0.5],
                               (v[:-1] + v[1:]) / 2,
                               [v[-1] + (v[-1] - v[-2]) / 2 if len(v) > 1 else v[-1] + 0.5]])
        return mids

    xe, ye = edges(x), edges(y)
    for i in range(len(x)):
        for j in range(len(y)):
            if not np.isfinite(z[i, j]):
                continue
            u = (z[i, j] - zlo) / (zhi - zlo)
            x0, x1 = sx(xe[i]), sx(xe[i + 1])
            y0, y1 = sy(ye[j]), sy(ye[j + 1])
            canvas.add(f'<rect x="{min(x0, x1):.2f}" y="{min(y0, y1):.2f}" '
                       f'width="{abs(x1-x0):.2f}" height="{abs(y1-y0):.2f}" '
                       f'fill="{_diverging_color(u)}"/>')
    # color bar
    bar_x = width - MARGIN_R - 0
    for k in range(60):
        u = k / 59.0
        yy = (canvas.h - MARGIN_B) - u * (canvas.h - MARGIN_B - MARGIN_T)
        canvas.add(f'<rect x="{bar_x-10}" y="{yy-3:.2f}" width="8" height="3.2" '
                   f'fill="{_diverging_color(u)}"/>')
    canvas.add(f'<text x="{bar_x-12}" y="{MARGIN_T+8}" text-anchor="end" '
               f'font-family="sans-serif" font-size="9">{_fmt(zhi)} {zlabel}</text>')
    canvas.add(f'<text x="{bar_x-12}" y="{canvas.h-MARGIN_B}" text-anchor="end" '
               f'font-family="sans-serif" font-size="9">{_fmt(zlo)}</text>')
    return canvas.finish(header_comment)
