"""Minimal hand-written SVG line and scatter plots with optional log axes."""

from __future__ import annotations

import math

import numpy as np

WIDTH, HEIGHT, MARGIN = 480, 360, 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _transform(vals, lo, hi, log):
    vals = np.asarray(vals, dtype=float)
    if log:
        vals, lo, hi = np.log10(vals), math.log10(lo), math.log10(hi)
    span = hi - lo if hi > lo else 1.0
    return (vals - lo) / span


def _range(series, log):
    vals = np.concatenate([np.asarray(v, dtype=float) for v in series])
    vals = vals[np.isfinite(vals)]
    if log:
        vals = vals[vals > 0]
    if vals.size == 0:
        return (1.0, 10.0) if log else (0.0, 1.0)
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        lo, hi = (lo / 2, hi * 2) if log else (lo - 1, hi + 1)
    return lo, hi


def _ticks(lo, hi, log):
    if log:
        return [10.0 ** k for k in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)
                if lo <= 10.0 ** k <= hi] or [lo, hi]
    return list(np.linspace(lo, hi, 5))


def plot_svg(series, title: str, xlabel: str, ylabel: str, logx=False, logy=False,
             lines=True, diagonal=False) -> str:
    """``series``: list of ``(label, xs, ys)``.  Returns the SVG document."""
    xlo, xhi = _range([s[1] for s in series], logx)
    ylo, yhi = _range([s[2] for s in series], logy)
    if diagonal:
        xlo = ylo = min(xlo, ylo)
        xhi = yhi = max(xhi, yhi)
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + pw * _transform(x, xlo, xhi, logx)

    def py(y):
        return HEIGHT - MARGIN - ph * _transform(y, ylo, yhi, logy)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>',
           f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" '
           f'transform="rotate(-90 14 {HEIGHT / 2})">{ylabel}</text>']
    for t in _ticks(xlo, xhi, logx):
        x = _fmt(float(px(t)))
        out.append(f'<line x1="{x}" y1="{HEIGHT - MARGIN}" x2="{x}" y2="{HEIGHT - MARGIN + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(ylo, yhi, logy):
        y = _fmt(float(py(t)))
        out.append(f'<line x1="{MARGIN - 4}" y1="{y}" x2="{MARGIN}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{MARGIN - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">{t:.3g}</text>')
    if diagonal:
        a, b = _fmt(float(px(xlo))), _fmt(float(px(xhi)))
        out.append(f'<line x1="{a}" y1="{_fmt(float(py(ylo)))}" x2="{b}" y2="{_fmt(float(py(yhi)))}" '
                   'stroke="gray" stroke-dasharray="4 3"/>')
    for k, (label, xs, ys) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        if logx:
            ok &= xs > 0
        if logy:
            ok &= ys > 0
        pts = [(_fmt(float(px(x))), _fmt(float(py(y)))) for x, y in zip(xs[ok], ys[ok])]
        if lines and len(pts) > 1:
            path = " ".join(f"{x},{y}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 14 + 14 * k}" text-anchor="end" '
                   f'fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
