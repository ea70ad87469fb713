"""Minimal self-contained SVG line charts.

CSV is the normative artifact; these charts are a convenience, so the writer
stays deliberately small: polylines over a framed plot area, linear or log-10
vertical axis, a simple legend. Output is deterministic for fixed input.
"""
from __future__ import annotations

import math

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return _fmt(v)


def line_chart(
    x,
    series: list[tuple[str, np.ndarray]],
    title: str = "",
    x_label: str = "iteration",
    y_label: str = "",
    log_y: bool = False,
) -> str:
    """Render named series over a shared x grid as an SVG document string."""
    x = np.asarray(x, dtype=float)
    finite_vals = np.concatenate([
        np.asarray(v, float)[np.isfinite(np.asarray(v, float))] for _, v in series
    ])
    if log_y:
        finite_vals = finite_vals[finite_vals > 0]
    if finite_vals.size == 0:
        finite_vals = np.array([0.0, 1.0])
    y_min, y_max = float(finite_vals.min()), float(finite_vals.max())
    if log_y:
        y_min, y_max = math.log10(y_min), math.log10(y_max)
    if y_max - y_min < 1e-12:
        y_max = y_min + 1.0
    x_min, x_max = float(x.min()), float(x.max())
    if x_max - x_min < 1e-12:
        x_max = x_min + 1.0

    def sx(v):
        return _ML + (v - x_min) / (x_max - x_min) * (_W - _ML - _MR)

    def sy(v):
        if log_y:
            v = math.log10(v) if v > 0 else y_min
        return _H - _MB - (v - y_min) / (y_max - y_min) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        f'fill="none" stroke="#333"/>',
    ]
    if title:
        parts.append(f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" '
                     f'font-size="15">{title}</text>')

    for i in range(5):
        yv = y_min + (y_max - y_min) * i / 4
        py = sy(10**yv if log_y else yv)
        label = _tick_label(10**yv) if log_y else _tick_label(yv)
        parts.append(f'<line x1="{_ML}" y1="{py:.1f}" x2="{_W - _MR}" y2="{py:.1f}" '
                     f'stroke="#ddd"/>')
        parts.append(f'<text x="{_ML - 6}" y="{py + 4:.1f}" text-anchor="end">{label}</text>')
    for i in range(5):
        xv = x_min + (x_max - x_min) * i / 4
        px = sx(xv)
        parts.append(f'<text x="{px:.1f}" y="{_H - _MB + 18}" text-anchor="middle">'
                     f'{_tick_label(xv)}</text>')
    parts.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" '
                 f'text-anchor="middle">{x_label}</text>')
    if y_label:
        parts.append(f'<text x="16" y="{(_MT + _H - _MB) / 2:.1f}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.1f})">{y_label}</text>')

    for idx, (name, vals) in enumerate(series):
        vals = np.asarray(vals, dtype=float)
        color = _COLORS[idx % len(_COLORS)]
        pts = []
        for xv, yv in zip(x, vals):
            if not np.isfinite(yv) or (log_y and yv <= 0):
                continue
            pts.append(f"{sx(xv):.1f},{sy(yv):.1f}")
        if pts:
            parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 16 + 16 * idx
        parts.append(f'<line x1="{_W - _MR - 150}" y1="{ly}" x2="{_W - _MR - 122}" '
                     f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 116}" y="{ly + 4}">{name}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
