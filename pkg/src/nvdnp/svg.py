"""Minimal SVG 1.1 line plots."""

from __future__ import annotations

import os
import tempfile
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad")


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def line_plot(x, series, xlabel="", ylabel="", title="", width=640, height=400) -> str:
    """SVG document for one or more ``(label, y)`` series sharing ``x``."""
    x = np.asarray(x, dtype=float)
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom
    ys = [np.asarray(y, dtype=float) for _, y in series]
    ymin = min(float(np.nanmin(y)) for y in ys)
    ymax = max(float(np.nanmax(y)) for y in ys)
    if ymax == ymin:
        ymin, ymax = ymin - 1, ymax + 1
    xmin, xmax = float(x.min()), float(x.max())
    if xmax == xmin:
        xmin, xmax = xmin - 1, xmax + 1

    def sx(v):
        return left + (v - xmin) / (xmax - xmin) * pw

    def sy(v):
        return top + (ymax - v) / (ymax - ymin) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(xmin, xmax):
        parts.append(f'<text x="{sx(t):.2f}" y="{top + ph + 18}" font-size="11" '
                     f'text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(ymin, ymax):
        parts.append(f'<text x="{left - 6}" y="{sy(t) + 4:.2f}" font-size="11" '
                     f'text-anchor="end">{t:.3g}</text>')
    for k, ((label, _), y) in enumerate(zip(series, ys)):
        ok = np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        color = COLORS[k % len(COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{left + pw - 6}" y="{top + 16 + 14 * k}" font-size="11" '
                     f'text-anchor="end" fill="{color}">{escape(label)}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 10}" font-size="12" '
                 f'text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{top + ph / 2}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>')
    if title:
        parts.append(f'<text x="{left + pw / 2}" y="18" font-size="13" '
                     f'text-anchor="middle">{escape(title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_text_atomic(path, text: str) -> None:
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
