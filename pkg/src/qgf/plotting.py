"""Deterministic SVG line plots: same input, byte-identical file."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import EmptySequenceError
from .ioutil import write_text_atomic

VIEW_W = 640
VIEW_H = 360
MARGIN = 40
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")


def _scale(values: np.ndarray, lo: float, hi: float, out_lo: float, out_hi: float) -> np.ndarray:
    span = hi - lo
    if span == 0:
        return np.full_like(values, (out_lo + out_hi) / 2.0)
    return out_lo + (values - lo) / span * (out_hi - out_lo)


def plot_series(series: dict[str, np.ndarray], path: str | Path,
                title: str = "") -> Path:
    """One polyline per named series over a shared axis range, plus a legend."""
    if not series:
        raise EmptySequenceError("nothing to plot")
    arrays = {name: np.asarray(vals, dtype=np.float64).ravel() for name, vals in series.items()}
    for name, arr in arrays.items():
        if arr.size == 0:
            raise EmptySequenceError(f"series {name!r} is empty")

    x_max = max(arr.size for arr in arrays.values()) - 1
    y_lo = min(arr.min() for arr in arrays.values())
    y_hi = max(arr.max() for arr in arrays.values())
    if y_lo == y_hi:
        y_lo -= 1.0
        y_hi += 1.0

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEW_W} {VIEW_H}">',
        f'<rect width="{VIEW_W}" height="{VIEW_H}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{VIEW_W - 2 * MARGIN}" '
        f'height="{VIEW_H - 2 * MARGIN}" fill="none" stroke="#cccccc"/>',
    ]
    if title:
        lines.append(f'<text x="{VIEW_W // 2}" y="{MARGIN - 14}" text-anchor="middle" '
                     f'font-family="monospace" font-size="14">{title}</text>')
    lines.append(f'<text x="{MARGIN}" y="{VIEW_H - 8}" font-family="monospace" '
                 f'font-size="11">y: [{y_lo:.6g}, {y_hi:.6g}], x: [0, {x_max}]</text>')

    for idx, (name, arr) in enumerate(arrays.items()):
        color = PALETTE[idx % len(PALETTE)]
        xs = _scale(np.arange(arr.size, dtype=np.float64), 0.0, float(max(x_max, 1)),
                    MARGIN, VIEW_W - MARGIN)
        ys = _scale(arr, y_lo, y_hi, VIEW_H - MARGIN, MARGIN)
        points = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
        lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                     f'points="{points}"/>')
        ly = MARGIN + 14 + 16 * idx
        lines.append(f'<rect x="{VIEW_W - MARGIN - 130}" y="{ly - 9}" width="10" height="10" '
                     f'fill="{color}"/>')
        lines.append(f'<text x="{VIEW_W - MARGIN - 115}" y="{ly}" font-family="monospace" '
                     f'font-size="11">{name}</text>')
    lines.append("</svg>")
    return write_text_atomic(path, "\n".join(lines) + "\n")
