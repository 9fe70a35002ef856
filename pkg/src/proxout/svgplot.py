"""Minimal deterministic SVG emitters for the reporting commands.

Every point element carries ``data-*`` attributes holding the raw values
it renders, so tests can cross-check plots against the CSVs they
accompany without re-deriving the pixel transform.
"""

from __future__ import annotations

import math

import numpy as np

WIDTH = 720
HEIGHT = 480
MARGIN = 56

PALETTE = ("#4c78a8", "#59a14f", "#9467bd", "#e49444", "#76b7b2",
           "#b07aa1", "#bab0ac", "#8cd17d", "#d4a6c8", "#f1ce63")
OUTLIER_COLOR = "#d62728"


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6g}"


class _Scale:
    def __init__(self, lo, hi, out_lo, out_hi):
        if not math.isfinite(lo) or not math.isfinite(hi):
            lo, hi = 0.0, 1.0
        if hi <= lo:
            hi = lo + 1.0
        pad = 0.05 * (hi - lo)
        self.lo = lo - pad
        self.hi = hi + pad
        self.out_lo = out_lo
        self.out_hi = out_hi

    def __call__(self, v: float) -> float:
        if not math.isfinite(v):
            v = self.hi if v > 0 else self.lo
        r = (v - self.lo) / (self.hi - self.lo)
        return self.out_lo + r * (self.out_hi - self.out_lo)


def _header(title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]


def _axes(x_label: str, y_label: str) -> list[str]:
    return [
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>',
        f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{y_label}</text>',
    ]


def outlier_scatter_svg(measures, class_ids, class_names, flags,
                        title="Within-class outlier measures") -> str:
    """One row per class (y), outlier measure on x, flagged points red."""
    measures = np.asarray(measures, dtype=np.float64)
    finite = measures[np.isfinite(measures)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    sx = _Scale(lo, hi, MARGIN, WIDTH - MARGIN)
    sy = _Scale(-0.5, len(class_names) - 0.5, HEIGHT - MARGIN, MARGIN)
    parts = _header(title) + _axes("outlier measure", "class")
    for j, name in enumerate(class_names):
        parts.append(
            f'<text x="{MARGIN - 6}" y="{sy(j):.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{name}</text>')
    for i, (v, j) in enumerate(zip(measures, class_ids)):
        color = OUTLIER_COLOR if flags[i] else PALETTE[j % len(PALETTE)]
        parts.append(
            f'<circle cx="{sx(v):.2f}" cy="{sy(int(j)):.2f}" r="3" '
            f'fill="{color}" fill-opacity="0.7" data-record="{i}" '
            f'data-value="{_fmt(float(v))}" data-class="{class_names[int(j)]}" '
            f'data-flag="{int(bool(flags[i]))}"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def xy_scatter_svg(xs, ys, class_ids, class_names, flags,
                   title="Embedding", x_label="dim 1", y_label="dim 2") -> str:
    """Plain 2-D scatter colored by class; flagged points get a red ring."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    sx = _Scale(float(xs.min()), float(xs.max()), MARGIN, WIDTH - MARGIN)
    sy = _Scale(float(ys.min()), float(ys.max()), HEIGHT - MARGIN, MARGIN)
    parts = _header(title) + _axes(x_label, y_label)
    for i in range(xs.shape[0]):
        j = int(class_ids[i])
        stroke = (f' stroke="{OUTLIER_COLOR}" stroke-width="2"'
                  if flags[i] else "")
        parts.append(
            f'<circle cx="{sx(xs[i]):.2f}" cy="{sy(ys[i]):.2f}" r="3.5" '
            f'fill="{PALETTE[j % len(PALETTE)]}" fill-opacity="0.75"'
            f'{stroke} data-record="{i}" data-x="{_fmt(float(xs[i]))}" '
            f'data-y="{_fmt(float(ys[i]))}" data-class="{class_names[j]}" '
            f'data-flag="{int(bool(flags[i]))}"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def profile_svg(values, class_names, record_id, log_scale=True,
                title=None) -> str:
    """Per-class outlier profile of one record (optionally log10)."""
    values = np.asarray(values, dtype=np.float64)
    shown = np.where(values > 0, values, np.nan)
    plot_vals = np.log10(shown) if log_scale else values
    finite = plot_vals[np.isfinite(plot_vals)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    sx = _Scale(-0.5, len(class_names) - 0.5, MARGIN, WIDTH - MARGIN)
    sy = _Scale(lo, hi, HEIGHT - MARGIN, MARGIN)
    label = "log10 outlier measure" if log_scale else "outlier measure"
    parts = _header(title or f"Record {record_id} vs every class")
    parts += _axes("class", label)
    for j, name in enumerate(class_names):
        v = plot_vals[j]
        cy = sy(v) if math.isfinite(v) else MARGIN
        parts.append(
            f'<circle cx="{sx(j):.2f}" cy="{cy:.2f}" r="4" fill="{PALETTE[0]}" '
            f'data-class="{name}" data-value="{_fmt(float(values[j]))}"/>')
        parts.append(
            f'<text x="{sx(j):.1f}" y="{HEIGHT - MARGIN + 14}" '
            f'text-anchor="middle" font-family="sans-serif" '
            f'font-size="9">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def quartile_box_svg(stats_by_quartile, title="R-squared by outlier quartile",
                     y_label="R-squared") -> str:
    """Box-and-whisker columns for quartiles 1..4.

    ``stats_by_quartile`` maps quartile id -> BoxStats.
    """
    all_vals = []
    for st in stats_by_quartile.values():
        all_vals += [st.whisker_low, st.whisker_high, st.q1, st.q3, st.median]
        all_vals += list(st.outlier_points)
    sy = _Scale(min(all_vals), max(all_vals), HEIGHT - MARGIN, MARGIN)
    sx = _Scale(0.5, 4.5, MARGIN, WIDTH - MARGIN)
    parts = _header(title) + _axes("outlier-score quartile", y_label)
    half = 24
    for q in sorted(stats_by_quartile):
        st = stats_by_quartile[q]
        cx = sx(q)
        parts.append(
            f'<g data-quartile="{q}" data-q1="{_fmt(st.q1)}" '
            f'data-median="{_fmt(st.median)}" data-q3="{_fmt(st.q3)}" '
            f'data-wlo="{_fmt(st.whisker_low)}" data-whi="{_fmt(st.whisker_high)}">')
        parts.append(
            f'<rect x="{cx - half:.1f}" y="{sy(st.q3):.2f}" width="{2 * half}" '
            f'height="{abs(sy(st.q1) - sy(st.q3)):.2f}" fill="#c6dbef" '
            f'stroke="black"/>')
        parts.append(
            f'<line x1="{cx - half:.1f}" y1="{sy(st.median):.2f}" '
            f'x2="{cx + half:.1f}" y2="{sy(st.median):.2f}" '
            f'stroke="black" stroke-width="2"/>')
        for w in (st.whisker_low, st.whisker_high):
            parts.append(
                f'<line x1="{cx:.1f}" y1="{sy(st.q1 if w < st.q1 else st.q3):.2f}" '
                f'x2="{cx:.1f}" y2="{sy(w):.2f}" stroke="black"/>')
            parts.append(
                f'<line x1="{cx - half / 2:.1f}" y1="{sy(w):.2f}" '
                f'x2="{cx + half / 2:.1f}" y2="{sy(w):.2f}" stroke="black"/>')
        for p in st.outlier_points:
            parts.append(
                f'<circle cx="{cx:.1f}" cy="{sy(p):.2f}" r="2.5" fill="none" '
                f'stroke="{OUTLIER_COLOR}" data-outlier-point="{_fmt(p)}"/>')
        parts.append("</g>")
        parts.append(
            f'<text x="{cx:.1f}" y="{HEIGHT - MARGIN + 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">Q{q}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
