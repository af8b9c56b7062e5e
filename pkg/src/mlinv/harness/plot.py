"""Self-contained SVG rendering of cost-versus-error sweeps.

The chart is a log-log scatter with connecting polylines, one series per
(method, schedule kind) pair: estimated error on the horizontal axis and
computational cost on the vertical axis.  Output is a single standalone
SVG document with no external assets, rendered deterministically.
"""

from __future__ import annotations

import math
import warnings

__all__ = ["emit_plot"]

_WIDTH, _HEIGHT = 720, 520
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 80, 30, 40, 60
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _decades(lo: float, hi: float):
    start = math.floor(lo)
    stop = math.ceil(hi)
    return list(range(start, stop + 1))


def _tick_label(power: int) -> str:
    return f"1e{power:+d}" if power else "1"


def emit_plot(records, path, title: str = "computational cost vs estimated error"):
    """Write a log-log cost/error chart for the given sweep records.

    Records with non-finite or non-positive error or cost are skipped.
    With no plottable records a warning is issued and no file is written.
    """
    points = {}
    for rec in records:
        if not (rec.error_mean > 0 and math.isfinite(rec.error_mean)):
            continue
        if not (rec.schedule_cost > 0 and math.isfinite(rec.schedule_cost)):
            continue
        key = (rec.method, rec.algorithm)
        points.setdefault(key, []).append((rec.error_mean, rec.schedule_cost))
    if not points:
        warnings.warn("no plottable records; skipping plot", stacklevel=2)
        return None

    xs = [math.log10(x) for series in points.values() for x, _ in series]
    ys = [math.log10(y) for series in points.values() for _, y in series]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_pad = max(0.05 * (x_hi - x_lo), 0.2)
    y_pad = max(0.05 * (y_hi - y_lo), 0.2)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def to_px(log_x: float, log_y: float):
        px = _MARGIN_L + (log_x - x_lo) / (x_hi - x_lo) * plot_w
        py = _MARGIN_T + (y_hi - log_y) / (y_hi - y_lo) * plot_h
        return px, py

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]

    # Gridlines and tick labels at integer powers of ten.
    for power in _decades(x_lo, x_hi):
        if not x_lo <= power <= x_hi:
            continue
        px, _ = to_px(power, y_lo)
        parts.append(
            f'<line x1="{px:.1f}" y1="{_MARGIN_T}" x2="{px:.1f}" '
            f'y2="{_HEIGHT - _MARGIN_B}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{px:.1f}" y="{_HEIGHT - _MARGIN_B + 18}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="12">'
            f"{_tick_label(power)}</text>"
        )
    for power in _decades(y_lo, y_hi):
        if not y_lo <= power <= y_hi:
            continue
        _, py = to_px(x_lo, power)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{py:.1f}" x2="{_WIDTH - _MARGIN_R}" '
            f'y2="{py:.1f}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 8}" y="{py + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{_tick_label(power)}</text>'
        )

    # Axes frame and labels.
    parts.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_HEIGHT - 16}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="13">'
        f"estimated error</text>"
    )
    parts.append(
        f'<text x="20" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 20 {_MARGIN_T + plot_h / 2:.1f})">'
        f"computational cost</text>"
    )

    # Series: polyline through points sorted by error, plus point markers.
    for index, (key, series) in enumerate(sorted(points.items())):
        color = _PALETTE[index % len(_PALETTE)]
        pixels = [
            to_px(math.log10(x), math.log10(y))
            for x, y in sorted(series, key=lambda p: p[0])
        ]
        if len(pixels) > 1:
            coords = " ".join(f"{px:.2f},{py:.2f}" for px, py in pixels)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>'
            )
        for px, py in pixels:
            parts.append(
                f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3.5" fill="{color}"/>'
            )

    # Legend, top right inside the frame.
    legend_x = _WIDTH - _MARGIN_R - 190
    legend_y = _MARGIN_T + 12
    for index, (key, _) in enumerate(sorted(points.items())):
        color = _PALETTE[index % len(_PALETTE)]
        y = legend_y + 18 * index
        parts.append(
            f'<line x1="{legend_x}" y1="{y}" x2="{legend_x + 24}" y2="{y}" '
            f'stroke="{color}" stroke-width="2.5"/>'
        )
        parts.append(
            f'<text x="{legend_x + 30}" y="{y + 4}" font-family="sans-serif" '
            f'font-size="12">{key[0]} / {key[1]}</text>'
        )

    parts.append("</svg>")
    document = "\n".join(parts) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(document)
    return path
