"""Dependency-free SVG line plots of CSV series."""

from collections import OrderedDict
from xml.sax.saxutils import escape

import numpy as np

from .csvio import atomic_write_text, read_csv
from .errors import DataError

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 70, "right": 150, "top": 30, "bottom": 50}
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def moving_average(values, window):
    """Centered moving average; the window shrinks at the series ends."""
    values = np.asarray(values, dtype=np.float64)
    if window <= 1 or values.size == 0:
        return values
    half = window // 2
    out = np.empty_like(values)
    for i in range(values.size):
        lo, hi = max(0, i - half), min(values.size, i + half + 1)
        out[i] = values[lo:hi].mean()
    return out


def _is_float(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def collect_series(path, x=None, y=None, group=(), window=1):
    """Series ``{label: (xs, ys)}`` from a CSV file.

    ``x`` defaults to the first column and ``y`` to every other column
    whose cells are all numeric. Rows are split into one series per
    distinct value of the ``group`` columns.
    """
    header, rows = read_csv(path)
    x = x or header[0]
    for name in [x, *(y or []), *group]:
        if name not in header:
            raise DataError(f"{path}: missing column {name!r}")
    if y is None:
        y = [h for h in header if h != x and h not in group
             and rows and all(_is_float(r[header.index(h)]) for r in rows)]
    xi = header.index(x)
    gi = [header.index(g) for g in group]
    series = OrderedDict()
    for col in y:
        yi = header.index(col)
        for lineno, row in enumerate(rows, start=2):
            for j in (xi, yi):
                if not _is_float(row[j]):
                    raise DataError(
                        f"{path}: column {header[j]!r} has non-numeric value "
                        f"{row[j]!r} at row {lineno}"
                    )
            key = " ".join([col] + [f"{g}={row[j]}" for g, j in zip(group, gi)])
            xs, ys = series.setdefault(key, ([], []))
            xs.append(float(row[xi]))
            ys.append(float(row[yi]))
    return x, y, OrderedDict(
        (k, (np.array(xs), moving_average(ys, window))) for k, (xs, ys) in series.items()
    )


def _fmt(v):
    return f"{v:.2f}"


def render_svg(series, x_label, y_label, title=""):
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    finite = [v for xs, ys in series.values() for v in (*xs, *ys) if np.isfinite(v)]
    all_x = np.concatenate([xs for xs, _ in series.values()]) if series else np.zeros(1)
    all_y = np.concatenate([ys for _, ys in series.values()]) if series else np.zeros(1)
    all_x, all_y = all_x[np.isfinite(all_x)], all_y[np.isfinite(all_y)]
    if not finite or all_x.size == 0 or all_y.size == 0:
        all_x = all_y = np.zeros(1)
    x0, x1 = float(all_x.min()), float(all_x.max())
    y0, y1 = float(all_y.min()), float(all_y.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * plot_w

    def sy(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * plot_h

    left, top = MARGIN["left"], MARGIN["top"]
    right, bottom = left + plot_w, top + plot_h
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13">{escape(x_label)}</text>',
        f'<text x="16" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {(top + bottom) / 2:.1f})">{escape(y_label)}</text>',
        f'<text x="{left}" y="{bottom + 16}" font-size="10">{x0:.4g}</text>',
        f'<text x="{right}" y="{bottom + 16}" font-size="10" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{left - 4}" y="{bottom}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{left - 4}" y="{top + 10}" font-size="10" text-anchor="end">{y1:.4g}</text>',
    ]
    if title:
        out.append(f'<text x="{(left + right) / 2:.1f}" y="18" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(xs, ys)
                       if np.isfinite(a) and np.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{pts}"/>')
        ly = top + 12 + 14 * i
        out.append(f'<text x="{right + 8}" y="{ly}" font-size="10" fill="{color}">'
                   f'{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def report_csv(path, svg_path, x=None, y=None, group=(), window=1, title=""):
    x_label, y_cols, series = collect_series(path, x, y, group, window)
    atomic_write_text(svg_path, render_svg(series, x_label, ", ".join(y_cols), title))
    return series
