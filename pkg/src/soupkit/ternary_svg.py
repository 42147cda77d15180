"""Ternary heatmap rendering for three-ingredient simplex sweeps.

The input is the full set of (weights, value) rows a simplex sweep
produces: the three pure corners plus the n^2 cell centroids of the
n-fold edge subdivision.  Each cell becomes one filled ``<path>`` triangle
and each corner one ``<circle>``, so the cell count is checkable straight
off the XML.  Output is a plain string built in grid order; identical
input gives identical bytes.

Colors are a two-sided scale anchored at the mean of the three corner
values: cells above the anchor shade toward red, cells below toward blue,
scaled by the largest deviation in the plot.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .errors import IncompleteGrid, MissingRows
from .mixer import SimplexGridSpec, barycentric_centroid_grid

NEUTRAL_RGB = (247, 247, 247)
BELOW_RGB = (33, 102, 172)
ABOVE_RGB = (178, 24, 43)

_KEY_DECIMALS = 9


def _key(weights) -> tuple[float, float, float]:
    if len(weights) != 3:
        raise IncompleteGrid(f"expected 3 weights per row, got {len(weights)}")
    return tuple(round(float(w), _KEY_DECIMALS) for w in weights)


def _shade(value: float, anchor: float, dev: float) -> str:
    if dev <= 0.0:
        t = 0.0
    else:
        t = max(-1.0, min(1.0, (value - anchor) / dev))
    target = ABOVE_RGB if t > 0 else BELOW_RGB
    u = abs(t)
    rgb = tuple(
        int(round(base + (far - base) * u)) for base, far in zip(NEUTRAL_RGB, target)
    )
    return "#%02x%02x%02x" % rgb


def _cell_polygons(n: int):
    """Vertex triples (barycentric, /n) in centroid-grid order."""
    cells = []
    for r in range(n):
        for j in range(n - r):
            a, b, c = n - r - j, j, r
            cells.append(((a, b, c), (a - 1, b + 1, c), (a - 1, b, c + 1)))
        for j in range(n - r - 1):
            a, b, c = n - r - j, j, r
            cells.append(((a - 1, b + 1, c), (a - 1, b, c + 1), (a - 2, b + 1, c + 1)))
    return cells


def render_ternary_svg(
    rows,
    labels=("ingredient 0", "ingredient 1", "ingredient 2"),
    title: str = "",
    size: float = 640.0,
) -> str:
    """Render simplex sweep rows to SVG text.

    rows: iterable of (weights, value) with exactly three one-hot corner
    rows and n^2 centroid rows for some n >= 1.  Raises IncompleteGrid
    when either part is missing, duplicated, or off-grid.
    """
    corners: dict[int, float] = {}
    cells: dict[tuple[float, float, float], float] = {}
    num_cell_rows = 0
    for weights, value in rows:
        key = _key(weights)
        hot = [i for i, w in enumerate(key) if w == 1.0]
        if len(hot) == 1 and sum(key) == 1.0:
            if hot[0] in corners:
                raise IncompleteGrid(f"corner {hot[0]} appears twice")
            corners[hot[0]] = float(value)
        else:
            num_cell_rows += 1
            cells[key] = float(value)
    if sorted(corners) != [0, 1, 2]:
        raise IncompleteGrid(f"need all 3 corners, have {sorted(corners)}")
    if len(cells) != num_cell_rows:
        raise IncompleteGrid("duplicate cell rows")
    n = math.isqrt(num_cell_rows)
    if n < 1 or n * n != num_cell_rows:
        raise IncompleteGrid(f"{num_cell_rows} cells is not a full n^2 grid")
    grid = barycentric_centroid_grid(SimplexGridSpec(3, n))
    ordered: list[float] = []
    for centroid in grid:
        key = _key(centroid.w)
        if key not in cells:
            raise IncompleteGrid(f"grid cell at {key} is missing")
        ordered.append(cells[key])

    anchor = sum(corners[i] for i in range(3)) / 3.0
    everything = ordered + [corners[i] for i in range(3)]
    dev = max(abs(v - anchor) for v in everything)

    margin = 0.125 * size
    side = size - 2.0 * margin
    height = side * math.sqrt(3.0) / 2.0
    width = size
    total_height = 2.0 * margin + height

    def xy(a: float, b: float, c: float) -> tuple[float, float]:
        return (margin + (b + 0.5 * c) * side, margin + (1.0 - c) * height)

    def fmt(v: float) -> str:
        return f"{v:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt(width)}" '
        f'height="{fmt(total_height)}" viewBox="0 0 {fmt(width)} {fmt(total_height)}">'
    ]
    if title:
        parts.append(
            f'<text x="{fmt(width / 2)}" y="{fmt(margin * 0.5)}" '
            f'text-anchor="middle" font-size="14" font-family="sans-serif">{title}</text>'
        )
    for (v0, v1, v2), value in zip(_cell_polygons(n), ordered):
        pts = [xy(*(coord / n for coord in vertex)) for vertex in (v0, v1, v2)]
        d = (
            f"M{fmt(pts[0][0])},{fmt(pts[0][1])} "
            f"L{fmt(pts[1][0])},{fmt(pts[1][1])} "
            f"L{fmt(pts[2][0])},{fmt(pts[2][1])} Z"
        )
        parts.append(f'<path d="{d}" fill="{_shade(value, anchor, dev)}" stroke="none"/>')
    corner_bary = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    outline = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in (xy(*b) for b in corner_bary))
    parts.append(
        f'<polygon points="{outline}" fill="none" stroke="#333333" stroke-width="1"/>'
    )
    label_anchor = ("end", "start", "middle")
    label_shift = ((-8.0, 14.0), (8.0, 14.0), (0.0, -10.0))
    for i, bary in enumerate(corner_bary):
        x, y = xy(*bary)
        parts.append(
            f'<circle cx="{fmt(x)}" cy="{fmt(y)}" r="6.00" '
            f'fill="{_shade(corners[i], anchor, dev)}" stroke="#333333" stroke-width="1"/>'
        )
        dx, dy = label_shift[i]
        parts.append(
            f'<text x="{fmt(x + dx)}" y="{fmt(y + dy)}" text-anchor="{label_anchor[i]}" '
            f'font-size="12" font-family="sans-serif">{labels[i]} ({corners[i]:.4f})</text>'
        )
    parts.append(
        f'<text x="{fmt(width / 2)}" y="{fmt(total_height - margin * 0.25)}" '
        f'text-anchor="middle" font-size="11" font-family="sans-serif">'
        f"n={n}, anchor={anchor:.4f}, spread={dev:.4f}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def simplex_rows_from_metrics(metrics_path: str | Path, split: str):
    """Pull (weights, value) simplex rows for one split from metrics.csv."""
    rows = []
    with Path(metrics_path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            mid = row["mixture_id"]
            if not (mid.startswith("corner_") or mid.startswith("cell_")):
                continue
            if row["split"] != split:
                continue
            rows.append((json.loads(row["weights"]), float(row["value"])))
    if not rows:
        raise MissingRows(f"no simplex rows for split {split!r} in {metrics_path}")
    return rows
