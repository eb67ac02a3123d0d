"""SVG heatmaps of explanation grids, one per slice of a chosen axis."""

import os
from xml.sax.saxutils import escape

import numpy as np

from ..engine.options import MODES
from ..errors import InvalidInputError

COLORS = {"attack": "#c0392b", "engage": "#e0a800", "defend": "#2471a3"}
EMPTY = "#e5e5e5"
CELL = 36
MARGIN_L, MARGIN_T = 70, 50


def _label(v):
    return str(int(v)) if isinstance(v, float) and v.is_integer() else str(v)


def slice_svg(grid, slice_axis, slice_index):
    """SVG text for one slice; rows are the first remaining axis, columns the second."""
    names = grid.names
    if len(names) != 3:
        raise InvalidInputError("rendering needs a three-axis grid")
    k = names.index(slice_axis)
    rest = [i for i in range(3) if i != k]
    argmax = np.take(grid.argmax, slice_index, axis=k)
    tie = np.take(grid.tie, slice_index, axis=k)
    rows_name, rows = grid.axes[rest[0]]
    cols_name, cols = grid.axes[rest[1]]
    width = MARGIN_L + CELL * len(cols) + 140
    height = MARGIN_T + CELL * len(rows) + 40
    title = f"{slice_axis} = {_label(grid.axes[k][1][slice_index])}"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        '<defs><pattern id="tie" width="6" height="6" patternUnits="userSpaceOnUse" '
        'patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6" stroke="#000" '
        'stroke-width="1.5"/></pattern></defs>',
        f'<text x="{MARGIN_L}" y="18" font-size="13">{escape(title)}</text>',
        f'<text x="{MARGIN_L + CELL * len(cols) / 2:.1f}" y="36" text-anchor="middle">{escape(cols_name)}</text>',
        f'<text x="14" y="{MARGIN_T + CELL * len(rows) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {MARGIN_T + CELL * len(rows) / 2:.1f})">{escape(rows_name)}</text>',
    ]
    for j, c in enumerate(cols):
        out.append(f'<text x="{MARGIN_L + CELL * j + CELL / 2:.1f}" y="{MARGIN_T - 4}" '
                   f'text-anchor="middle">{escape(_label(c))}</text>')
    for i, r in enumerate(rows):
        y = MARGIN_T + CELL * i
        out.append(f'<text x="{MARGIN_L - 6}" y="{y + CELL / 2 + 4:.1f}" text-anchor="end">{escape(_label(r))}</text>')
        for j in range(len(cols)):
            x = MARGIN_L + CELL * j
            mode = int(argmax[i, j])
            fill = COLORS[MODES[mode]] if mode >= 0 else EMPTY
            out.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#fff"/>')
            if tie[i, j]:
                out.append(f'<rect class="tie" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="url(#tie)"/>')
    lx = MARGIN_L + CELL * len(cols) + 16
    entries = [(m, COLORS[m]) for m in MODES] + [("no data", EMPTY)]
    for n, (name, color) in enumerate(entries):
        y = MARGIN_T + 20 * n
        out.append(f'<rect x="{lx}" y="{y}" width="14" height="14" fill="{color}"/>')
        out.append(f'<text x="{lx + 20}" y="{y + 11}">{escape(name)}</text>')
    y = MARGIN_T + 20 * len(entries)
    out.append(f'<rect x="{lx}" y="{y}" width="14" height="14" fill="url(#tie)" stroke="#000"/>')
    out.append(f'<text x="{lx + 20}" y="{y + 11}">tie</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_grid(grid, slice_axis, out_dir, prefix="grid"):
    """Write one SVG per value of ``slice_axis``; returns the paths."""
    if slice_axis not in grid.names:
        raise InvalidInputError(f"unknown slice axis {slice_axis!r}; grid axes are {grid.names}")
    if int(grid.samples.sum()) == 0:
        raise InvalidInputError("grid holds no samples")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    values = grid.axes[grid.names.index(slice_axis)][1]
    for idx, v in enumerate(values):
        path = os.path.join(out_dir, f"{prefix}_{slice_axis}_{_label(v)}.svg")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(slice_svg(grid, slice_axis, idx))
        paths.append(path)
    return paths
