"""Activation-frequency grids with argmax modes."""

import json
from dataclasses import dataclass

import numpy as np

from ..engine.options import MODES
from ..errors import AggregationError, InvalidInputError

GRID_VERSION = 1


@dataclass
class ExplanationGrid:
    """Per-cell mode counts over a product of axes.

    ``axes`` is a list of ``(name, values)``; ``counts`` has shape
    ``(len(v1), ..., len(vk), 3)``. ``argmax`` is the most frequent mode with
    ties going to the lowest mode index (flagged in ``tie``); empty cells
    hold -1.
    """

    axes: list
    counts: np.ndarray

    @property
    def names(self):
        return [n for n, _ in self.axes]

    @property
    def shape(self):
        return tuple(len(v) for _, v in self.axes)

    @property
    def samples(self):
        return self.counts.sum(axis=-1)

    @property
    def argmax(self):
        best = np.argmax(self.counts, axis=-1)
        return np.where(self.samples > 0, best, -1)

    @property
    def tie(self):
        top = self.counts.max(axis=-1, keepdims=True)
        return ((self.counts == top).sum(axis=-1) > 1) & (self.samples > 0)

    def cells(self):
        """Coordinates of every cell in row-major order."""
        for idx in np.ndindex(*self.shape):
            yield idx, tuple(self.axes[a][1][i] for a, i in enumerate(idx))

    def to_dict(self):
        argmax, tie, n = self.argmax, self.tie, self.samples
        cells = []
        for idx, coords in self.cells():
            cells.append({"coords": list(coords), "counts": [int(c) for c in self.counts[idx]],
                          "n": int(n[idx]), "argmax": int(argmax[idx]),
                          "mode": MODES[argmax[idx]] if argmax[idx] >= 0 else None,
                          "tie": bool(tie[idx])})
        return {"version": GRID_VERSION, "modes": list(MODES),
                "axes": [{"name": name, "values": list(values)} for name, values in self.axes],
                "cells": cells}

    @classmethod
    def from_dict(cls, data):
        try:
            if data.get("version") != GRID_VERSION:
                raise InvalidInputError(f"unsupported grid version {data.get('version')!r}")
            axes = [(a["name"], list(a["values"])) for a in data["axes"]]
            if not axes or any(len(v) == 0 for _, v in axes):
                raise InvalidInputError("grid has an empty axis")
            grid = cls(axes, np.zeros(tuple(len(v) for _, v in axes) + (len(MODES),), dtype=np.int64))
            if len(data["cells"]) != int(np.prod(grid.shape)):
                raise InvalidInputError("grid cell count does not match its axes")
            for (idx, coords), cell in zip(grid.cells(), data["cells"]):
                if list(coords) != list(cell["coords"]) or len(cell["counts"]) != len(MODES):
                    raise InvalidInputError(f"grid cell {cell.get('coords')} out of order or malformed")
                grid.counts[idx] = cell["counts"]
        except (KeyError, TypeError, AttributeError) as exc:
            raise InvalidInputError(f"malformed grid: {exc!r}") from None
        return grid


def aggregate(records, axes):
    """Fold activation records into an :class:`ExplanationGrid` over ``axes``."""
    axes = [(name, list(values)) for name, values in axes]
    if not axes or any(len(v) == 0 for _, v in axes):
        raise AggregationError("axes must be non-empty")
    lookup = [{v: i for i, v in enumerate(values)} for _, values in axes]
    counts = np.zeros(tuple(len(v) for _, v in axes) + (len(MODES),), dtype=np.int64)
    for r in records:
        if len(r.cell) != len(axes):
            raise AggregationError(f"record cell {r.cell} has {len(r.cell)} coordinates, expected {len(axes)}")
        try:
            idx = tuple(lk[c] for lk, c in zip(lookup, r.cell))
        except (KeyError, TypeError):
            raise AggregationError(f"record cell {r.cell} is not on the axes") from None
        counts[idx + (r.mode,)] += 1
    return ExplanationGrid(axes, counts)


def grid_json(grid):
    return json.dumps(grid.to_dict(), sort_keys=True, indent=1) + "\n"


def write_grid(grid, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(grid_json(grid))
    return path


def read_grid(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"{path}: invalid grid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: grid must be a JSON object")
    return ExplanationGrid.from_dict(data)
