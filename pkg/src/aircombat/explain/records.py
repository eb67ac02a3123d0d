"""Activation records and their CSV form."""

import csv
import io
from dataclasses import dataclass

from ..engine.options import MODES
from ..errors import InvalidInputError

GLOBAL_AXES = ("strategy", "difference", "m")
LOCAL_AXES = ("d", "ata", "aa")
TAIL = ("episode", "step", "agent", "type", "mode")


@dataclass(frozen=True)
class ActivationRecord:
    """One commander choice: where in the sweep, when, for whom, and which mode."""

    cell: tuple
    episode: int
    step: int
    agent_id: int
    type_index: int
    mode: int

    def __post_init__(self):
        if self.mode not in range(len(MODES)):
            raise InvalidInputError(f"mode {self.mode!r} is not a commander action")


def _fmt(v):
    if isinstance(v, float):
        return repr(int(v)) if v.is_integer() else repr(v)
    return str(v)


def records_csv(records, axis_names):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(axis_names) + list(TAIL))
    for r in records:
        w.writerow([_fmt(c) for c in r.cell] + [r.episode, r.step, r.agent_id, r.type_index, MODES[r.mode]])
    return buf.getvalue()


def write_records(records, axis_names, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_csv(records, axis_names))
    return path


def _parse_value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_records(path):
    """Records and axis names from a CSV written by :func:`write_records`."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0][-len(TAIL):]) != TAIL:
        raise InvalidInputError(f"{path}: not an activation records file")
    names = tuple(rows[0][:-len(TAIL)])
    k = len(names)
    out = []
    for row in rows[1:]:
        if row[-1] not in MODES:
            raise InvalidInputError(f"{path}: unknown mode {row[-1]!r}")
        out.append(ActivationRecord(tuple(_parse_value(v) for v in row[:k]), int(row[k]), int(row[k + 1]),
                                    int(row[k + 2]), int(row[k + 3]), MODES.index(row[-1])))
    return out, names
