"""Byte-stable text reports and CSV field export.

A report is a sequence of ``key = value`` lines whose keys are dotted paths
in a fixed order.  Floats are printed with 17 significant digits, so a value
read back is bit-identical to the one written.
"""

from __future__ import annotations

import csv
import enum
import math

import numpy as np

NA = "NA"


def format_value(value) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if value is None:
        return "none"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(format_value(v) for v in np.asarray(value).ravel().tolist()) + "]"
    text = str(value)
    return text.replace("\n", " ")


class Report:
    """Ordered key/value document; sections are key prefixes."""

    def __init__(self):
        self._items = []
        self._keys = set()

    def add(self, key: str, value):
        if key in self._keys:
            raise KeyError(f"duplicate report key {key!r}")
        self._keys.add(key)
        self._items.append((key, value))

    def update(self, prefix: str, items):
        for k, v in items:
            self.add(f"{prefix}.{k}" if prefix else k, v)

    def extend(self, other: "Report", prefix: str = ""):
        self.update(prefix, other._items)

    def items(self):
        return list(self._items)

    def __getitem__(self, key):
        for k, v in self._items:
            if k == key:
                return v
        raise KeyError(key)

    def __contains__(self, key):
        return key in self._keys

    def text(self) -> str:
        return "".join(f"{k} = {format_value(v)}\n" for k, v in self._items)

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text())


def read_report(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.rstrip("\n").partition(" = ")
            out[key] = value
    return out


def _component_names(name: str, comp_shape) -> list:
    if not comp_shape:
        return [name]
    return [f"{name}[{','.join(str(i) for i in idx)}]" for idx in np.ndindex(*comp_shape)]


def export_csv(path, grid, name: str, values: np.ndarray, mask: np.ndarray):
    """One row per node: coordinates, field components, mask flag (1 = valid)."""
    values = np.asarray(values, dtype=float)
    gshape = tuple(ax.count for ax in grid.axes)
    if values.shape[:len(gshape)] != gshape:
        raise ValueError(f"field {name!r} has shape {values.shape}, grid is {gshape}")
    comp = values.shape[len(gshape):]
    coords = grid.mesh()
    header = [f"x{i}" for i in range(len(gshape))] + _component_names(name, comp) + ["mask"]
    flat = values.reshape(gshape + (-1,))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for idx in np.ndindex(*gshape):
            ok = bool(mask[idx])
            row = [format_value(c[idx]) for c in coords]
            row += [format_value(v) if ok else NA for v in flat[idx]]
            row.append("1" if ok else "0")
            w.writerow(row)


def read_csv(path):
    """Inverse of :func:`export_csv`: (header, coords, values, mask) with NaN for NA."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    m = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    coords = np.array([[float(v) for v in r[:m]] for r in body])
    values = np.array([[np.nan if v == NA else float(v) for v in r[m:-1]] for r in body])
    mask = np.array([r[-1] == "1" for r in body])
    return header, coords, values, mask
