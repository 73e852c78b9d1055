"""Long-format panel CSV ingestion and the dense tensor round trip."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .tensor3 import Tensor3

HEADER = ["unit", "category", "time", "value"]


def _label_key(label: str):
    """Sort numerically when every label parses as a number, else lexically."""
    try:
        return (0, float(label), "")
    except ValueError:
        return (1, 0.0, label)


@dataclass
class PanelDataset:
    units: list[str]
    categories: list[str]
    times: list[str]
    values: Tensor3

    def __post_init__(self):
        n1, n2, n3 = self.values.dims
        if (len(self.units), len(self.categories), len(self.times)) != (n1, n2, n3):
            raise DataError(
                f"label counts ({len(self.units)}, {len(self.categories)}, "
                f"{len(self.times)}) do not match tensor dims {self.values.dims}"
            )

    def write(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            for t, tl in enumerate(self.times):
                for j, cl in enumerate(self.categories):
                    for i, ul in enumerate(self.units):
                        w.writerow([ul, cl, tl, repr(float(self.values.data[i, j, t]))])


def ingest_panel(path) -> PanelDataset:
    """Read a long-format CSV with header unit,category,time,value.

    Rows may be in any order; every (unit, category, time) cell must appear
    exactly once.
    """
    cells: dict[tuple[str, str, str], float] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip().lower() for h in header] != HEADER:
            raise DataError(f"{path}: expected header {','.join(HEADER)}, got {header}")
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{rownum}: expected 4 fields, got {len(row)}")
            unit, cat, time, value = (f.strip() for f in row)
            try:
                val = float(value)
            except ValueError:
                raise DataError(
                    f"{path}:{rownum}: value {value!r} is not a number"
                ) from None
            key = (unit, cat, time)
            if key in cells:
                raise DataError(f"{path}:{rownum}: duplicate cell {key}")
            cells[key] = val
    if not cells:
        raise DataError(f"{path}: no data rows")
    units = sorted({k[0] for k in cells}, key=_label_key)
    categories = sorted({k[1] for k in cells}, key=_label_key)
    times = sorted({k[2] for k in cells}, key=_label_key)
    missing = [
        (u, c, t)
        for t in times
        for c in categories
        for u in units
        if (u, c, t) not in cells
    ]
    if missing:
        listed = ", ".join(map(str, missing[:20]))
        more = "" if len(missing) <= 20 else f" (and {len(missing) - 20} more)"
        raise DataError(f"{path}: missing cells {listed}{more}")
    data = np.empty((len(units), len(categories), len(times)))
    for i, u in enumerate(units):
        for j, c in enumerate(categories):
            for t, tl in enumerate(times):
                data[i, j, t] = cells[(u, c, tl)]
    return PanelDataset(units, categories, times, Tensor3(data))


def read_distance_matrix(path, n: int) -> np.ndarray:
    """Headerless n x n CSV of pairwise distances."""
    try:
        d = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise DataError(f"{path}: {e}") from None
    if d.shape != (n, n):
        raise DataError(f"{path}: expected a {n}x{n} matrix, got {d.shape}")
    return d
