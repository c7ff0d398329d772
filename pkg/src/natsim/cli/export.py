"""CSV and JSON-lines export of trajectory records."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..records import TrajectoryRecord
from .filters import FilterSpec, lowpass

FORMATS = ("csv", "jsonl")


def _columns(record: TrajectoryRecord, path_index: int | None, filt: FilterSpec | None):
    """Ordered (name, 1-d array) pairs: t, observables, then raw/filtered records."""
    t = np.asarray(record.t, dtype=float)
    cols = [("t", t)]

    def pick(arr):
        arr = np.asarray(arr)
        if path_index is not None:
            arr = arr[:, path_index] if arr.ndim >= 2 else arr
        return arr

    for name, values in record.observables.items():
        arr = pick(values)
        if arr.ndim == 1:
            cols.append((name, arr))
        else:
            flat = arr.reshape(arr.shape[0], int(np.prod(arr.shape[1:])))
            cols.extend((f"{name}_{k}", flat[:, k]) for k in range(flat.shape[1]))
    dt = float(t[1] - t[0]) if t.size > 1 else None
    for name, values in record.records.items():
        raw = pick(values).astype(float)
        cols.append((f"rec_{name}_raw", raw))
        if filt is not None:
            # the first sample has no preceding interval; seed the filter from the next one
            seeded = raw.copy()
            if seeded.size > 1:
                seeded[0] = seeded[1]
            filtered = lowpass(seeded, filt, dt) if dt is not None else seeded
            cols.append((f"rec_{name}_filt", filtered))
    return cols


def _fmt(x) -> str:
    return repr(float(x))


def export(record: TrajectoryRecord, fmt: str, path, path_index: int | None = None,
           filt: FilterSpec | None = None) -> Path:
    """Write one table (one trajectory of an ensemble when ``path_index`` is given).

    Columns: t, each observable by name (vector observables as name_0, name_1,
    ...), then rec_<channel>_raw and, with a filter, rec_<channel>_filt.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    path = Path(path)
    cols = _columns(record, path_index, filt)
    names = [c[0] for c in cols]
    rows = zip(*[c[1] for c in cols])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(names)
                for row in rows:
                    writer.writerow([_fmt(v) for v in row])
            else:
                for row in rows:
                    fh.write(json.dumps(dict(zip(names, (float(v) for v in row)))) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
