"""CSV and JSON helpers for spectra, waveforms, tables and manifests."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def write_csv(path, header, columns) -> None:
    """Write equal-length columns with a header row.

    Floats use ``repr`` formatting so that a fixed input always yields
    byte-identical files.
    """
    columns = [np.asarray(c) for c in columns]
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("columns must have equal length")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return repr(float(v))


def read_csv(path, required) -> dict[str, np.ndarray]:
    """Read a headered CSV into float arrays, checking that ``required`` columns exist."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    body = [r for r in rows[1:] if r]
    data = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    Path(path).write_text(text + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
