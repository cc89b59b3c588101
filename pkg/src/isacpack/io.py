"""CSV and JSON artifacts.

Floats are written with ``repr`` precision and no timestamps are recorded,
so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidInput

__all__ = [
    "fmt",
    "write_csv",
    "read_csv",
    "write_signals",
    "read_signals",
    "write_reference",
    "read_reference",
    "write_channel",
    "read_channel",
    "to_jsonable",
    "write_json",
    "sha256_file",
    "sha256_json",
]


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInput(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_signals(path, X):
    """One signal per row, columns ``x0 .. x{N-1}`` in ``[Re; Im]`` order."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    write_csv(path, [f"x{i}" for i in range(X.shape[1])], X.tolist())


def read_signals(path):
    header, rows = read_csv(path)
    try:
        X = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise InvalidInput(f"{path}: non-numeric entry") from exc
    if X.ndim != 2 or X.shape[1] != len(header):
        raise InvalidInput(f"{path}: ragged signal table")
    return X


def write_reference(path, x0):
    """Realified reference as a single ``x0_real`` column."""
    write_csv(path, ["x0_real"], [[v] for v in np.asarray(x0, dtype=float).ravel()])


def read_reference(path):
    header, rows = read_csv(path)
    if header != ["x0_real"]:
        raise InvalidInput(f"{path}: expected a single 'x0_real' column")
    return np.array([float(r[0]) for r in rows])


def write_channel(path, H):
    """Complex channel in long format ``row,col,re,im``."""
    H = np.asarray(H, dtype=complex)
    rows = [[i, j, H[i, j].real, H[i, j].imag]
            for i in range(H.shape[0]) for j in range(H.shape[1])]
    write_csv(path, ["row", "col", "re", "im"], rows)


def read_channel(path):
    header, rows = read_csv(path)
    if header != ["row", "col", "re", "im"]:
        raise InvalidInput(f"{path}: expected columns row,col,re,im")
    if not rows:
        raise InvalidInput(f"{path}: no channel entries")
    idx = np.array([[int(r[0]), int(r[1])] for r in rows])
    vals = np.array([float(r[2]) + 1j * float(r[3]) for r in rows])
    shape = tuple(idx.max(axis=0) + 1)
    if len(rows) != shape[0] * shape[1]:
        raise InvalidInput(f"{path}: channel entries incomplete")
    H = np.zeros(shape, dtype=complex)
    H[idx[:, 0], idx[:, 1]] = vals
    return H


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_json(obj):
    blob = json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
