"""Dataset files: CSV payload plus a JSON metadata sidecar.

The CSV has a header row ``t, s_1..s_K, x_1..x_N`` and one row per
sample (or per time index for sequence data).  Floats are written with
repr-style shortest round-trip formatting, so files are byte-stable
across runs and platforms.  The sidecar ``<stem>.json`` records model
parameters and the seed; arrays appear as nested lists.
"""

import csv
import json
from pathlib import Path

import numpy as np


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_dataset(path, S, X, metadata):
    """Write labeled pairs to ``path`` (CSV) and metadata alongside."""
    path = Path(path)
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if S.shape[0] != X.shape[0]:
        raise ValueError(f"row counts differ: {S.shape[0]} vs {X.shape[0]}")
    header = (["t"]
              + [f"s_{k + 1}" for k in range(S.shape[1])]
              + [f"x_{j + 1}" for j in range(X.shape[1])])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(S.shape[0]):
            writer.writerow([t + 1] + [repr(float(v)) for v in S[t]]
                            + [repr(float(v)) for v in X[t]])
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(_jsonable(metadata), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(path):
    """Read back (S, X, metadata) written by write_dataset."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_s = sum(1 for h in header if h.startswith("s_"))
        n_x = sum(1 for h in header if h.startswith("x_"))
        if header != (["t"] + [f"s_{k + 1}" for k in range(n_s)]
                      + [f"x_{j + 1}" for j in range(n_x)]):
            raise ValueError(f"{path}: unexpected dataset header {header}")
        rows = [row for row in reader if row]
    S = np.array([[float(v) for v in row[1: 1 + n_s]] for row in rows])
    X = np.array([[float(v) for v in row[1 + n_s:]] for row in rows])
    meta_path = path.with_suffix(".json")
    metadata = {}
    if meta_path.exists():
        with open(meta_path) as fh:
            metadata = json.load(fh)
    return S, X, metadata
