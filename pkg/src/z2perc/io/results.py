"""Plain-text result sinks: CSV for per-sample series, JSONL for reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_series_csv(path, columns: dict, manifest_hash: str, point: int, params: dict) -> Path:
    """One row per sample, each carrying the manifest hash, point index and parameters."""
    path = Path(path)
    names = list(columns)
    pnames = sorted(params)
    n = len(next(iter(columns.values()))) if columns else 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["manifest_hash", "point", "sample", *pnames, *names])
        for i in range(n):
            w.writerow([manifest_hash, point, i, *(_fmt(params[k]) for k in pnames),
                        *(_fmt(columns[k][i]) for k in names)])
    return path


def write_rows_csv(path, rows: list[dict], manifest_hash: str) -> Path:
    path = Path(path)
    keys = sorted({k for r in rows for k in r})
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["manifest_hash", *keys])
        for r in rows:
            w.writerow([manifest_hash, *(_fmt(r.get(k, "")) for k in keys)])
    return path


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if hasattr(v, "name") and hasattr(v, "value"):
        return v.name
    return v


def write_jsonl(path, records: list[dict], manifest_hash: str) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps({"manifest_hash": manifest_hash, **_jsonable(r)}, sort_keys=True) + "\n")
    return path


def read_series_csv(path) -> dict:
    """Columns of a file written by :func:`write_series_csv` (numeric ones as float arrays)."""
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no samples")
    head, body = rows[0], rows[1:]
    cols = {}
    for i, h in enumerate(head):
        raw = [r[i] for r in body]
        try:
            cols[h] = np.array([float(x) for x in raw])
        except ValueError:
            cols[h] = np.array(raw)
    return cols


def read_jsonl(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]
