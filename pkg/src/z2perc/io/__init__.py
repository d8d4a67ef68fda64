"""Manifests, snapshot files, result sinks and grid orchestration."""

from .manifest import ManifestError, RunManifest, canonical_json, code_version
from .results import read_jsonl, read_series_csv, write_jsonl, write_rows_csv, write_series_csv
from .snapshots import (
    MAGIC, SnapshotError, SnapshotHeader, decode, encode, read_snapshots, write_snapshots,
)

__all__ = [
    "ManifestError", "RunManifest", "canonical_json", "code_version", "read_jsonl",
    "read_series_csv", "write_jsonl", "write_rows_csv", "write_series_csv", "MAGIC",
    "SnapshotError", "SnapshotHeader", "decode", "encode", "read_snapshots", "write_snapshots",
]
