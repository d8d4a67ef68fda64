"""Run manifests: JSON documents with a fixed schema and a canonical form.

Schema::

    {
      "experiment": str,                  # free-form id
      "module": "classical" | "qmc" | "ed" | "percolate" | "analyze",
      "grid": {name: [values, ...]},      # cartesian product, key order irrelevant
      "fixed": {name: value},             # shared by every grid point
      "schedule": {name: value},          # n_samples, thermalization, stride / sweeps_between
      "seed": int,                        # master seed
      "outputs": {"dir": str},
      "inputs": [str, ...],               # percolate / analyze only
      "task": str,                        # analyze only
      "code_version": str                 # filled in on load when absent
    }

Only the output directory and the worker count may come from the
environment (``Z2PERC_OUT``, ``Z2PERC_WORKERS``).
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__

MODULES = ("classical", "qmc", "ed", "percolate", "analyze")
KEYS = {"experiment", "module", "grid", "fixed", "schedule", "seed", "outputs", "inputs",
        "task", "code_version"}


class ManifestError(ValueError):
    """The manifest violates the schema."""


def code_version() -> str:
    """Package version plus a digest of the installed sources."""
    root = Path(__file__).resolve().parents[1]
    h = hashlib.sha256()
    for f in sorted(root.rglob("*.py")):
        h.update(f.relative_to(root).as_posix().encode())
        h.update(f.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


@dataclass
class RunManifest:
    experiment: str
    module: str
    grid: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    seed: int = 0
    outputs: dict = field(default_factory=lambda: {"dir": "out"})
    inputs: list = field(default_factory=list)
    task: str | None = None
    code_version: str | None = None

    def __post_init__(self):
        if self.module not in MODULES:
            raise ManifestError(f"module must be one of {MODULES}, got {self.module!r}")
        if not isinstance(self.seed, int) or self.seed < 0 or self.seed >= 2**64:
            raise ManifestError("seed must be an unsigned 64-bit integer")
        for name in ("grid", "fixed", "schedule", "outputs"):
            if not isinstance(getattr(self, name), dict):
                raise ManifestError(f"{name} must be an object")
        for k, v in self.grid.items():
            if not isinstance(v, list) or not v:
                raise ManifestError(f"grid entry {k!r} must be a non-empty list")
        if self.module in ("classical", "qmc", "ed") and not self.grid:
            raise ManifestError("parameter grid is empty")
        if self.module in ("percolate", "analyze") and not self.inputs:
            raise ManifestError(f"{self.module} needs a non-empty 'inputs' list")
        if self.module == "analyze" and self.task not in ("binder", "cross", "collapse", "autocorr"):
            raise ManifestError("analyze needs task in binder|cross|collapse|autocorr")
        overlap = set(self.grid) & set(self.fixed)
        if overlap:
            raise ManifestError(f"parameters both swept and fixed: {sorted(overlap)}")
        if self.code_version is None:
            self.code_version = code_version()
        try:
            canonical_json(self.to_dict())
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"manifest is not serialisable: {exc}") from None

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        if not isinstance(data, dict):
            raise ManifestError("manifest must be a JSON object")
        unknown = set(data) - KEYS
        if unknown:
            raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
        for req in ("experiment", "module"):
            if req not in data:
                raise ManifestError(f"missing required key {req!r}")
        return cls(**copy.deepcopy(data))

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from None
        m = cls.from_dict(data)
        if os.environ.get("Z2PERC_OUT"):
            m.outputs = dict(m.outputs, dir=os.environ["Z2PERC_OUT"])
        return m

    def to_dict(self) -> dict:
        d = {
            "experiment": self.experiment, "module": self.module, "grid": self.grid,
            "fixed": self.fixed, "schedule": self.schedule, "seed": self.seed,
            "outputs": self.outputs, "code_version": self.code_version,
        }
        if self.inputs:
            d["inputs"] = self.inputs
        if self.task is not None:
            d["task"] = self.task
        return d

    def canonical(self) -> str:
        return canonical_json(self.to_dict())

    @property
    def digest(self) -> bytes:
        return hashlib.sha256(self.canonical().encode()).digest()

    @property
    def hash(self) -> str:
        return self.digest.hex()

    def points(self) -> list[dict]:
        """Grid points in a fixed order (sorted keys, values in listed order)."""
        keys = sorted(self.grid)
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            p = dict(self.fixed)
            p.update(self.schedule)
            p.update(zip(keys, combo))
            out.append(p)
        return out

    def seed_for(self, index: int) -> int:
        """Independent per-point seed derived from the master seed."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(index,))
        return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def workers_from_env(default: int = 1) -> int:
    v = os.environ.get("Z2PERC_WORKERS")
    return int(v) if v else default
