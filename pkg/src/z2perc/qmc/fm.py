"""Fredenhagen-Marcu ratio from equal-time tau^z snapshots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..analysis.stats import jackknife
from ..gauge import Basis, GaugeConfig
from ..lattice import LatticeTopology
from .worldline import fm_contour


@dataclass(frozen=True)
class FMResult:
    value: float
    error: float
    half: float
    full: float
    full_error: float
    reliable: bool
    n_samples: int


def loop_products(slices, topo: LatticeTopology) -> tuple[np.ndarray, np.ndarray]:
    """Full-loop and half-loop tau^z products for every slice."""
    loop, half = fm_contour(topo)
    full_p, half_p = [], []
    for cfg in slices:
        if isinstance(cfg, GaugeConfig):
            if cfg.basis is not Basis.Z:
                raise ValueError("FM needs tau^z-basis snapshots")
            tau = cfg.tau
        else:
            tau = 1 - 2 * np.asarray(cfg, dtype=np.int8)
        full_p.append(np.prod(tau[loop]))
        half_p.append(np.prod(tau[half]))
    return np.array(full_p, dtype=float), np.array(half_p, dtype=float)


def fm_from_products(full, half, n_bins: int = 32) -> FMResult:
    full = np.asarray(full, dtype=float)
    half = np.asarray(half, dtype=float)
    if len(full) == 0:
        raise ValueError("empty snapshot stream")
    full_mean = float(full.mean())
    if len(full) > 1:
        _, full_err = jackknife(lambda a: a, full, n_bins=n_bins)
    else:
        full_err = float("inf")
    reliable = abs(full_mean) > 2 * full_err and full_mean != 0.0
    if full_mean == 0.0:
        return FMResult(float("nan"), float("nan"), float(half.mean()), 0.0, full_err, False, len(full))
    if len(full) > 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            value, err = jackknife(lambda a, b: a / b, half, full, n_bins=n_bins)
    else:
        value, err = float(half[0] / full[0]), float("inf")
    return FMResult(value, err, float(half.mean()), full_mean, full_err, bool(reliable), len(full))


def measure_fm(slices, topo: LatticeTopology, n_bins: int = 32) -> FMResult:
    """Plain ratio <half loop> / <full loop> with a jackknife error.

    Flagged unreliable when the full-loop average is within two standard
    errors of zero.
    """
    full, half = loop_products(slices, topo)
    return fm_from_products(full, half, n_bins)
