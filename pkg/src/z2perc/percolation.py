"""Wrapping detection and string-cluster statistics on the torus.

Wrapping in one dimension is found with a depth-first search over string
links that carries a winding number per visited site. Crossing the seam
between coordinate ``L-1`` and ``0`` shifts the winding by one; reaching an
already visited site with a different winding means a string path closes on
itself around the torus.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from numba import njit

from .gauge import Basis, GaugeConfig


@dataclass(frozen=True)
class PercolationReport:
    wraps: tuple[bool, ...]
    largest_cluster_links: int
    total_strings: int
    link_count: int

    @property
    def percolates(self) -> bool:
        return any(self.wraps)

    @property
    def strength(self) -> float:
        if not self.percolates:
            return 0.0
        return self.largest_cluster_links / self.link_count


@njit(cache=True)
def wraps_dim(strings, star, neighbors, crossing, dim, early_exit=True):
    n_sites, z = star.shape
    discovered = np.zeros(n_sites, np.bool_)
    winding = np.zeros(n_sites, np.int64)
    stack_v = np.empty(z * n_sites + 1, np.int64)
    stack_w = np.empty(z * n_sites + 1, np.int64)
    found = False
    for start in range(n_sites):
        if discovered[start]:
            continue
        touches = False
        for k in range(z):
            if strings[star[start, k]]:
                touches = True
                break
        if not touches:
            continue
        top = 0
        stack_v[0] = start
        stack_w[0] = 0
        while top >= 0:
            v = stack_v[top]
            w = stack_w[top]
            top -= 1
            if discovered[v]:
                continue
            discovered[v] = True
            winding[v] = w
            for k in range(z):
                if not strings[star[v, k]]:
                    continue
                u = neighbors[v, k]
                w_new = w + crossing[v, k, dim]
                if not discovered[u]:
                    top += 1
                    stack_v[top] = u
                    stack_w[top] = w_new
                elif winding[u] != w_new:
                    if early_exit:
                        return True
                    found = True
    return found


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


@njit(cache=True)
def cluster_sizes(strings, link_ends, n_sites):
    """Link count of every string cluster (unordered)."""
    parent = np.arange(n_sites)
    for l in range(strings.shape[0]):
        if strings[l]:
            a = _find(parent, link_ends[l, 0])
            b = _find(parent, link_ends[l, 1])
            if a != b:
                parent[b] = a
    counts = np.zeros(n_sites, np.int64)
    for l in range(strings.shape[0]):
        if strings[l]:
            counts[_find(parent, link_ends[l, 0])] += 1
    return counts[counts > 0]


@njit(cache=True)
def measure(strings, star, neighbors, crossing, link_ends, early_exit=True):
    """Return (wrap flags per dimension, largest cluster, total strings)."""
    D = crossing.shape[2]
    wraps = np.zeros(D, np.bool_)
    for d in range(D):
        wraps[d] = wraps_dim(strings, star, neighbors, crossing, d, early_exit)
    sizes = cluster_sizes(strings, link_ends, star.shape[0])
    largest = sizes.max() if sizes.shape[0] > 0 else 0
    return wraps, largest, sizes.sum()


def _require_x(cfg: GaugeConfig) -> None:
    if cfg.basis != Basis.X:
        raise ValueError("percolation is only defined on electric-field (X basis) snapshots")


def detect_wrapping(cfg: GaugeConfig, dim: int, early_exit: bool = True) -> bool:
    _require_x(cfg)
    topo = cfg.topo
    if not 0 <= dim < topo.dimension:
        raise ValueError(f"dim must be in [0, {topo.dimension})")
    return bool(
        wraps_dim(cfg.strings, topo.star, topo.neighbors, topo.star_crossing, dim, early_exit)
    )


def analyze(cfg: GaugeConfig, early_exit: bool = True) -> PercolationReport:
    _require_x(cfg)
    topo = cfg.topo
    wraps, largest, total = measure(
        cfg.strings, topo.star, topo.neighbors, topo.star_crossing, topo.link_ends, early_exit
    )
    return PercolationReport(
        wraps=tuple(bool(w) for w in wraps),
        largest_cluster_links=int(largest),
        total_strings=int(total),
        link_count=topo.link_count,
    )


def cluster_census(cfg: GaugeConfig) -> Counter:
    """Multiset of string-cluster sizes, in links."""
    _require_x(cfg)
    sizes = cluster_sizes(cfg.strings, cfg.topo.link_ends, cfg.topo.site_count)
    return Counter(int(s) for s in sizes)
