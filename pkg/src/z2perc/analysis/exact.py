"""Closed-form references for independent links and the dual Ising picture."""

from __future__ import annotations

from collections import deque

import numpy as np

from ..gauge import GaugeConfig, occupation
from ..lattice import LatticeTopology


def bernoulli_p(T_over_h: float) -> float:
    """Probability that a link hosts a string when links are independent (mu = 0)."""
    if T_over_h <= 0:
        raise ValueError("T/h must be positive")
    b = 1.0 / T_over_h
    # e^{-b} / (2 cosh b) == e^{-2b} / (1 + e^{-2b}), stable for large b
    q = np.exp(-2.0 * b)
    return float(q / (1.0 + q))


def temperature_from_p(p: float) -> float:
    """Inverse of :func:`bernoulli_p` on 0 < p < 1/2."""
    if not 0.0 < p < 0.5:
        raise ValueError("p must lie in (0, 1/2)")
    return float(2.0 / np.log(1.0 / p - 1.0))


def density_from_p(p: float, z: int) -> float:
    """Matter density for independent strings of probability ``p`` and even coordination ``z``."""
    if z % 2:
        raise ValueError("coordination number must be even")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return 0.5 * (1.0 - (2.0 * p - 1.0) ** z)


def dual_ising_map(cfg: GaugeConfig) -> np.ndarray | None:
    """Dual-lattice spins with ``s_a * s_b = tau`` on every dual bond.

    Dual site ``a`` is the plaquette with index ``a``. The first spin is fixed
    to +1. Returns ``None`` when no consistent assignment exists, which for a
    closed-loop configuration means odd string parity across a torus cut.
    """
    topo = cfg.topo
    if topo.dimension != 2:
        raise ValueError("the dual Ising map is defined on the square lattice")
    if occupation(cfg).any():
        raise ValueError("configuration carries matter; only closed loops map to Ising spins")
    tau = cfg.tau
    n = topo.plaquette_count
    spins = np.zeros(n, dtype=np.int8)
    spins[0] = 1
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for l in topo.plaquettes[a]:
            p, q = topo.link_plaquettes[l]
            b = q if p == a else p
            want = spins[a] * tau[l]
            if spins[b] == 0:
                spins[b] = want
                queue.append(b)
            elif spins[b] != want:
                return None
    return spins


def tau_from_dual(topo: LatticeTopology, spins: np.ndarray) -> np.ndarray:
    a, b = topo.link_plaquettes[:, 0], topo.link_plaquettes[:, 1]
    return (spins[a] * spins[b]).astype(np.int8)


def dual_bond_energy(topo: LatticeTopology, spins: np.ndarray, h: float) -> float:
    """``-h * sum over dual bonds of s_a s_b``."""
    return -h * float(tau_from_dual(topo, spins).sum())
