"""Electric-field snapshots in the g = +1 gauge sector.

A configuration stores one byte per link, ``1`` for a string (tau^x = -1) and
``0`` otherwise. Matter is never stored on a :class:`GaugeConfig`; it follows
from the star products, ``n_j = (1 - prod_{l in +_j} tau^x_l) / 2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeTopology


class Basis(enum.IntEnum):
    X = 0
    Z = 1


@dataclass(eq=False)
class GaugeConfig:
    topo: LatticeTopology
    strings: np.ndarray  # uint8, one entry per link
    basis: Basis = Basis.X

    def __post_init__(self):
        self.strings = np.ascontiguousarray(self.strings, dtype=np.uint8)
        if self.strings.shape != (self.topo.link_count,):
            raise ValueError(
                f"expected {self.topo.link_count} link values, got {self.strings.shape}"
            )
        if self.strings.size and self.strings.max() > 1:
            raise ValueError("link values must be 0 or 1")

    @classmethod
    def vacuum(cls, topo: LatticeTopology, basis: Basis = Basis.X) -> "GaugeConfig":
        return cls(topo, np.zeros(topo.link_count, dtype=np.uint8), basis)

    @classmethod
    def from_tau(cls, topo: LatticeTopology, tau, basis: Basis = Basis.X) -> "GaugeConfig":
        tau = np.asarray(tau)
        if not np.all(np.abs(tau) == 1):
            raise ValueError("spins must be +1 or -1")
        return cls(topo, (tau < 0).astype(np.uint8), basis)

    @property
    def tau(self) -> np.ndarray:
        """Link spins as +1 / -1."""
        return 1 - 2 * self.strings.astype(np.int8)

    def copy(self) -> "GaugeConfig":
        return GaugeConfig(self.topo, self.strings.copy(), self.basis)

    def __eq__(self, other):
        if not isinstance(other, GaugeConfig):
            return NotImplemented
        return (
            self.topo.dimension == other.topo.dimension
            and self.topo.linear_size == other.topo.linear_size
            and self.basis == other.basis
            and np.array_equal(self.strings, other.strings)
        )


def occupation(cfg: GaugeConfig) -> np.ndarray:
    """Matter occupation per site implied by Gauss's law (odd string count => 1)."""
    return (cfg.strings[cfg.topo.star].sum(axis=1) & 1).astype(np.uint8)


def gauss_residual(cfg: GaugeConfig, matter) -> list[int]:
    """Sites where (-1)^{n_j} prod tau^x != +1 given an explicit matter set."""
    n = np.zeros(cfg.topo.site_count, dtype=np.uint8)
    n[np.asarray(list(matter), dtype=np.int64)] = 1
    return [int(j) for j in np.flatnonzero(occupation(cfg) != n)]


def energy_canonical(cfg: GaugeConfig, h: float) -> float:
    return -h * float(cfg.tau.sum(dtype=np.int64))


def energy_grand(cfg: GaugeConfig, h: float, mu: float) -> float:
    return energy_canonical(cfg, h) - mu * float(occupation(cfg).sum())


def matter_density(cfg: GaugeConfig) -> float:
    return float(occupation(cfg).sum()) / cfg.topo.site_count


@dataclass(eq=False)
class CanonicalState:
    """Fixed-N configuration with explicit particle bookkeeping.

    ``site_particle[j]`` is the particle sitting on ``j`` (or -1),
    ``positions[i]`` the site of particle ``i``. Movable particles (at least
    one empty neighbour) are kept in ``movable_list[:n_movable]`` with
    ``movable_slot[i]`` giving their slot, -1 when immobile.
    """

    config: GaugeConfig
    positions: np.ndarray
    site_particle: np.ndarray
    movable_list: np.ndarray
    movable_slot: np.ndarray
    n_movable: int = 0

    @property
    def n_particles(self) -> int:
        return len(self.positions)

    @property
    def matter_sites(self) -> set[int]:
        return {int(s) for s in self.positions}

    @classmethod
    def from_config(cls, config: GaugeConfig) -> "CanonicalState":
        positions = np.flatnonzero(occupation(config)).astype(np.int64)
        site_particle = np.full(config.topo.site_count, -1, dtype=np.int64)
        site_particle[positions] = np.arange(len(positions))
        state = cls(
            config=config,
            positions=positions,
            site_particle=site_particle,
            movable_list=np.full(len(positions), -1, dtype=np.int64),
            movable_slot=np.full(len(positions), -1, dtype=np.int64),
        )
        state.rebuild_movability()
        return state

    def movable_flags(self) -> np.ndarray:
        """Recompute movability from scratch."""
        nb = self.config.topo.neighbors[self.positions]
        return (self.site_particle[nb] < 0).any(axis=1) if len(nb) else np.zeros(0, bool)

    def rebuild_movability(self) -> None:
        flags = self.movable_flags()
        idx = np.flatnonzero(flags)
        self.movable_list[:] = -1
        self.movable_list[: len(idx)] = idx
        self.movable_slot[:] = -1
        self.movable_slot[idx] = np.arange(len(idx))
        self.n_movable = len(idx)

    def check(self) -> None:
        """Raise AssertionError if any bookkeeping invariant is broken."""
        occ = occupation(self.config)
        assert set(np.flatnonzero(occ)) == self.matter_sites, "Gauss's law violated"
        assert np.all(self.site_particle[self.positions] == np.arange(self.n_particles))
        assert np.count_nonzero(self.site_particle >= 0) == self.n_particles
        flags = self.movable_flags()
        cached = self.movable_slot >= 0
        assert np.array_equal(flags, cached), "stale movability cache"
        assert self.n_movable == int(flags.sum())
        for k in range(self.n_movable):
            assert self.movable_slot[self.movable_list[k]] == k


def init_dimers(topo: LatticeTopology, N: int, rng: np.random.Generator) -> CanonicalState:
    """Place ``N/2`` nearest-neighbour dimers, each joined by a single string."""
    if N % 2:
        raise ValueError("matter particles must come in pairs (N must be even)")
    if not 0 <= N <= topo.site_count:
        raise ValueError(f"N={N} exceeds the {topo.site_count} available sites")

    strings = np.zeros(topo.link_count, dtype=np.uint8)
    free = np.ones(topo.site_count, dtype=bool)
    placed = 0
    # greedy pairing over shuffled sites; retried from a fresh shuffle if it gets stuck
    for _ in range(1000):
        if placed == N // 2:
            break
        strings[:] = 0
        free[:] = True
        placed = 0
        for s in rng.permutation(topo.site_count):
            if placed == N // 2:
                break
            if not free[s]:
                continue
            slots = [k for k in rng.permutation(topo.coordination) if free[topo.neighbors[s, k]]]
            if not slots:
                continue
            k = slots[0]
            free[s] = free[topo.neighbors[s, k]] = False
            strings[topo.star[s, k]] = 1
            placed += 1
    if placed != N // 2:
        # every site on an even L lattice can be covered by a dimer tiling; fall back to one
        if topo.linear_size % 2:
            raise ValueError(f"could not place {N // 2} disjoint dimers")
        strings[:] = 0
        sites = np.flatnonzero(topo.coords[:, 0] % 2 == 0)[: N // 2]
        strings[sites * topo.dimension] = 1
    return CanonicalState.from_config(GaugeConfig(topo, strings))
