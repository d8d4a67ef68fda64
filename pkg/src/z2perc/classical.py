"""Metropolis(-Hastings) sampling of the classical Z2 gauge model.

Two ensembles are supported:

* canonical, ``H = -h sum_l tau_l`` at fixed particle number ``N``, using
  plaquette flips and hard-core particle moves that drag a string behind them;
* grand canonical, ``H = -h sum_l tau_l - mu sum_j n_j`` with matter read off
  the star products, using plaquette flips and single-link flips.

Every elementary update is a jitted kernel that receives its random numbers
as arguments. The same kernels back the single-step Python API (fed from a
``numpy.random.Generator``) and the bulk loops (fed from numba's generator,
seeded once per chain).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .gauge import CanonicalState, GaugeConfig, energy_grand, init_dimers, occupation
from .lattice import LatticeTopology, build_lattice
from .percolation import measure

CANONICAL = "canonical"
GRAND = "grand"

# counters layout: [plaq proposed, plaq accepted, move/flip proposed, move/flip accepted]
_PLAQ_P, _PLAQ_A, _OTHER_P, _OTHER_A = range(4)


@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def plaquette_kernel(strings, plaquettes, beta_h, p, u):
    # tau = 1 - 2 s ; flipping four links changes E by 2h * sum(tau)
    s = 0
    for k in range(4):
        s += 1 - 2 * strings[plaquettes[p, k]]
    x = 2.0 * beta_h * s
    if x > 0.0 and u >= math.exp(-x):
        return False
    for k in range(4):
        strings[plaquettes[p, k]] ^= 1
    return True


@njit(cache=True)
def _star_parity(strings, star, site):
    n = 0
    for k in range(star.shape[1]):
        n += strings[star[site, k]]
    return n & 1


@njit(cache=True)
def gc_flip_kernel(strings, star, link_ends, beta_h, beta_mu, l, u):
    tau = 1 - 2 * strings[l]
    a = link_ends[l, 0]
    b = link_ends[l, 1]
    dn = (1 - 2 * _star_parity(strings, star, a)) + (1 - 2 * _star_parity(strings, star, b))
    x = 2.0 * beta_h * tau - beta_mu * dn
    if x > 0.0 and u >= math.exp(-x):
        return False
    strings[l] ^= 1
    return True


@njit(cache=True)
def _empty_slots(site_particle, neighbors, site, ignore):
    # empty neighbour slots of `site`, treating `ignore` as empty
    n = 0
    for k in range(neighbors.shape[1]):
        t = neighbors[site, k]
        if t == ignore or site_particle[t] < 0:
            n += 1
    return n


@njit(cache=True)
def _refresh(i, positions, site_particle, neighbors, movable_list, movable_slot, nmov):
    movable = _empty_slots(site_particle, neighbors, positions[i], -1) > 0
    slot = movable_slot[i]
    if movable and slot < 0:
        movable_list[nmov[0]] = i
        movable_slot[i] = nmov[0]
        nmov[0] += 1
    elif not movable and slot >= 0:
        last = movable_list[nmov[0] - 1]
        movable_list[slot] = last
        movable_slot[last] = slot
        movable_list[nmov[0] - 1] = -1
        movable_slot[i] = -1
        nmov[0] -= 1


@njit(cache=True)
def _relocate(i, src, dst, positions, site_particle, neighbors, movable_list, movable_slot, nmov):
    site_particle[src] = -1
    site_particle[dst] = i
    positions[i] = dst
    _refresh(i, positions, site_particle, neighbors, movable_list, movable_slot, nmov)
    for c in (src, dst):
        for k in range(neighbors.shape[1]):
            j = site_particle[neighbors[c, k]]
            if j >= 0 and j != i:
                _refresh(j, positions, site_particle, neighbors, movable_list, movable_slot, nmov)


@njit(cache=True)
def move_acceptance(strings, positions, site_particle, movable_list, movable_slot, nmov,
                    star, neighbors, beta_h, i, k):
    """Metropolis-Hastings ratio for moving particle ``i`` through star slot ``k``.

    The configuration is left unchanged.
    """
    src = positions[i]
    dst = neighbors[src, k]
    l = star[src, k]
    nn_before = _empty_slots(site_particle, neighbors, src, -1)
    nn_after = _empty_slots(site_particle, neighbors, dst, src)
    mov_before = nmov[0]
    _relocate(i, src, dst, positions, site_particle, neighbors, movable_list, movable_slot, nmov)
    mov_after = nmov[0]
    _relocate(i, dst, src, positions, site_particle, neighbors, movable_list, movable_slot, nmov)
    tau = 1 - 2 * strings[l]
    return math.exp(-2.0 * beta_h * tau) * (nn_before / nn_after) * (mov_before / mov_after)


@njit(cache=True)
def move_kernel(strings, positions, site_particle, movable_list, movable_slot, nmov,
                star, neighbors, beta_h, u1, u2, u3):
    n = nmov[0]
    if n == 0:
        return False
    i = movable_list[min(int(u1 * n), n - 1)]
    src = positions[i]
    n_empty = _empty_slots(site_particle, neighbors, src, -1)
    pick = min(int(u2 * n_empty), n_empty - 1)
    k = -1
    for kk in range(neighbors.shape[1]):
        if site_particle[neighbors[src, kk]] < 0:
            if pick == 0:
                k = kk
                break
            pick -= 1
    ratio = move_acceptance(strings, positions, site_particle, movable_list, movable_slot, nmov,
                            star, neighbors, beta_h, i, k)
    if ratio < 1.0 and u3 >= ratio:
        return False
    dst = neighbors[src, k]
    _relocate(i, src, dst, positions, site_particle, neighbors, movable_list, movable_slot, nmov)
    strings[star[src, k]] ^= 1
    return True


@njit(cache=True)
def canonical_steps(strings, positions, site_particle, movable_list, movable_slot, nmov,
                    star, neighbors, plaquettes, beta_h, n_steps, use_moves, counters):
    n_plaq = plaquettes.shape[0]
    for _ in range(n_steps):
        if use_moves and np.random.random() < 0.5:
            counters[_OTHER_P] += 1
            if move_kernel(strings, positions, site_particle, movable_list, movable_slot, nmov,
                           star, neighbors, beta_h,
                           np.random.random(), np.random.random(), np.random.random()):
                counters[_OTHER_A] += 1
        else:
            counters[_PLAQ_P] += 1
            p = np.random.randint(0, n_plaq)
            if plaquette_kernel(strings, plaquettes, beta_h, p, np.random.random()):
                counters[_PLAQ_A] += 1


@njit(cache=True)
def grand_steps(strings, star, link_ends, plaquettes, beta_h, beta_mu, n_steps, counters):
    n_plaq = plaquettes.shape[0]
    n_links = strings.shape[0]
    for _ in range(n_steps):
        if np.random.random() < 0.5:
            counters[_PLAQ_P] += 1
            p = np.random.randint(0, n_plaq)
            if plaquette_kernel(strings, plaquettes, beta_h, p, np.random.random()):
                counters[_PLAQ_A] += 1
        else:
            counters[_OTHER_P] += 1
            l = np.random.randint(0, n_links)
            if gc_flip_kernel(strings, star, link_ends, beta_h, beta_mu, l, np.random.random()):
                counters[_OTHER_A] += 1


# ----------------------------------------------------------------------------
# single-update API


def _nmov(state: CanonicalState) -> np.ndarray:
    return np.array([state.n_movable], dtype=np.int64)


def _store_nmov(state: CanonicalState, nmov: np.ndarray) -> None:
    state.n_movable = int(nmov[0])


def move_update(state: CanonicalState, beta_h: float, rng: np.random.Generator) -> bool:
    """One Metropolis-Hastings particle move; returns whether it was accepted."""
    topo = state.config.topo
    nmov = _nmov(state)
    u1, u2, u3 = rng.random(3)
    accepted = move_kernel(
        state.config.strings, state.positions, state.site_particle, state.movable_list,
        state.movable_slot, nmov, topo.star, topo.neighbors, beta_h, u1, u2, u3,
    )
    _store_nmov(state, nmov)
    return bool(accepted)


def move_ratio(state: CanonicalState, beta_h: float, particle: int, slot: int) -> float:
    """Unclipped acceptance ratio for moving ``particle`` through star ``slot``."""
    topo = state.config.topo
    nmov = _nmov(state)
    r = move_acceptance(
        state.config.strings, state.positions, state.site_particle, state.movable_list,
        state.movable_slot, nmov, topo.star, topo.neighbors, beta_h, particle, slot,
    )
    _store_nmov(state, nmov)
    return float(r)


def plaquette_update(target, beta_h: float, rng: np.random.Generator, plaq: int | None = None) -> bool:
    """Metropolis flip of one plaquette; ``target`` is a GaugeConfig or CanonicalState."""
    cfg = target.config if isinstance(target, CanonicalState) else target
    if plaq is None:
        plaq = int(rng.integers(cfg.topo.plaquette_count))
    return bool(plaquette_kernel(cfg.strings, cfg.topo.plaquettes, beta_h, plaq, rng.random()))


def gc_link_flip(cfg: GaugeConfig, beta_h: float, beta_mu: float, rng: np.random.Generator,
                 link: int | None = None) -> bool:
    topo = cfg.topo
    if link is None:
        link = int(rng.integers(topo.link_count))
    return bool(gc_flip_kernel(cfg.strings, topo.star, topo.link_ends, beta_h, beta_mu,
                               link, rng.random()))


# ----------------------------------------------------------------------------
# runs


@dataclass
class RunParamsClassical:
    D: int
    L: int
    T_over_h: float
    ensemble: str = CANONICAL
    N: int = 0
    mu: float = 0.0
    h: float = 1.0
    n_samples: int = 1000
    thermalization: int | None = None
    stride: int | None = None
    seed: int = 0
    keep_snapshots: bool = False
    debug: bool = False

    def __post_init__(self):
        if self.ensemble not in (CANONICAL, GRAND):
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        if self.h <= 0 or self.T_over_h <= 0:
            raise ValueError("h and T/h must be positive")
        if self.ensemble == CANONICAL and self.N % 2:
            raise ValueError("N must be even")
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")
        volume = self.L**self.D
        if self.thermalization is None:
            self.thermalization = (200 if self.ensemble == CANONICAL else 500) * volume
        if self.stride is None:
            self.stride = (2 if self.ensemble == CANONICAL else 5) * volume
        if self.thermalization < 0 or self.stride <= 0:
            raise ValueError("schedule counts must be positive")

    @property
    def beta_h(self) -> float:
        return 1.0 / self.T_over_h

    @property
    def beta_mu(self) -> float:
        return self.mu / (self.h * self.T_over_h)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ObservableSeries:
    """Per-sample measurements plus run metadata."""

    columns: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    snapshots: np.ndarray | None = None

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __getitem__(self, key: str) -> np.ndarray:
        return self.columns[key]

    def mean(self, key: str) -> float:
        return float(np.mean(self.columns[key]))


SERIES_COLUMNS = (
    "percolates", "strength", "largest_cluster", "total_strings",
    "matter_density", "energy", "pair_distance",
)


def pair_distance(topo: LatticeTopology, a: int, b: int) -> float:
    """Minimum-image Euclidean distance on the torus."""
    L = topo.linear_size
    d = np.abs(topo.coords[a] - topo.coords[b])
    d = np.minimum(d, L - d)
    return float(np.sqrt((d**2).sum()))


def run_classical(params: RunParamsClassical) -> ObservableSeries:
    topo = build_lattice(params.D, params.L)
    rng = np.random.default_rng(params.seed)
    _seed(int(rng.integers(2**31 - 1)))
    counters = np.zeros(4, dtype=np.int64)
    canonical = params.ensemble == CANONICAL
    beta_h = params.beta_h

    if canonical:
        state = init_dimers(topo, params.N, rng)
        cfg = state.config
        nmov = _nmov(state)
        use_moves = 0 < params.N < topo.site_count

        def advance(n):
            canonical_steps(cfg.strings, state.positions, state.site_particle, state.movable_list,
                            state.movable_slot, nmov, topo.star, topo.neighbors, topo.plaquettes,
                            beta_h, n, use_moves, counters)
    else:
        cfg = GaugeConfig.vacuum(topo)
        beta_mu = params.beta_mu

        def advance(n):
            grand_steps(cfg.strings, topo.star, topo.link_ends, topo.plaquettes,
                        beta_h, beta_mu, n, counters)

    t0 = time.perf_counter()
    advance(params.thermalization)
    n = params.n_samples
    cols = {
        "percolates": np.zeros(n, dtype=bool),
        "strength": np.zeros(n),
        "largest_cluster": np.zeros(n, dtype=np.int64),
        "total_strings": np.zeros(n, dtype=np.int64),
        "matter_density": np.zeros(n),
        "energy": np.zeros(n),
        "pair_distance": np.full(n, np.nan),
    }
    snaps = np.zeros((n, topo.link_count), dtype=np.uint8) if params.keep_snapshots else None
    for i in range(n):
        advance(params.stride)
        if canonical:
            state.n_movable = int(nmov[0])
            if params.debug:
                state.check()
            elif i % 64 == 0 and occupation(cfg).sum() != params.N:
                raise RuntimeError("Gauss's law violated during canonical sampling")
        wraps, largest, total = measure(cfg.strings, topo.star, topo.neighbors,
                                        topo.star_crossing, topo.link_ends, True)
        perc = bool(wraps.any())
        cols["percolates"][i] = perc
        cols["largest_cluster"][i] = largest
        cols["total_strings"][i] = total
        cols["strength"][i] = largest / topo.link_count if perc else 0.0
        n_matter = int(occupation(cfg).sum())
        cols["matter_density"][i] = n_matter / topo.site_count
        e_field = -params.h * (topo.link_count - 2.0 * total)
        cols["energy"][i] = e_field if canonical else e_field - params.mu * n_matter
        if canonical and params.N == 2:
            a, b = state.positions
            cols["pair_distance"][i] = pair_distance(topo, a, b)
        if snaps is not None:
            snaps[i] = cfg.strings
    elapsed = time.perf_counter() - t0

    rates = {
        "plaquette": counters[_PLAQ_A] / max(counters[_PLAQ_P], 1),
        ("move" if canonical else "link_flip"): counters[_OTHER_A] / max(counters[_OTHER_P], 1),
    }
    meta = {
        "params": params.to_dict(),
        "wall_time": elapsed,
        "acceptance": {k: float(v) for k, v in rates.items()},
        "proposals": counters.tolist(),
    }
    return ObservableSeries(cols, meta, snaps)


def mc_step(state, params: RunParamsClassical, rng: np.random.Generator) -> str:
    """Apply one update of the configured mix; returns the update kind used."""
    beta_h = params.beta_h
    if params.ensemble == CANONICAL:
        topo = state.config.topo
        use_moves = 0 < state.n_particles < topo.site_count
        if use_moves and rng.random() < 0.5:
            move_update(state, beta_h, rng)
            return "move"
        plaquette_update(state, beta_h, rng)
        return "plaquette"
    if rng.random() < 0.5:
        plaquette_update(state, beta_h, rng)
        return "plaquette"
    gc_link_flip(state, beta_h, params.beta_mu, rng)
    return "link_flip"


def boltzmann_energy(cfg: GaugeConfig, params: RunParamsClassical) -> float:
    if params.ensemble == CANONICAL:
        return -params.h * float(cfg.tau.sum())
    return energy_grand(cfg, params.h, params.mu)
