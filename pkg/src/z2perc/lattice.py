"""Periodic square (D=2) and cubic (D=3) lattices.

Sites are numbered ``x_0 + L*x_1 + L**2*x_2``. Link ``site*D + d`` joins
``site`` to ``site + e_d``. All incidence tables are built once and never
mutated, so one topology can be shared by any number of chains.

The star of a site lists its links in the order ``+e_0, -e_0, +e_1, -e_1, ...``
and ``neighbors[site, k]`` is the site reached through ``star[site, k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np


@dataclass(frozen=True, eq=False)
class LatticeTopology:
    dimension: int
    linear_size: int
    coords: np.ndarray = field(repr=False)        # (n_sites, D)
    link_ends: np.ndarray = field(repr=False)     # (n_links, 2)
    star: np.ndarray = field(repr=False)          # (n_sites, 2D) link ids
    neighbors: np.ndarray = field(repr=False)     # (n_sites, 2D) site ids
    plaquettes: np.ndarray = field(repr=False)    # (n_plaq, 4) link ids
    link_plaquettes: np.ndarray = field(repr=False)  # (n_links, 2(D-1))
    # +1 / -1 / 0 seam crossing of each star slot, along each dimension
    star_crossing: np.ndarray = field(repr=False)  # (n_sites, 2D, D)

    @property
    def site_count(self) -> int:
        return self.linear_size ** self.dimension

    @property
    def link_count(self) -> int:
        return self.dimension * self.site_count

    @property
    def plaquette_count(self) -> int:
        d = self.dimension
        return d * (d - 1) // 2 * self.site_count

    @property
    def coordination(self) -> int:
        return 2 * self.dimension

    def site_index(self, *x: int) -> int:
        L = self.linear_size
        return int(sum((xi % L) * L**k for k, xi in enumerate(x)))

    def link_index(self, site: int, direction: int) -> int:
        return site * self.dimension + direction

    def shift(self, site: int, direction: int, step: int = 1) -> int:
        x = self.coords[site].copy()
        x[direction] = (x[direction] + step) % self.linear_size
        return self.site_index(*x)


def build_lattice(D: int, L: int) -> LatticeTopology:
    """Build the periodic hypercubic lattice of dimension ``D`` and side ``L``."""
    if D not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {D}")
    if L < 2:
        raise ValueError(f"linear size must be >= 2, got {L}")

    n_sites = L**D
    strides = L ** np.arange(D)
    coords = np.stack(np.unravel_index(np.arange(n_sites), (L,) * D, order="F"), axis=1)
    coords = coords.astype(np.int64)

    def step(sites, d, s):
        x = coords[sites].copy()
        x[:, d] = (x[:, d] + s) % L
        return x @ strides

    sites = np.arange(n_sites)
    link_ends = np.empty((D * n_sites, 2), dtype=np.int64)
    star = np.empty((n_sites, 2 * D), dtype=np.int64)
    neighbors = np.empty((n_sites, 2 * D), dtype=np.int64)
    crossing = np.zeros((n_sites, 2 * D, D), dtype=np.int64)
    for d in range(D):
        fwd = step(sites, d, +1)
        bwd = step(sites, d, -1)
        link_ends[sites * D + d, 0] = sites
        link_ends[sites * D + d, 1] = fwd
        star[:, 2 * d] = sites * D + d
        star[:, 2 * d + 1] = bwd * D + d
        neighbors[:, 2 * d] = fwd
        neighbors[:, 2 * d + 1] = bwd
        # the seam sits between coordinate L-1 and 0
        crossing[coords[:, d] == L - 1, 2 * d, d] = 1
        crossing[coords[:, d] == 0, 2 * d + 1, d] = -1

    pairs = list(combinations(range(D), 2))
    plaquettes = np.empty((n_sites * len(pairs), 4), dtype=np.int64)
    for k, (a, b) in enumerate(pairs):
        rows = sites * len(pairs) + k
        plaquettes[rows, 0] = sites * D + a
        plaquettes[rows, 1] = step(sites, a, +1) * D + b
        plaquettes[rows, 2] = step(sites, b, +1) * D + a
        plaquettes[rows, 3] = sites * D + b

    n_links = D * n_sites
    per_link = 2 * (D - 1)
    link_plaquettes = np.full((n_links, per_link), -1, dtype=np.int64)
    fill = np.zeros(n_links, dtype=np.int64)
    for p, links in enumerate(plaquettes):
        for l in links:
            link_plaquettes[l, fill[l]] = p
            fill[l] += 1
    assert np.all(fill == per_link)

    for arr in (coords, link_ends, star, neighbors, plaquettes, link_plaquettes, crossing):
        arr.setflags(write=False)
    return LatticeTopology(
        dimension=D,
        linear_size=L,
        coords=coords,
        link_ends=link_ends,
        star=star,
        neighbors=neighbors,
        plaquettes=plaquettes,
        link_plaquettes=link_plaquettes,
        star_crossing=crossing,
    )


def _check_site(topo: LatticeTopology, site: int) -> None:
    if not 0 <= site < topo.site_count:
        raise IndexError(f"site {site} out of range [0, {topo.site_count})")


def star_links(topo: LatticeTopology, site: int) -> list[int]:
    _check_site(topo, site)
    return [int(l) for l in topo.star[site]]


def plaquette_links(topo: LatticeTopology, plaq: int) -> list[int]:
    if not 0 <= plaq < topo.plaquette_count:
        raise IndexError(f"plaquette {plaq} out of range [0, {topo.plaquette_count})")
    return [int(l) for l in topo.plaquettes[plaq]]


def cut_crossing(
    topo: LatticeTopology, from_site: int, to_site: int, dim: int, link: int | None = None
) -> int:
    """Signed crossing of the seam in ``dim`` when stepping ``from_site -> to_site``.

    For ``L = 2`` two distinct links join the same pair of sites along one
    axis and only one of them crosses the seam; pass ``link`` to disambiguate.
    """
    _check_site(topo, from_site)
    _check_site(topo, to_site)
    if not 0 <= dim < topo.dimension:
        raise ValueError(f"dim must be in [0, {topo.dimension})")
    slots = np.flatnonzero(topo.neighbors[from_site] == to_site)
    if link is not None:
        slots = [k for k in slots if topo.star[from_site, k] == link]
    if len(slots) == 0:
        raise ValueError(f"sites {from_site} and {to_site} are not nearest neighbours")
    values = {int(topo.star_crossing[from_site, k, dim]) for k in slots}
    if len(values) > 1:
        raise ValueError("ambiguous step on an L=2 lattice; pass the link id")
    return values.pop()
