"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import functools
import itertools

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


@functools.lru_cache(maxsize=None)
def _cover_tables(D: int, L: int, copies: int):
    M = copies * L
    n_links = D * L**D
    lifts = np.array(list(itertools.product(range(copies), repeat=D)))  # (n_lifts, D)
    heads = np.empty((n_links, len(lifts)), dtype=np.int64)
    tails = np.empty_like(heads)
    for link in range(n_links):
        site, d = divmod(link, D)
        x = np.array([(site // L**k) % L for k in range(D)])
        a = x[None, :] + L * lifts
        b = a.copy()
        b[:, d] = (b[:, d] + 1) % M
        heads[link] = a @ (M ** np.arange(D))
        tails[link] = b @ (M ** np.arange(D))
    sites = np.array([[(s // L**k) % L for k in range(D)] for s in range(L**D)])
    site_lifts = (sites[:, None, :] + L * lifts[None, :, :]) @ (M ** np.arange(D))
    pairs = [
        np.array([(i, j) for i, j in itertools.combinations(range(len(lifts)), 2)
                  if lifts[i][k] != lifts[j][k]])
        for k in range(D)
    ]
    return M**D, heads, tails, site_lifts, pairs


def covering_wraps(D: int, L: int, strings: np.ndarray, copies: int = 3) -> list[bool]:
    """Wrapping flags from the ``copies``-fold unrolled torus.

    Every string link is lifted to all copies of the (copies*L)^D torus. A
    cluster of the original torus wraps along ``k`` iff two lifts of the same
    site that differ in their copy index along ``k`` land in one component.
    Coordinates are rebuilt here from scratch rather than taken from
    :mod:`z2perc.lattice`.
    """
    n_cover, heads, tails, site_lifts, pairs = _cover_tables(D, L, copies)
    on = np.flatnonzero(strings)
    if on.size == 0:
        return [False] * D
    rows, cols = heads[on].ravel(), tails[on].ravel()
    g = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n_cover, n_cover))
    _, label = connected_components(g, directed=False)
    lab = label[site_lifts]
    return [bool(np.any(lab[:, p[:, 0]] == lab[:, p[:, 1]])) for p in pairs]


def flood_fill_clusters(D: int, L: int, strings: np.ndarray) -> list[int]:
    """Cluster sizes (in links) by breadth-first flood fill over string links."""
    n_sites = L**D
    adj = {s: [] for s in range(n_sites)}
    for link in np.flatnonzero(strings):
        site, d = divmod(int(link), D)
        x = [(site // L**k) % L for k in range(D)]
        x[d] = (x[d] + 1) % L
        other = sum(x[k] * L**k for k in range(D))
        adj[site].append((other, int(link)))
        adj[other].append((site, int(link)))
    seen_sites, sizes = set(), []
    for s in range(n_sites):
        if s in seen_sites or not adj[s]:
            continue
        seen_sites.add(s)
        queue, links = [s], set()
        while queue:
            v = queue.pop()
            for u, l in adj[v]:
                links.add(l)
                if u not in seen_sites:
                    seen_sites.add(u)
                    queue.append(u)
        sizes.append(len(links))
    return sorted(sizes)
