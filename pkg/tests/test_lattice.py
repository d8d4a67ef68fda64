import numpy as np
import pytest

from z2perc.lattice import build_lattice, cut_crossing, plaquette_links, star_links


@pytest.mark.parametrize("D,L,sites,links,plaqs", [(2, 4, 16, 32, 16), (3, 4, 64, 192, 192)])
def test_counts(D, L, sites, links, plaqs):
    topo = build_lattice(D, L)
    assert (topo.site_count, topo.link_count, topo.plaquette_count) == (sites, links, plaqs)


@pytest.mark.parametrize("D,L", [(2, 1), (1, 4), (4, 3), (2, 0)])
def test_rejects_bad_shape(D, L):
    with pytest.raises(ValueError):
        build_lattice(D, L)


@pytest.mark.parametrize("D,L", [(2, 2), (2, 3), (2, 5), (3, 2), (3, 3)])
def test_incidence_invariants(D, L):
    topo = build_lattice(D, L)
    # every link appears in exactly the stars of its two endpoints
    owners = {}
    for s in range(topo.site_count):
        links = star_links(topo, s)
        assert len(set(links)) == 2 * D
        for l in links:
            owners.setdefault(l, []).append(s)
            assert s in topo.link_ends[l]
    assert sum(len(v) for v in owners.values()) == 2 * topo.link_count
    for l, sites in owners.items():
        assert sorted(sites) == sorted(topo.link_ends[l].tolist())
    # plaquettes: 4 distinct links; each link in 2(D-1) plaquettes
    counts = np.zeros(topo.link_count, dtype=int)
    for p in range(topo.plaquette_count):
        links = plaquette_links(topo, p)
        assert len(set(links)) == 4
        counts[links] += 1
        # a plaquette boundary touches each of its corner sites twice
        ends = topo.link_ends[links].ravel()
        assert all(np.count_nonzero(ends == s) == 2 for s in set(ends.tolist()))
    assert np.all(counts == 2 * (D - 1))


def test_link_order_is_site_major():
    topo = build_lattice(3, 3)
    assert topo.link_index(5, 2) == 17
    assert topo.link_ends[17, 0] == 5


def test_bounds(square4):
    with pytest.raises(IndexError):
        star_links(square4, square4.site_count)
    with pytest.raises(IndexError):
        plaquette_links(square4, square4.plaquette_count)


def test_plaquette_orientation(cubic4):
    links = plaquette_links(cubic4, 0)  # xy plaquette at the origin
    assert all(l % 3 != 2 for l in links)
    assert set(links) == {0, 1, cubic4.link_index(1, 1), cubic4.link_index(4, 0)}


def test_cut_crossing_examples(square4):
    t = square4
    assert cut_crossing(t, t.site_index(3, 0), t.site_index(0, 0), 0) == 1
    assert cut_crossing(t, t.site_index(0, 0), t.site_index(3, 0), 0) == -1
    assert cut_crossing(t, t.site_index(1, 0), t.site_index(2, 0), 0) == 0
    assert cut_crossing(t, t.site_index(3, 0), t.site_index(0, 0), 1) == 0
    with pytest.raises(ValueError):
        cut_crossing(t, t.site_index(0, 0), t.site_index(2, 0), 0)


def test_cut_crossing_L2_needs_link():
    t = build_lattice(2, 2)
    a, b = t.site_index(1, 0), t.site_index(0, 0)
    with pytest.raises(ValueError):
        cut_crossing(t, a, b, 0)
    assert cut_crossing(t, a, b, 0, link=t.link_index(a, 0)) == 1
    assert cut_crossing(t, a, b, 0, link=t.link_index(b, 0)) == 0


@pytest.mark.parametrize("D,L", [(2, 3), (2, 4), (3, 3)])
def test_crossing_sums(D, L):
    topo = build_lattice(D, L)

    def walk_sum(site, slots):
        total = np.zeros(D, dtype=int)
        for k in slots:
            total += topo.star_crossing[site, k]
            site = topo.neighbors[site, k]
        return site, total

    # around any plaquette the net crossing vanishes
    pairs = [(a, b) for a in range(D) for b in range(a + 1, D)]
    for s in range(topo.site_count):
        for a, b in pairs:
            end, total = walk_sum(s, [2 * a, 2 * b, 2 * a + 1, 2 * b + 1])
            assert end == s and not total.any()
    # a straight winding path crosses exactly once
    for s in range(topo.site_count):
        for k in range(D):
            end, total = walk_sum(s, [2 * k] * L)
            expected = np.zeros(D, dtype=int)
            expected[k] = 1
            assert end == s and np.array_equal(total, expected)
            end, total = walk_sum(s, [2 * k + 1] * L)
            assert np.array_equal(total, -expected)


def test_tables_are_read_only(square4):
    with pytest.raises(ValueError):
        square4.star[0, 0] = 3
