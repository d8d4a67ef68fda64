import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from z2perc.gauge import (
    Basis, CanonicalState, GaugeConfig, energy_canonical, energy_grand, gauss_residual,
    init_dimers, matter_density, occupation,
)
from z2perc.lattice import build_lattice


def dimer(topo, site=0, direction=0):
    cfg = GaugeConfig.vacuum(topo)
    link = topo.link_index(site, direction)
    cfg.strings[link] = 1
    return cfg, set(topo.link_ends[link].tolist())


def test_gauss_residual_examples(square4):
    vac = GaugeConfig.vacuum(square4)
    assert gauss_residual(vac, set()) == []
    cfg, ends = dimer(square4)
    assert sorted(gauss_residual(cfg, set())) == sorted(ends)
    assert gauss_residual(cfg, ends) == []


def test_energies(square4):
    vac = GaugeConfig.vacuum(square4)
    assert energy_canonical(vac, 1.0) == -32
    cfg, _ = dimer(square4)
    assert energy_canonical(cfg, 1.0) == -30
    full = GaugeConfig(square4, np.ones(32, dtype=np.uint8))
    assert energy_canonical(full, 1.0) == 32
    assert energy_grand(vac, 1.0, 0.7) == -32
    assert energy_grand(cfg, 1.0, 1.0) == -32


def test_matter_density(square4):
    assert matter_density(GaugeConfig.vacuum(square4)) == 0
    cfg, _ = dimer(square4)
    assert matter_density(cfg) == 0.125
    assert matter_density(GaugeConfig(square4, np.ones(32, dtype=np.uint8))) == 0


configs = st.integers(0, 2**32 - 1).map(
    lambda seed: np.random.default_rng(seed).integers(0, 2, 32).astype(np.uint8)
)


@given(configs, st.floats(0.1, 5), st.floats(-3, 3))
def test_energy_identities(strings, h, mu):
    topo = build_lattice(2, 4)
    cfg = GaugeConfig(topo, strings)
    assert energy_grand(cfg, h, 0.0) == pytest.approx(energy_canonical(cfg, h))
    n = occupation(cfg)
    # strings end in pairs: matter parity is even
    assert n.sum() % 2 == 0
    assert energy_grand(cfg, h, mu) == pytest.approx(-h * cfg.tau.sum() - mu * n.sum())


@given(configs, st.integers(0, 15))
def test_star_flip_matter(strings, site):
    topo = build_lattice(2, 4)
    cfg = GaugeConfig(topo, strings)
    before = occupation(cfg)
    cfg.strings[topo.star[site]] ^= 1
    after = occupation(cfg)
    assert after[site] == before[site]
    # each neighbour shares exactly one link with the star
    nbrs = topo.neighbors[site]
    assert np.array_equal(after[nbrs], 1 - before[nbrs])
    others = np.setdiff1d(np.arange(topo.site_count), np.append(nbrs, site))
    assert np.array_equal(after[others], before[others])


@given(configs, st.integers(0, 15))
def test_plaquette_flip_keeps_matter(strings, plaq):
    topo = build_lattice(2, 4)
    cfg = GaugeConfig(topo, strings)
    before = occupation(cfg)
    cfg.strings[topo.plaquettes[plaq]] ^= 1
    assert np.array_equal(occupation(cfg), before)


@pytest.mark.parametrize("D,L,N", [(2, 4, 0), (2, 4, 2), (2, 4, 16), (2, 5, 24), (3, 3, 26), (2, 2, 4)])
def test_init_dimers(D, L, N):
    topo = build_lattice(D, L)
    state = init_dimers(topo, N, np.random.default_rng(3))
    assert state.n_particles == N
    assert gauss_residual(state.config, state.matter_sites) == []
    assert state.config.strings.sum() == N // 2
    state.check()


def test_init_dimers_energy(square4):
    state = init_dimers(square4, 2, np.random.default_rng(0))
    assert energy_canonical(state.config, 1.0) == -(32 - 2)


@pytest.mark.parametrize("N", [3, -2, 18])
def test_init_dimers_rejects(square4, N):
    with pytest.raises(ValueError):
        init_dimers(square4, N, np.random.default_rng(0))


def test_config_validation(square4):
    with pytest.raises(ValueError):
        GaugeConfig(square4, np.zeros(31, dtype=np.uint8))
    with pytest.raises(ValueError):
        GaugeConfig(square4, np.full(32, 2, dtype=np.uint8))
    cfg = GaugeConfig.from_tau(square4, -np.ones(32))
    assert cfg.strings.sum() == 32 and cfg.basis == Basis.X


def test_canonical_state_check_detects_stale_cache(square4):
    state = init_dimers(square4, 4, np.random.default_rng(1))
    state.movable_slot[:] = -1
    with pytest.raises(AssertionError):
        state.check()
    state.rebuild_movability()
    state.check()
    assert isinstance(CanonicalState.from_config(state.config), CanonicalState)
