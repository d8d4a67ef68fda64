"""Histogram harnesses and exact enumerations for the L=2 sampler oracles."""

from __future__ import annotations

import itertools
import math

import numpy as np
from numba import njit

from z2perc.classical import gc_flip_kernel, move_kernel, plaquette_kernel
from z2perc.gauge import GaugeConfig, init_dimers
from z2perc.lattice import build_lattice


@njit(cache=True)
def _code(strings):
    c = 0
    for l in range(strings.shape[0]):
        c |= np.int64(strings[l]) << l
    return c


@njit(cache=True)
def canonical_histogram(strings, positions, site_particle, movable_list, movable_slot, nmov,
                        star, neighbors, plaquettes, beta_h, n_steps, seed):
    np.random.seed(seed)
    hist = np.zeros(1 << strings.shape[0], np.int64)
    n_plaq = plaquettes.shape[0]
    for _ in range(n_steps):
        if np.random.random() < 0.5:
            move_kernel(strings, positions, site_particle, movable_list, movable_slot, nmov,
                        star, neighbors, beta_h,
                        np.random.random(), np.random.random(), np.random.random())
        else:
            plaquette_kernel(strings, plaquettes, beta_h, np.random.randint(0, n_plaq),
                             np.random.random())
        hist[_code(strings)] += 1
    return hist


@njit(cache=True)
def grand_histogram(strings, star, link_ends, plaquettes, beta_h, beta_mu, n_steps, seed):
    np.random.seed(seed)
    hist = np.zeros(1 << strings.shape[0], np.int64)
    n_plaq = plaquettes.shape[0]
    for _ in range(n_steps):
        if np.random.random() < 0.5:
            plaquette_kernel(strings, plaquettes, beta_h, np.random.randint(0, n_plaq),
                             np.random.random())
        else:
            gc_flip_kernel(strings, star, link_ends, beta_h, beta_mu,
                           np.random.randint(0, strings.shape[0]), np.random.random())
        hist[_code(strings)] += 1
    return hist


def exact_weights(D, L, weight):
    """Normalised weights over all 2^links configurations from coordinates alone."""
    n_links = D * L**D
    out = np.zeros(2**n_links)
    for code in range(2**n_links):
        s = [(code >> l) & 1 for l in range(n_links)]
        out[code] = weight(s)
    return out / out.sum()


def star_parities(D, L, s):
    """Odd/even string count at every site, built from coordinates."""
    par = [0] * L**D
    for l, v in enumerate(s):
        if not v:
            continue
        site, d = divmod(l, D)
        x = [(site // L**k) % L for k in range(D)]
        x[d] = (x[d] + 1) % L
        other = sum(x[k] * L**k for k in range(D))
        par[site] ^= 1
        par[other] ^= 1
    return par


def _exact_canonical(beta_h):
    def weight(s):
        par = star_parities(2, 2, s)
        if sum(par) != 2:
            return 0.0
        return math.exp(beta_h * sum(1 - 2 * v for v in s))
    return exact_weights(2, 2, weight)


def _exact_grand(beta_h, beta_mu):
    def weight(s):
        n = sum(star_parities(2, 2, s))
        return math.exp(beta_h * sum(1 - 2 * v for v in s) + beta_mu * n)
    return exact_weights(2, 2, weight)


def canonical_tv(n_steps, beta_h=0.5, seed=1):
    topo = build_lattice(2, 2)
    state = init_dimers(topo, 2, np.random.default_rng(seed))
    nmov = np.array([state.n_movable])
    hist = canonical_histogram(state.config.strings, state.positions, state.site_particle,
                               state.movable_list, state.movable_slot, nmov, topo.star,
                               topo.neighbors, topo.plaquettes, beta_h, n_steps, seed)
    return 0.5 * np.abs(hist / hist.sum() - _exact_canonical(beta_h)).sum()


def grand_tv(n_steps, beta_h=0.5, beta_mu=0.3, seed=1):
    topo = build_lattice(2, 2)
    cfg = GaugeConfig.vacuum(topo)
    hist = grand_histogram(cfg.strings, topo.star, topo.link_ends, topo.plaquettes,
                           beta_h, beta_mu, n_steps, seed)
    return 0.5 * np.abs(hist / hist.sum() - _exact_grand(beta_h, beta_mu)).sum()
