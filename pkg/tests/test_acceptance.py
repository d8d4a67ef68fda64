"""Acceptance criteria, one test each.

Criteria 1, 5, 6, 7 and 10 run by default. The hour-scale ones (2, 3, 4, 9)
need ``Z2_HEAVY=1`` and the quantum critical point (8) needs
``Z2_OVERNIGHT=1``. Every test records a PASS/FAIL/SKIP line that pytest
prints in its terminal summary.
"""

import math
import os

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import covering_wraps
from samplers import canonical_tv, grand_tv
from z2perc.analysis import (
    Ansatz, BinderCurve, bernoulli_p, binder, collapse_fit, crossing_estimate, crossing_points,
    density_from_p, mean_error,
)
from z2perc.classical import GRAND, RunParamsClassical, run_classical
from z2perc.gauge import GaugeConfig
from z2perc.io import RunManifest, decode, encode, read_snapshots
from z2perc.io.runner import run_grid
from z2perc.lattice import build_lattice
from z2perc.percolation import detect_wrapping
from z2perc.qmc import QmcBasis, QmcParams, ed_solve, fm_from_products, run_qmc

HEAVY = os.environ.get("Z2_HEAVY") == "1"
OVERNIGHT = os.environ.get("Z2_OVERNIGHT") == "1"


def _report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line, flush=True)
    assert ok, line


def _gate(n, enabled, flag):
    if not enabled:
        ACCEPTANCE_LINES[n] = f"criterion {n:2d}: SKIP  (set {flag}=1)"
        pytest.skip(f"set {flag}=1")


def _grid_curves(make, xs, sizes, column, binder_curve):
    """Binder (or mean) curves of ``column`` over ``xs`` for every size."""
    curves = []
    for L in sizes:
        ys, es = [], []
        for i, x in enumerate(xs):
            s = make(L, float(x), 1000 * L + i)
            if binder_curve:
                b = binder(s[column])
                ys.append(b.value)
                es.append(b.error)
            else:
                m, e = mean_error(s[column].astype(float))
                ys.append(m)
                es.append(e)
        curves.append(BinderCurve(L, xs, ys, es))
    return curves


def test_criterion_01_bernoulli_limit():
    L = 32
    topo = build_lattice(2, L)
    worst = 0.0
    bad = []
    for i, T in enumerate((0.5, 1.0, 2.0, 4.0, 8.0)):
        s = run_classical(RunParamsClassical(D=2, L=L, T_over_h=T, ensemble=GRAND, mu=0.0,
                                             n_samples=3000, seed=10 + i))
        p = bernoulli_p(T)
        mp, ep = mean_error(s["total_strings"] / topo.link_count)
        md, ed = mean_error(s["matter_density"])
        for name, m, e, ref in (("p", mp, ep, p), ("density", md, ed, density_from_p(p, 4))):
            z = abs(m - ref) / e
            worst = max(worst, z)
            if z > 3:
                bad.append(f"T/h={T} {name}={m:.5f}+-{e:.5f} vs {ref:.5f}")
    _report(1, not bad, f"max |z| = {worst:.2f} over 5 temperatures " + "; ".join(bad))


@pytest.mark.heavy
def test_criterion_02_classical_2d_transition():
    _gate(2, HEAVY, "Z2_HEAVY")
    Ts = np.round(np.arange(2.0, 2.61, 0.05), 3)

    def make(L, T, seed):
        return run_classical(RunParamsClassical(D=2, L=L, T_over_h=T, N=0, n_samples=100_000,
                                                seed=seed))

    sizes = (16, 24, 32)
    runs = {}

    def cached(L, T, seed):
        if (L, T) not in runs:
            runs[L, T] = make(L, T, seed)
        return runs[L, T]

    ub = _grid_curves(cached, Ts, sizes, "strength", True)
    sc = _grid_curves(cached, Ts, sizes, "strength", False)
    tc, tc_err = crossing_estimate(crossing_points(ub))
    fb = collapse_fit(ub, Ansatz.BINDER)
    fs = collapse_fit(sc, Ansatz.STRENGTH, fixed={"x_c": fb.x_c, "nu": fb.nu})
    ok = abs(tc - 2.27) <= 0.07 and 0.8 <= fb.nu <= 1.3 and 0.35 <= fs.beta_p <= 0.85
    _report(2, ok, f"T_c/h = {tc:.3f}+-{tc_err:.3f}, nu = {fb.nu:.3f}+-{fb.errors['nu']:.3f}, "
                   f"beta_P = {fs.beta_p:.3f}+-{fs.errors['beta_p']:.3f}")


@pytest.mark.heavy
def test_criterion_03_finite_density_decreases_with_L():
    _gate(3, HEAVY, "Z2_HEAVY")
    Ts = (1.0, 2.0, 4.0, 8.0, 16.0)
    sizes = (10, 20, 30)
    table = {}
    for L in sizes:
        N = 2 * round(0.25 * L * L)
        for i, T in enumerate(Ts):
            s = run_classical(RunParamsClassical(D=2, L=L, T_over_h=T, N=N, n_samples=4000,
                                                 seed=100 * L + i))
            table[L, T] = mean_error(s["percolates"].astype(float))
    bad = []
    for T in Ts:
        for a, b in zip(sizes, sizes[1:]):
            (ma, ea), (mb, eb) = table[a, T], table[b, T]
            if mb > ma + 3 * math.hypot(ea, eb):
                bad.append(f"T/h={T}: Pi(L={b})={mb:.3f} > Pi(L={a})={ma:.3f}")
    rows = ", ".join(f"T/h={T}: " + "/".join(f"{table[L, T][0]:.3f}" for L in sizes) for T in Ts)
    _report(3, not bad, (rows + " " + "; ".join(bad)).strip())


@pytest.mark.heavy
def test_criterion_04_cubic_lattice():
    _gate(4, HEAVY, "Z2_HEAVY")
    Ts = np.round(np.linspace(1.65, 1.95, 7), 3)

    def make(L, T, seed):
        return run_classical(RunParamsClassical(D=3, L=L, T_over_h=T, ensemble=GRAND,
                                                n_samples=20_000, seed=seed))

    curves = _grid_curves(make, Ts, (8, 10, 12), "percolates", False)
    tc, tc_err = crossing_estimate(crossing_points(curves))
    pc = bernoulli_p(tc)
    L = 10
    s = run_classical(RunParamsClassical(D=3, L=L, T_over_h=8.0, N=2 * round(0.15 * L**3),
                                         n_samples=1000, seed=4))
    pi_high = s.mean("percolates")
    ok = abs(pc - 0.247) <= 0.01 and pi_high >= 0.95
    _report(4, ok, f"T_c/h = {tc:.4f}+-{tc_err:.4f} -> p_c = {pc:.4f}; "
                   f"Pi(d=0.3, L=10, T/h=8) = {pi_high:.3f}")


def test_criterion_05_sampler_oracles():
    tv_c = canonical_tv(10_000_000)
    tv_g = grand_tv(10_000_000)
    _report(5, tv_c < 0.01 and tv_g < 0.01,
            f"TV canonical = {tv_c:.4f}, TV grand-canonical = {tv_g:.4f} (1e7 steps each)")


def test_criterion_06_detector_vs_covering_oracle():
    rng = np.random.default_rng(6)
    shapes = ((2, 3), (2, 4), (3, 3))
    counts = (34_000, 33_000, 33_000)
    mismatches = 0
    for shape, n in zip(shapes, counts):
        topo = build_lattice(*shape)
        for _ in range(n):
            q = rng.random()
            strings = (rng.random(topo.link_count) < q).astype(np.uint8)
            cfg = GaugeConfig(topo, strings)
            mine = [detect_wrapping(cfg, d) for d in range(topo.dimension)]
            if mine != covering_wraps(*shape, strings):
                mismatches += 1
    _report(6, mismatches == 0, f"{mismatches} mismatches over {sum(counts)} random configurations")


def test_criterion_07_qmc_matches_ed():
    grid = (0.0, 0.15, 0.3)
    bad, worst, n = [], 0.0, 0
    for basis in (QmcBasis.X, QmcBasis.Z):
        for beta in (2.0, 4.0):
            for h in grid:
                for lam in grid:
                    ref = ed_solve(2, beta, h=h, lam=lam)
                    s = run_qmc(QmcParams(L=2, h=h, lam=lam, beta=beta, basis=basis,
                                          n_samples=8000, seed=n))
                    n += 1
                    for key in ("energy", "tau_x"):
                        m, e = mean_error(s[key])
                        dev = abs(m - getattr(ref, key))
                        # zero-variance estimators (exact zeros) get a 1e-6 absolute floor
                        if dev > 3 * e + 1e-6:
                            bad.append(f"{basis.name} beta={beta} h={h} lam={lam} {key}: "
                                       f"{m:.5f}+-{e:.5f} vs {getattr(ref, key):.5f}")
                        if e > 0:
                            worst = max(worst, dev / e)
    _report(7, not bad, f"{n} points, max |z| = {worst:.2f} " + "; ".join(bad))


@pytest.mark.overnight
def test_criterion_08_quantum_critical_point():
    _gate(8, OVERNIGHT, "Z2_OVERNIGHT")
    hs = np.round(np.arange(0.26, 0.421, 0.02), 3)

    def make(L, h, seed):
        return run_qmc(QmcParams(L=L, h=h, lam=0.0, beta=float(L), basis=QmcBasis.X,
                                 n_samples=6000, thermalization=500, seed=seed))

    ub = _grid_curves(make, hs, (8, 12, 16), "strength", True)
    hc, hc_err = crossing_estimate(crossing_points(ub))
    fb = collapse_fit(ub, Ansatz.BINDER)
    ok = 0.30 <= hc <= 0.37 and 0.65 - 0.27 <= fb.nu <= 0.65 + 0.27
    _report(8, ok, f"h_c = {hc:.4f}+-{hc_err:.4f}, nu = {fb.nu:.3f}+-{fb.errors['nu']:.3f}")


@pytest.mark.heavy
def test_criterion_09_fm_order_parameter():
    _gate(9, HEAVY, "Z2_HEAVY")
    L = 16
    fm = {}
    for lam in (0.1, 0.5):
        s = run_qmc(QmcParams(L=L, h=0.2, lam=lam, beta=float(L), basis=QmcBasis.Z,
                              n_samples=2000, thermalization=500, seed=9))
        fm[lam] = fm_from_products(s["loop_full"], s["loop_half"])
    a, b = fm[0.1], fm[0.5]
    sigma = math.hypot(a.error, b.error)
    _report(9, a.value - b.value > 3 * sigma,
            f"FM(lam=0.1) = {a.value:.3f}+-{a.error:.3f}, FM(lam=0.5) = {b.value:.3f}+-{b.error:.3f}, "
            f"difference = {(a.value - b.value) / sigma:.1f} sigma")


def test_criterion_10_determinism_and_format(tmp_path):
    manifests = [
        {"experiment": "ac10-classical", "module": "classical",
         "grid": {"L": [4, 8], "T_over_h": [1.0, 3.0]}, "fixed": {"D": 2, "N": 2},
         "schedule": {"n_samples": 50}, "seed": 11},
        {"experiment": "ac10-qmc", "module": "qmc", "grid": {"lam": [0.1, 0.3]},
         "fixed": {"L": 4, "h": 0.2, "basis": "Z"},
         "schedule": {"n_samples": 30, "thermalization": 20}, "seed": 12},
    ]

    def tree(d):
        return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}

    same = True
    roundtrip = True
    for k, spec in enumerate(manifests):
        m = RunManifest.from_dict(spec)
        a, b = tmp_path / f"a{k}", tmp_path / f"b{k}"
        run_grid(m, a, snapshots=True)
        run_grid(m, b, snapshots=True)
        same &= tree(a) == tree(b) and len(tree(a)) > 0
        for snap in sorted((a / "snapshots").glob("*.z2snap")):
            blob = snap.read_bytes()
            head, data = read_snapshots(snap)
            roundtrip &= encode(data, head.D, head.L, head.basis, head.manifest_hash) == blob
            roundtrip &= np.array_equal(decode(blob)[1], data)
    _report(10, same and roundtrip,
            f"byte-identical reruns: {same}, snapshot round trip byte-identical: {roundtrip}")
