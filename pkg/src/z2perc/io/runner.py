"""Grid orchestration: one independent chain per grid point, merged in point order."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..analysis import (
    Ansatz, BinderCurve, autocorrelation, binder, collapse_fit, crossing_drift, crossing_estimate,
    crossing_points, mean_error,
)
from ..classical import RunParamsClassical, run_classical
from ..gauge import Basis, GaugeConfig
from ..lattice import build_lattice
from ..percolation import analyze as percolation_analyze
from ..qmc import QmcBasis, QmcParams, ed_solve, fm_from_products, run_qmc
from .manifest import ManifestError, RunManifest
from .results import _jsonable, read_jsonl, read_series_csv, write_jsonl, write_rows_csv, write_series_csv
from .snapshots import read_snapshots, write_snapshots

log = logging.getLogger("z2perc")

_CLASSICAL_KEYS = {f.name for f in dataclasses.fields(RunParamsClassical)} - {"seed", "keep_snapshots"}
_QMC_KEYS = {f.name for f in dataclasses.fields(QmcParams)} - {"seed", "keep_snapshots"}


class ChainError(RuntimeError):
    pass


def _check_keys(params: dict, allowed: set, extra=()):
    unknown = set(params) - allowed - set(extra)
    if unknown:
        raise ManifestError(f"unknown parameters: {sorted(unknown)}")


def classical_params(point: dict, seed: int, keep: bool) -> RunParamsClassical:
    _check_keys(point, _CLASSICAL_KEYS)
    try:
        return RunParamsClassical(**point, seed=seed, keep_snapshots=keep)
    except (TypeError, ValueError) as exc:
        raise ManifestError(str(exc)) from None


def qmc_params(point: dict, seed: int, keep: bool) -> QmcParams:
    _check_keys(point, _QMC_KEYS, extra=("T",))
    point = dict(point)
    if "T" in point:
        if "beta" in point:
            raise ManifestError("give either T or beta, not both")
        point["beta"] = 1.0 / point.pop("T")
    if "basis" in point:
        point["basis"] = QmcBasis[str(point["basis"]).upper()]
    try:
        return QmcParams(**point, seed=seed, keep_snapshots=keep)
    except (TypeError, ValueError, KeyError) as exc:
        raise ManifestError(str(exc)) from None


def validate(manifest: RunManifest, keep: bool = False) -> list:
    """Build run parameters for every grid point; raises :class:`ManifestError`."""
    build = {"classical": classical_params, "qmc": qmc_params}.get(manifest.module)
    if build is None:
        return manifest.points()
    return [build(p, manifest.seed_for(i), keep) for i, p in enumerate(manifest.points())]


def _execute(module: str, params):
    if module == "classical":
        s = run_classical(params)
    else:
        s = run_qmc(params)
    return s.columns, s.metadata, s.snapshots


def summarize(columns: dict, basis: str = "X") -> dict:
    """Means with autocorrelation-corrected errors, Binder ratio and, for tau^z runs, FM."""
    out = {}
    for k, v in columns.items():
        v = np.asarray(v, dtype=float)
        if v.size == 0 or np.all(np.isnan(v)):
            continue
        m, e = mean_error(v)
        out[f"{k}_mean"], out[f"{k}_err"] = m, e
    if "strength" in columns:
        b = binder(columns["strength"])
        out["binder"], out["binder_err"], out["binder_defined"] = b.value, b.error, b.defined
    if "loop_full" in columns:
        fm = fm_from_products(columns["loop_full"], columns["loop_half"])
        out["fm"], out["fm_err"], out["fm_reliable"] = fm.value, fm.error, fm.reliable
    return out


def run_grid(manifest: RunManifest, out_dir, workers: int = 1, snapshots: bool = False,
             slice_every: int = 1) -> Path:
    """Run every grid point and write series, summary and run records under ``out_dir``."""
    if slice_every < 1:
        raise ManifestError("--slice-every must be at least 1")
    params = validate(manifest, keep=snapshots)
    out = Path(out_dir)
    (out / "series").mkdir(parents=True, exist_ok=True)
    if snapshots:
        (out / "snapshots").mkdir(exist_ok=True)
    mhash = manifest.hash
    (out / "manifest.json").write_text(manifest.canonical() + "\n")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_execute, manifest.module, p) for p in params]
            results = []
            for i, f in enumerate(futures):
                try:
                    results.append(f.result())
                except Exception as exc:
                    raise ChainError(f"grid point {i} failed: {exc}") from exc
    else:
        results = []
        for i, p in enumerate(params):
            try:
                results.append(_execute(manifest.module, p))
            except Exception as exc:
                raise ChainError(f"grid point {i} failed: {exc}") from exc

    records, summary = [], []
    points = manifest.points()
    for i, (p, point, (cols, meta, snaps)) in enumerate(zip(params, points, results)):
        name = f"point_{i:04d}"
        write_series_csv(out / "series" / f"{name}.csv", cols, mhash, i, point)
        log.info("%s done in %.2fs", name, meta.get("wall_time", 0.0))
        basis = getattr(getattr(p, "basis", None), "name", "X")
        stats = summarize(cols, basis)
        rec = {"point": i, "params": point, "seed": p.seed, "series": f"series/{name}.csv",
               "acceptance": meta["acceptance"], "summary": stats}
        if snaps is not None:
            kept = snaps[::slice_every]
            D = getattr(p, "D", 2)
            write_snapshots(out / "snapshots" / f"{name}.z2snap", kept, D, p.L,
                            Basis.Z if basis == "Z" else Basis.X, manifest.digest)
            rec["snapshots"] = f"snapshots/{name}.z2snap"
        records.append(rec)
        summary.append({"point": i, **point, **stats})
    write_jsonl(out / "runs.jsonl", records, mhash)
    write_rows_csv(out / "summary.csv", summary, mhash)
    return out


def run_ed(manifest: RunManifest, out_dir) -> list[dict]:
    rows = []
    for i, point in enumerate(manifest.points()):
        point = dict(point)
        _check_keys(point, {"L", "beta", "T", "mu", "J", "h", "lam", "n_states", "D"})
        if point.pop("D", 2) != 2:
            raise ManifestError("exact diagonalization is implemented for D=2 only")
        if "T" in point:
            point["beta"] = 1.0 / point.pop("T")
        try:
            r = ed_solve(**point)
        except TypeError as exc:
            raise ManifestError(str(exc)) from None
        rows.append({"point": i, **point, **dataclasses.asdict(r)})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(out / "ed.csv", rows, manifest.hash)
    return rows


def percolate_files(paths, out_dir, manifest_hash: str = "") -> list[dict]:
    """One percolation report per snapshot of every input file."""
    rows = []
    for path in paths:
        header, strings = read_snapshots(path)
        if header.basis is not Basis.X:
            raise ManifestError(
                f"{path}: snapshots are in the tau^z basis; electric strings are only defined "
                "for tau^x snapshots, so percolation cannot be measured from this file")
        topo = build_lattice(header.D, header.L)
        for i, s in enumerate(strings):
            rep = percolation_analyze(GaugeConfig(topo, s))
            rows.append({"file": str(path), "index": i, "percolates": rep.percolates,
                         "wraps": "".join(str(int(w)) for w in rep.wraps),
                         "strength": rep.strength, "largest_cluster": rep.largest_cluster_links,
                         "total_strings": rep.total_strings})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(out / "percolation.csv", rows, manifest_hash)
        write_jsonl(out / "percolation.jsonl", rows, manifest_hash)
    return rows


def _runs_file(path) -> Path:
    p = Path(path)
    return p / "runs.jsonl" if p.is_dir() else p


def load_runs(inputs) -> list[dict]:
    """Run records of several output directories, each with its series loaded."""
    runs = []
    for item in inputs:
        f = _runs_file(item)
        if not f.exists():
            raise ManifestError(f"{item}: no runs.jsonl found")
        for rec in read_jsonl(f):
            rec["columns"] = read_series_csv(f.parent / rec["series"])
            rec["source"] = str(f)
            runs.append(rec)
    if not runs:
        raise ManifestError("no runs in the given inputs")
    return runs


def _sweep_variable(runs, x: str | None) -> str:
    if x is not None:
        return x
    keys = set.intersection(*(set(r["params"]) for r in runs)) - {"L"}
    varying = sorted(k for k in keys if len({repr(r["params"][k]) for r in runs}) > 1)
    if len(varying) != 1:
        raise ManifestError(f"cannot infer the swept parameter (candidates {varying}); pass --x")
    return varying[0]


def binder_curves(runs, x: str, observable: str = "binder") -> list[BinderCurve]:
    by_L = {}
    for r in runs:
        if "strength" not in r["columns"]:
            raise ManifestError("runs carry no percolation strength series")
        if observable == "binder":
            b = binder(r["columns"]["strength"])
            y, e = b.value, b.error
        else:
            y, e = mean_error(r["columns"][observable])
        by_L.setdefault(int(r["params"]["L"]), []).append((float(r["params"][x]), y, e))
    return [BinderCurve(L, *map(np.array, zip(*pts)), metadata={"x": x}) for L, pts in sorted(by_L.items())]


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def analyze_runs(inputs, task: str, x: str | None = None, out_dir=None, seed: int = 0,
                 options: dict | None = None) -> list[dict]:
    options = dict(options or {})
    runs = load_runs(inputs)
    provenance = {str(_runs_file(i)): _digest(_runs_file(i)) for i in inputs}
    reports = []
    if task == "autocorr":
        for r in runs:
            rep = {"point": r["point"], "params": r["params"], "source": r["source"]}
            for k, v in r["columns"].items():
                if k in ("manifest_hash", "point", "sample") or k in r["params"]:
                    continue
                v = np.asarray(v, dtype=float)
                if len(v) >= 32 and np.all(np.isfinite(v)):
                    ac = autocorrelation(v)
                    rep[k] = {"tau_int": ac.tau_int, "window": ac.window, "n_eff": ac.n_eff}
            reports.append(rep)
    elif task == "binder":
        xv = _sweep_variable(runs, x)
        for c in binder_curves(runs, xv):
            for xi, yi, ei in zip(c.x, c.y, c.err):
                reports.append({"L": c.L, xv: xi, "binder": yi, "binder_err": ei})
    elif task == "cross":
        xv = _sweep_variable(runs, x)
        curves = binder_curves(runs, xv)
        if len(curves) < 2:
            raise ManifestError("crossing analysis needs at least two system sizes")
        cr = crossing_points(curves, method=options.get("method", "linear"), seed=seed)
        rep = {"task": "cross", "x": xv,
               "crossings": [{"sizes": c.sizes, "x": c.x, "error": c.error, "monotone": c.monotone}
                             for c in cr]}
        if any(c.present for c in cr):
            rep["estimate"], rep["estimate_err"] = crossing_estimate(cr)
            rep["drift"] = crossing_drift(cr)
        reports.append(rep)
    elif task == "collapse":
        xv = _sweep_variable(runs, x)
        ub = binder_curves(runs, xv)
        if len(ub) < 3:
            raise ManifestError("collapse needs at least three system sizes")
        kw = {k: tuple(v) for k, v in options.items() if k in ("x_c_range", "nu_range", "beta_range")}
        fb = collapse_fit(ub, Ansatz.BINDER, seed=seed, **kw)
        fs = collapse_fit(binder_curves(runs, xv, "strength"), Ansatz.STRENGTH, seed=seed,
                          fixed={"x_c": fb.x_c, "nu": fb.nu}, **kw)
        for fit in (fb, fs):
            rec = dataclasses.asdict(fit)
            rec["ansatz"] = fit.ansatz.value
            reports.append({"task": "collapse", "x": xv, **rec})
    else:
        raise ManifestError(f"unknown analysis task {task!r}")
    for r in reports:
        r["inputs"] = provenance
    reports = [_jsonable(r) for r in reports]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        h = hashlib.sha256(repr(sorted(provenance.items())).encode()).hexdigest()
        write_jsonl(out / f"analysis_{task}.jsonl", reports, h)
    return reports


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
