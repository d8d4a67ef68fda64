"""Finite-size scaling: Binder crossings and data collapse.

The collapse quality is the weighted leave-one-size-out residual of every
point against a local straight-line master curve built from the bracketing
points of all *other* sizes (Houdayer & Hartmann, PRB 70, 014418). With
correctly estimated errors it behaves like a reduced chi-squared.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize


@dataclass
class BinderCurve:
    L: int
    x: np.ndarray
    y: np.ndarray
    err: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.err = np.asarray(self.err, dtype=float)
        order = np.argsort(self.x)
        self.x, self.y, self.err = self.x[order], self.y[order], self.err[order]
        keep = np.isfinite(self.y) & np.isfinite(self.err)
        self.x, self.y, self.err = self.x[keep], self.y[keep], self.err[keep]


@dataclass(frozen=True)
class Crossing:
    sizes: tuple[int, int]
    x: float | None
    error: float | None
    monotone: bool = True

    @property
    def present(self) -> bool:
        return self.x is not None


def _interpolator(curve: BinderCurve, y, method: str):
    if method == "cubic" and len(curve.x) >= 4:
        return CubicSpline(curve.x, y)
    return lambda t: np.interp(t, curve.x, y)


def _crossing(a: BinderCurve, b: BinderCurve, ya, yb, method: str):
    if len(a.x) == 0 or len(b.x) == 0:
        return None
    lo, hi = max(a.x[0], b.x[0]), min(a.x[-1], b.x[-1])
    if hi <= lo:
        return None
    grid = np.unique(np.concatenate([a.x, b.x, [lo, hi]]))
    grid = grid[(grid >= lo) & (grid <= hi)]
    if method == "cubic":
        grid = np.linspace(lo, hi, 20 * len(grid))
    d = _interpolator(a, ya, method)(grid) - _interpolator(b, yb, method)(grid)
    sign = np.sign(d)
    idx = np.flatnonzero(sign[:-1] * sign[1:] <= 0)
    if len(idx) == 0:
        return None
    # several sign changes: take the one nearest the middle of the common window
    mid = 0.5 * (lo + hi)
    cands = []
    for i in idx:
        if d[i] == d[i + 1]:
            cands.append(grid[i])
        else:
            cands.append(grid[i] - d[i] * (grid[i + 1] - grid[i]) / (d[i + 1] - d[i]))
    return float(min(cands, key=lambda t: abs(t - mid)))


def crossing_points(curves, method: str = "linear", n_boot: int = 1000, seed: int = 0) -> list[Crossing]:
    """Pairwise crossings of Binder curves with bootstrap errors."""
    if len(curves) < 2:
        raise ValueError("need at least two curves")
    rng = np.random.default_rng(seed)
    out = []
    for a, b in itertools.combinations(sorted(curves, key=lambda c: c.L), 2):
        x0 = _crossing(a, b, a.y, b.y, method)
        if x0 is None:
            out.append(Crossing((a.L, b.L), None, None))
            continue
        boots = []
        for _ in range(n_boot):
            xb = _crossing(a, b, a.y + rng.normal(0, 1, a.y.shape) * a.err,
                           b.y + rng.normal(0, 1, b.y.shape) * b.err, method)
            if xb is not None:
                boots.append(xb)
        err = float(np.std(boots)) if len(boots) > 1 else float("nan")
        lo, hi = max(a.x[0], b.x[0]), min(a.x[-1], b.x[-1])
        monotone = all(
            np.all(np.diff(c.y[(c.x >= lo) & (c.x <= hi)]) <= 0)
            or np.all(np.diff(c.y[(c.x >= lo) & (c.x <= hi)]) >= 0)
            for c in (a, b)
        )
        out.append(Crossing((a.L, b.L), x0, err, monotone))
    return out


def crossing_estimate(crossings: list[Crossing]) -> tuple[float, float]:
    """Error-weighted mean of the present crossings."""
    xs = np.array([c.x for c in crossings if c.present])
    es = np.array([c.error for c in crossings if c.present])
    if len(xs) == 0:
        raise ValueError("no crossings present")
    es = np.where(np.isfinite(es) & (es > 0), es, np.nanmax(es[np.isfinite(es)]) if np.isfinite(es).any() else 1.0)
    w = 1 / es**2
    mean = float(np.sum(w * xs) / np.sum(w))
    # spread between pairs is a drift as much as noise; keep the larger of both
    err = max(float(1 / np.sqrt(np.sum(w))), float(np.std(xs)))
    return mean, err


def crossing_drift(crossings: list[Crossing]) -> dict:
    """Linear fit of crossing position against the inverse mean pair size."""
    pts = [(2.0 / (c.sizes[0] + c.sizes[1]), c.x) for c in crossings if c.present]
    if len(pts) < 2:
        return {"slope": float("nan"), "intercept": float("nan")}
    inv, xs = map(np.array, zip(*pts))
    if np.ptp(inv) == 0:
        return {"slope": 0.0, "intercept": float(np.mean(xs))}
    slope, intercept = np.polyfit(inv, xs, 1)
    return {"slope": float(slope), "intercept": float(intercept)}


class Ansatz(enum.Enum):
    BINDER = "binder"      # U(x, L) = f(L^{1/nu} (x - x_c))
    STRENGTH = "strength"  # P(x, L) = L^{-beta_P/nu} f(L^{1/nu} (x - x_c))


@dataclass(frozen=True)
class CollapseFit:
    x_c: float
    nu: float
    beta_p: float
    errors: dict
    chi2_red: float
    window: tuple[float, float]
    n_points: int
    ansatz: Ansatz
    converged: bool = True


def scaled(curves, x_c, nu, beta_p):
    us, vs, dvs = [], [], []
    for c in curves:
        fac = c.L ** (beta_p / nu)
        us.append(c.L ** (1 / nu) * (c.x - x_c))
        vs.append(c.y * fac)
        dvs.append(c.err * fac)
    return us, vs, dvs


def collapse_quality(curves, x_c: float, nu: float, beta_p: float = 0.0) -> tuple[float, int]:
    """Reduced chi-squared of the collapse and the number of points that entered."""
    if nu <= 0:
        return float("inf"), 0
    us, vs, dvs = scaled(curves, x_c, nu, beta_p)
    # exact points (zero error) would dominate every fit; floor errors relative to the data scale
    scale = max((float(np.max(np.abs(v))) for v in vs if len(v)), default=1.0) or 1.0
    dvs = [np.maximum(dv, 1e-6 * scale) for dv in dvs]
    total, n = 0.0, 0
    for i in range(len(curves)):
        for u, v, dv in zip(us[i], vs[i], dvs[i]):
            px, py, pw = [], [], []
            for k in range(len(curves)):
                if k == i:
                    continue
                uk = us[k]
                j = np.searchsorted(uk, u)
                if j == 0 or j == len(uk):
                    continue
                for m in (j - 1, j):
                    px.append(uk[m])
                    py.append(vs[k][m])
                    pw.append(1.0 / dvs[k][m] ** 2)
            if not px:
                continue
            px, py, pw = map(np.asarray, (px, py, pw))
            # weighted straight line through the bracketing points
            K = pw.sum()
            Kx = (pw * px).sum()
            Ky = (pw * py).sum()
            Kxx = (pw * px * px).sum()
            Kxy = (pw * px * py).sum()
            delta = K * Kxx - Kx**2
            if delta <= 0:
                continue
            Y = (Kxx * Ky - Kx * Kxy + u * (K * Kxy - Kx * Ky)) / delta
            dY2 = (Kxx - 2 * u * Kx + u * u * K) / delta
            total += (v - Y) ** 2 / (dv**2 + max(dY2, 0.0))
            n += 1
    if n == 0:
        return float("inf"), 0
    return total / n, n


def collapse_fit(
    curves,
    ansatz: Ansatz = Ansatz.BINDER,
    x_c_range: tuple[float, float] | None = None,
    nu_range: tuple[float, float] = (0.3, 2.0),
    beta_range: tuple[float, float] = (0.0, 1.5),
    fixed: dict | None = None,
    grid: int = 9,
    n_boot: int = 20,
    seed: int = 0,
    min_overlap: float = 0.5,
) -> CollapseFit:
    """Fit (x_c, nu, beta_P) by minimising the collapse quality.

    A coarse grid over the ranges seeds a Nelder-Mead refinement confined to
    the ranges. Parameter errors are the spread of refits on Gaussian
    resamples of the data.
    Entries of ``fixed`` pin parameters by name. Candidates whose scaled
    curves overlap in fewer than ``min_overlap`` of all points are rejected,
    since a collapse that barely overlaps scores a trivially small chi^2.
    """
    curves = sorted(curves, key=lambda c: c.L)
    if len({c.L for c in curves}) < 3:
        raise ValueError("collapse needs at least three system sizes")
    fixed = dict(fixed or {})
    if ansatz is Ansatz.BINDER:
        fixed["beta_p"] = 0.0
    names = [n for n in ("x_c", "nu", "beta_p") if n not in fixed]
    xs = np.concatenate([c.x for c in curves])
    n_min = max(3, int(np.ceil(min_overlap * sum(len(c.x) for c in curves))))
    if x_c_range is None:
        x_c_range = (float(xs.min()), float(xs.max()))
    ranges = {"x_c": x_c_range, "nu": nu_range, "beta_p": beta_range}
    bounds = [ranges[n] for n in names]

    def unpack(theta):
        vals = dict(fixed)
        vals.update(zip(names, theta))
        return vals["x_c"], vals["nu"], vals["beta_p"]

    def fit(data, starts):
        def objective(theta):
            # the search ranges bound the fit; outside them the quality can degenerate
            if any(not lo <= t <= hi for t, (lo, hi) in zip(theta, bounds)):
                return 1e12
            s, n = collapse_quality(data, *unpack(theta))
            return s if n >= n_min else 1e12
        best = None
        for start in starts:
            res = minimize(objective, start, method="Nelder-Mead",
                           options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 4000})
            if best is None or res.fun < best.fun:
                best = res
        return best

    axes = [np.linspace(*ranges[n], grid) for n in names]
    coarse = []
    for theta in itertools.product(*axes):
        s, n = collapse_quality(curves, *unpack(theta))
        if n >= n_min:
            coarse.append((s, theta))
    if not coarse:
        raise ValueError("data cannot be collapsed: no overlapping points")
    coarse.sort(key=lambda t: t[0])
    best = fit(curves, [np.array(t) for _, t in coarse[:3]])
    x_c, nu, beta_p = unpack(best.x)
    chi2, n_pts = collapse_quality(curves, x_c, nu, beta_p)

    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_boot):
        noisy = [BinderCurve(c.L, c.x, c.y + rng.normal(0, 1, c.y.shape) * c.err, c.err)
                 for c in curves]
        samples.append(fit(noisy, [best.x]).x)
    errors = {n: 0.0 for n in ("x_c", "nu", "beta_p")}
    if n_boot > 1:
        spread = np.std(np.array(samples), axis=0, ddof=1)
        errors.update(zip(names, map(float, spread)))
    return CollapseFit(
        x_c=float(x_c), nu=float(nu), beta_p=float(beta_p), errors=errors,
        chi2_red=float(chi2), window=(float(xs.min()), float(xs.max())),
        n_points=n_pts, ansatz=ansatz, converged=bool(best.success),
    )
