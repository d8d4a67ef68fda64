"""Error analysis for correlated Monte Carlo series.

Integrated autocorrelation time convention::

    tau_int = 1/2 + sum_{t=1}^{W} rho(t)

so uncorrelated data has ``tau_int = 1/2`` and the variance of the mean is
``2 * tau_int * var / N``. The window ``W`` is the smallest lag with
``W >= c * tau_int(W)`` (automatic windowing, ``c = 5`` by default).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Autocorrelation:
    tau_int: float
    window: int
    n_eff: float
    bin_sizes: np.ndarray
    bin_errors: np.ndarray
    degenerate: bool = False


def autocorrelation_function(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x)
    y = x - x.mean()
    f = np.fft.rfft(y, n=2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    return acov / acov[0]


def binning_curve(x, min_bins: int = 16):
    """Naive error of the mean after blocking into bins of size 1, 2, 4, ..."""
    x = np.asarray(x, dtype=float)
    sizes, errors = [], []
    b = 1
    while len(x) // b >= min_bins:
        m = len(x) // b
        blocks = x[: m * b].reshape(m, b).mean(axis=1)
        sizes.append(b)
        errors.append(blocks.std(ddof=1) / np.sqrt(m))
        b *= 2
    return np.array(sizes), np.array(errors)


def autocorrelation(series, c: float = 5.0) -> Autocorrelation:
    x = np.asarray(series, dtype=float)
    if len(x) < 32:
        raise ValueError("need at least 32 samples")
    sizes, errors = binning_curve(x)
    if np.ptp(x) == 0:
        return Autocorrelation(0.0, 0, float(len(x)), sizes, errors, degenerate=True)
    rho = autocorrelation_function(x)
    tau = 0.5
    window = len(x) - 1
    for t in range(1, len(x)):
        tau += rho[t]
        if t >= c * tau:
            window = t
            break
    tau = max(tau, 0.5)
    return Autocorrelation(float(tau), window, len(x) / (2 * tau), sizes, errors)


def mean_error(series) -> tuple[float, float]:
    """Mean and its standard error corrected for autocorrelation."""
    x = np.asarray(series, dtype=float)
    if len(x) < 32:
        return float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else np.nan
    ac = autocorrelation(x)
    if ac.degenerate:
        return float(x[0]), 0.0
    return float(x.mean()), float(np.sqrt(2 * ac.tau_int * x.var(ddof=1) / len(x)))


def jackknife(func, *series, n_bins: int = 32) -> tuple[float, float]:
    """Binned jackknife estimate of ``func(mean(s1), mean(s2), ...)``."""
    arrays = [np.asarray(s, dtype=float) for s in series]
    n = len(arrays[0])
    n_bins = max(2, min(n_bins, n))
    b = n // n_bins
    binned = [a[: n_bins * b].reshape(n_bins, b).mean(axis=1) for a in arrays]
    totals = [bb.sum() for bb in binned]
    full = func(*[a.mean() for a in arrays])
    leave = np.array([
        func(*[(t - bb[i]) / (n_bins - 1) for t, bb in zip(totals, binned)])
        for i in range(n_bins)
    ])
    err = np.sqrt((n_bins - 1) / n_bins * np.sum((leave - leave.mean()) ** 2))
    return float(full), float(err)


@dataclass(frozen=True)
class BinderResult:
    value: float
    error: float
    defined: bool = True


def binder(strength, n_bins: int = 32) -> BinderResult:
    """Binder ratio <P^4>/<P^2>^2 with a binned jackknife error.

    An all-zero stream leaves the ratio undefined; it is reported as such.
    """
    p = np.asarray(strength, dtype=float)
    if np.count_nonzero(p) < 2:
        return BinderResult(float("nan"), float("nan"), defined=False)
    p2, p4 = p**2, p**4
    # jackknife blocks where every P vanishes are harmless: the full-sample <P^2> > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        value, error = jackknife(lambda a, b: b / a**2, p2, p4, n_bins=n_bins)
    if not np.isfinite(error):
        error = float("inf")
    return BinderResult(value, error)
