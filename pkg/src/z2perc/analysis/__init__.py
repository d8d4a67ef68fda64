from .exact import (
    bernoulli_p, density_from_p, dual_bond_energy, dual_ising_map, tau_from_dual,
    temperature_from_p,
)
from .scaling import (
    Ansatz, BinderCurve, CollapseFit, Crossing, collapse_fit, collapse_quality,
    crossing_drift, crossing_estimate, crossing_points,
)
from .stats import Autocorrelation, BinderResult, autocorrelation, binder, jackknife, mean_error

__all__ = [
    "Ansatz", "Autocorrelation", "BinderCurve", "BinderResult", "CollapseFit", "Crossing",
    "autocorrelation", "bernoulli_p", "binder", "collapse_fit", "collapse_quality",
    "crossing_drift", "crossing_estimate", "crossing_points", "density_from_p",
    "dual_bond_energy", "dual_ising_map", "jackknife", "mean_error", "tau_from_dual",
    "temperature_from_p",
]
