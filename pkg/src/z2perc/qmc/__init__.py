"""Worldline quantum Monte Carlo, exact diagonalization and the FM ratio."""

from .ed import EDResult, ed_solve, hamiltonian
from .fm import FMResult, fm_from_products, loop_products, measure_fm
from .worldline import (
    QmcBasis, QmcParams, WorldlineConfig, estimators, fm_contour, qmc_weight, run_qmc,
    sample_slice, update_global, update_loop_pair, update_loop_shift, update_pair_fourbody,
    update_pair_link, update_spin_segment, update_split_merge, update_timeshift, update_toggle,
    update_winding, winding_loops,
)

__all__ = [
    "EDResult", "ed_solve", "hamiltonian", "FMResult", "fm_from_products", "loop_products",
    "measure_fm", "QmcBasis", "QmcParams", "WorldlineConfig", "estimators", "fm_contour",
    "qmc_weight", "run_qmc", "sample_slice", "update_global", "update_loop_pair",
    "update_loop_shift", "update_pair_fourbody", "update_pair_link", "update_spin_segment",
    "update_split_merge", "update_timeshift", "update_toggle", "update_winding", "winding_loops",
]
