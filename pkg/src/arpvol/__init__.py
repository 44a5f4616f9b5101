"""Robust estimation of large integrated volatility matrices from noisy, asynchronous, heavy-tailed ticks."""

from .evaluation import min_variance_portfolio, mspe, norms
from .poet import poet, poet_inverse, psd_project, scree
from .preavg import default_kernel, quad_panel
from .robust import TailIndices, estimate_tail_indices, estimate_volatility, psi, robust_estimate
from .simulate import SimConfig, SimTruth, simulate
from .sync import SyncGrid, TickSeries, load_ticks, previous_tick_sync, refresh_time_sync

__all__ = [
    "SimConfig", "SimTruth", "SyncGrid", "TailIndices", "TickSeries",
    "default_kernel", "estimate_tail_indices", "estimate_volatility", "load_ticks",
    "min_variance_portfolio", "mspe", "norms", "poet", "poet_inverse", "previous_tick_sync",
    "psd_project", "psi", "quad_panel", "refresh_time_sync", "robust_estimate", "scree", "simulate",
]
