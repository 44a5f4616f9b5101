"""
Simulation and portfolio experiments at configurable scale.

Every replication draws its own seed from ``(base seed, replication index)``;
results are collected per replication and reduced in replication order, so a
run gives identical output for any ``n_jobs``.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from .evaluation import min_variance_portfolio, norms, realized_portfolio_risk
from .poet import poet, poet_inverse, psd_project, threshold_idiosyncratic, symmetric_eigen
from .robust import estimate_tail_indices, estimate_volatility
from .simulate import SimConfig, simulate
from .sync import previous_tick_sync, refresh_time_sync

log = logging.getLogger(__name__)

DEFAULT_VARPI_GRID = (0.0,) + tuple(np.logspace(-3, 0.5, 57)) + (np.inf,)


def rep_seed(base: int, rep: int) -> int:
    return int(np.random.SeedSequence([base, rep]).generate_state(1)[0])


def poet_estimate(gamma_hat, r, varpi_n=0.0, scheme="hard", sectors=None, psd_mode="spectral_shift", floor=0.0):
    """PSD-project the input, apply POET and PSD-project the result.

    ``floor`` adds ``floor * mean(diag)`` to the diagonal so the output is
    strictly positive definite (needed by the portfolio solver).
    """
    G = psd_project(gamma_hat, psd_mode)
    dec = poet(G, r, varpi_n, scheme, sectors)
    out = psd_project(dec.gamma_poet, psd_mode)
    if floor > 0:
        out = out + floor * np.mean(np.diag(out)) * np.eye(out.shape[0])
    return out


def oracle_poet(gamma_hat, truth, r, varpi_grid=DEFAULT_VARPI_GRID, psd_mode="frobenius_clip"):
    """Hard-threshold POET with the threshold level minimizing Frobenius error against ``truth``.

    Only usable in simulation. Returns ``(estimate, varpi_n)``.
    """
    G = psd_project(gamma_hat, psd_mode)
    dec = poet(G, r, 0.0, "hard")
    best, best_v, best_err = None, None, np.inf
    for v in varpi_grid:
        est = psd_project(dec.theta_hat + threshold_idiosyncratic(dec.sigma_tilde, v, "hard"), psd_mode)
        err = np.linalg.norm(est - truth, "fro")
        if err < best_err:
            best, best_v, best_err = est, float(v), err
    return best, best_v


def _safe_inverse_error(est, truth):
    try:
        return float(np.linalg.norm(poet_inverse(est) - np.linalg.inv(truth), 2))
    except ValueError:
        return float("nan")


def simulation_rep(cfg: SimConfig, methods=("arp", "urp", "prvm"), c: float = 0.2, r: int | None = None) -> dict:
    """One replication: simulate, synchronize, estimate, regularize and score every method."""
    truth = simulate(cfg)
    grid = refresh_time_sync(truth.ticks)
    tails = estimate_tail_indices(grid)
    iu = np.triu_indices(cfg.p)
    out = {
        "seed": cfg.seed,
        "n_sync": grid.n,
        "tail_mse": float(np.mean((tails.alpha_ij[iu] - truth.alpha_ij[iu]) ** 2)),
        "methods": {},
    }
    r = cfg.r if r is None else r
    for m in methods:
        est = estimate_volatility(grid, m, c=c, tails=tails if m == "arp" else None)
        reg, varpi = oracle_poet(est.gamma_hat, truth.gamma_true, r)
        rep = norms(reg, truth.gamma_true).as_dict()
        rep["inverse_spectral"] = _safe_inverse_error(reg, truth.gamma_true)
        rep["varpi_n"] = varpi
        out["methods"][m] = rep
    return out


def _run(args):
    cfg, methods, c = args
    return simulation_rep(cfg, methods, c)


def experiment_simulation(cfg: SimConfig, methods=("arp", "urp", "prvm"), reps: int = 100, c: float = 0.2, n_jobs: int = 1) -> list:
    """Per-replication results for ``reps`` independent simulated days."""
    jobs = [(dataclasses.replace(cfg, seed=rep_seed(cfg.seed, k)), tuple(methods), c) for k in range(reps)]
    if n_jobs > 1 and reps > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            return list(pool.map(_run, jobs))
    return [_run(j) for j in jobs]


def summarize_simulation(results: Sequence[dict], metrics=("frobenius", "relative_frobenius", "spectral", "max", "inverse_spectral")) -> list:
    """Rows ``(method, metric, mean, median)`` plus the tail-index MSE."""
    rows = []
    if not results:
        return rows
    for m in results[0]["methods"]:
        for key in metrics:
            vals = np.array([r["methods"][m][key] for r in results], dtype=float)
            vals = vals[np.isfinite(vals)]
            rows.append({"method": m, "metric": key, "mean": float(vals.mean()) if vals.size else float("nan"),
                         "median": float(np.median(vals)) if vals.size else float("nan")})
    tm = np.array([r["tail_mse"] for r in results])
    rows.append({"method": "tail_index", "metric": "mse", "mean": float(tm.mean()), "median": float(np.median(tm))})
    return rows


def tail_index_mse(cfg: SimConfig, reps: int) -> float:
    """Mean over replications of the MSE of estimated pairwise tail indices (upper triangle)."""
    vals = []
    iu = np.triu_indices(cfg.p)
    for k in range(reps):
        truth = simulate(dataclasses.replace(cfg, seed=rep_seed(cfg.seed, k)))
        tails = estimate_tail_indices(refresh_time_sync(truth.ticks))
        vals.append(np.mean((tails.alpha_ij[iu] - truth.alpha_ij[iu]) ** 2))
    return float(np.mean(vals))


def tail_index_table(p: int = 50, n_alls=(1000, 2000, 4000), modes=("hetero", "homo"), reps: int = 100, seed: int = 0) -> list:
    return [
        {"tail_mode": mode, "n_all": n, "mse": tail_index_mse(SimConfig(p=p, n_all=n, tail_mode=mode, seed=seed), reps)}
        for mode in modes
        for n in n_alls
    ]


def rate_config(n_all: int, seed: int = 0, **overrides) -> SimConfig:
    """Single asset, Gaussian tails, no jumps, fully observed."""
    kw = dict(p=1, r=0, n_all=n_all, tail_mode="gauss", seed=seed, jump_intensity=0.0, w_range=(1.0, 1.0))
    kw.update(overrides)
    return SimConfig(**kw)


def rate_errors(method: str, n_grid: Iterable[int], reps: int, seed: int = 0, c: float = 0.2, **overrides) -> np.ndarray:
    """Errors ``gamma_hat_11 - gamma_11``, shape ``(len(n_grid), reps)``."""
    n_grid = list(n_grid)
    err = np.empty((len(n_grid), reps))
    for a, n in enumerate(n_grid):
        for k in range(reps):
            truth = simulate(rate_config(n, rep_seed(seed, k), **overrides))
            grid = refresh_time_sync(truth.ticks)
            est = estimate_volatility(grid, method, c=c)
            err[a, k] = est.gamma_hat[0, 0] - truth.gamma_true[0, 0]
    return err


def fit_slope(n_grid, rmse) -> float:
    return float(np.polyfit(np.log(np.asarray(n_grid, float)), np.log(np.asarray(rmse, float)), 1)[0])


def rate_slope(method: str = "arp", n_grid=(500, 1000, 2000, 4000, 8000), reps: int = 200, seed: int = 0, c: float = 0.2, **overrides) -> float:
    """Least-squares slope of log RMSE against log n."""
    err = rate_errors(method, n_grid, reps, seed, c, **overrides)
    return fit_slope(n_grid, np.sqrt(np.mean(err**2, axis=1)))


def bootstrap_slope_width(n_grid, err: np.ndarray, n_boot: int = 200, seed: int = 0) -> float:
    """Width of the central 90% bootstrap interval of the fitted slope (replications resampled)."""
    rng = np.random.default_rng(seed)
    reps = err.shape[1]
    slopes = []
    for _ in range(n_boot):
        idx = rng.integers(0, reps, reps)
        slopes.append(fit_slope(n_grid, np.sqrt(np.mean(err[:, idx] ** 2, axis=1))))
    lo, hi = np.quantile(slopes, [0.05, 0.95])
    return float(hi - lo)


def experiment_portfolio(matrices: Sequence, returns: Sequence, c0_grid=(1, 2, 3, 4, 5, 6)) -> list:
    """Out-of-sample risk of minimum-variance portfolios.

    Weights built from ``matrices[d]`` are held over day ``d + 1`` and scored by
    the square root of the realized variance of that day's intraday portfolio
    returns (``returns[d + 1]``, shape ``(intervals, p)``). Returns one row per
    ``(day, c0)``.
    """
    if len(matrices) != len(returns):
        raise ValueError(f"alignment mismatch: {len(matrices)} matrices vs {len(returns)} return days")
    rows = []
    for d in range(len(matrices) - 1):
        G = np.asarray(matrices[d], dtype=float)
        R = np.asarray(returns[d + 1], dtype=float)
        if R.ndim != 2 or R.shape[1] != G.shape[0]:
            raise ValueError(f"day {d + 1}: returns shape {R.shape} does not match p={G.shape[0]}")
        for c0 in c0_grid:
            sol = min_variance_portfolio(G, float(c0))
            rows.append({"day": d + 1, "c0": float(c0), "risk": realized_portfolio_risk(sol.weights, R),
                         "gross_exposure": sol.gross_exposure})
    return rows


def average_risk(rows: Sequence[dict], period=None) -> dict:
    """Mean risk per c0, optionally restricted to days in ``[start, stop)``."""
    out: dict[float, list] = {}
    for row in rows:
        if period is not None and not (period[0] <= row["day"] < period[1]):
            continue
        out.setdefault(row["c0"], []).append(row["risk"])
    return {c0: float(np.mean(v)) for c0, v in out.items()}


def intraday_returns(ticks, intervals: int = 39) -> np.ndarray:
    """Previous-tick log-returns on an equispaced intraday grid, shape ``(intervals', p)``."""
    grid = previous_tick_sync(ticks, np.linspace(0.0, 1.0, intervals + 1))
    return np.diff(grid.prices, axis=1).T


def contiguous_sectors(p: int, size: int) -> np.ndarray:
    return np.arange(p) // size


def simulated_portfolio_panel(cfg: SimConfig, days: int, methods=("arp", "prvm"), c: float = 0.2, sector_size: int = 10, r: int | None = None):
    """Daily POET matrices per method and next-day intraday returns from consecutive simulated days.

    Factor loadings are shared across days (``loadings_seed``) so the
    cross-sectional structure persists; everything else is redrawn daily.
    """
    r = cfg.r if r is None else r
    lseed = cfg.seed if cfg.loadings_seed is None else cfg.loadings_seed
    sectors = contiguous_sectors(cfg.p, sector_size)
    mats = {m: [] for m in methods}
    rets = []
    for d in range(days):
        truth = simulate(dataclasses.replace(cfg, seed=rep_seed(cfg.seed, d), loadings_seed=lseed))
        grid = refresh_time_sync(truth.ticks)
        tails = estimate_tail_indices(grid)
        for m in methods:
            est = estimate_volatility(grid, m, c=c, tails=tails if m == "arp" else None)
            mats[m].append(poet_estimate(est.gamma_hat, r, scheme="sector", sectors=sectors, floor=1e-6))
        rets.append(intraday_returns(truth.ticks))
    return mats, rets
