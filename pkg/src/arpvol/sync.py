"""
Tick ingestion and synchronization of asynchronous observations.

A synchronized grid holds the sampling times ``tau[0] < ... < tau[n]`` and,
for every asset, one selected observation per column. Column ``k >= 1`` is an
observation inside ``(tau[k-1], tau[k]]``; column 0 is an anchor (the last
observation at or before ``tau[0]``) and is not used by the estimators.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TickSeries:
    """Irregular observations of one asset's log-price on [0, 1]."""

    asset_id: int
    times: np.ndarray
    log_prices: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        prices = np.asarray(self.log_prices, dtype=float)
        if times.ndim != 1 or times.shape != prices.shape:
            raise ValueError(f"asset {self.asset_id}: times and log_prices must be 1-d of equal length")
        if times.size < 2:
            raise ValueError(f"asset {self.asset_id}: at least 2 observations required, got {times.size}")
        if np.any(np.diff(times) <= 0):
            bad = times[1:][np.diff(times) <= 0][0]
            raise ValueError(f"asset {self.asset_id}: times not strictly increasing at t={bad!r}")
        if times[0] < 0.0 or times[-1] > 1.0:
            raise ValueError(f"asset {self.asset_id}: times must lie in [0, 1]")
        if not np.all(np.isfinite(prices)):
            raise ValueError(f"asset {self.asset_id}: non-finite log-price")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "log_prices", prices)

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class SyncGrid:
    """Synchronized sampling times plus the per-asset selected observations.

    Attributes
    ----------
    tau : ndarray, shape (n + 1,)
        Grid times, strictly increasing.
    times : ndarray, shape (p, n + 1)
        Selected observation time of each asset in each column.
    prices : ndarray, shape (p, n + 1)
        Log-price at the selected observation.
    asset_ids : tuple of int
    """

    tau: np.ndarray
    times: np.ndarray
    prices: np.ndarray
    asset_ids: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.tau.size - 1

    @property
    def p(self) -> int:
        return self.times.shape[0]

    def returns(self) -> np.ndarray:
        """Log-returns between consecutive selected observations, columns 1..n.

        Shape ``(p, n - 1)``; column ``k - 1`` holds ``Y(tau_{i,k+1}) - Y(tau_{i,k})``.
        """
        return np.diff(self.prices[:, 1:], axis=1)

    def check(self) -> None:
        """Raise if the grid violates the sampling-time conditions."""
        if np.any(np.diff(self.tau) <= 0):
            raise ValueError("tau not strictly increasing")
        if self.n >= 1:
            lo = self.tau[:-1]
            hi = self.tau[1:]
            sel = self.times[:, 1:]
            if np.any(sel <= lo) or np.any(sel > hi):
                raise ValueError("selected observation outside (tau[k-1], tau[k]]")
        if np.any(self.times[:, 0] > self.tau[0]):
            raise ValueError("anchor observation after tau[0]")

    def to_csv(self, path) -> None:
        """Write ``k,tau,asset_id,tau_ik,y`` rows for debugging."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "tau", "asset_id", "tau_ik", "y"])
            for k in range(self.n + 1):
                for i, aid in enumerate(self.asset_ids):
                    w.writerow([k, repr(self.tau[k]), aid, repr(self.times[i, k]), repr(self.prices[i, k])])


def parse_time_unit(spec: str):
    """Parse ``fraction`` or ``seconds:<start>:<end>`` into a (start, end) pair or None."""
    if spec == "fraction":
        return None
    parts = spec.split(":")
    if len(parts) == 3 and parts[0] == "seconds":
        start, end = float(parts[1]), float(parts[2])
        if not end > start:
            raise ValueError(f"time range end must exceed start: {spec!r}")
        return start, end
    raise ValueError(f"unknown time unit {spec!r}; use 'fraction' or 'seconds:<start>:<end>'")


def load_ticks(path, time_range=None, strict: bool = False) -> list[TickSeries]:
    """Read a ``asset_id,time,log_price`` CSV into one TickSeries per asset.

    Parameters
    ----------
    path : path-like
    time_range : (start, end), optional
        Raw clock range mapped affinely onto [0, 1]. Without it times must
        already be fractions of the day.
    strict : bool
        Raise on repeated (asset, time) rows instead of keeping the last one.
    """
    path = Path(path)
    rows: dict[int, dict[float, float]] = defaultdict(dict)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: no observations")
        if [h.strip() for h in header] != ["asset_id", "time", "log_price"]:
            raise ValueError(f"{path}:1: expected header 'asset_id,time,log_price', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                aid = int(row[0])
                t = float(row[1])
                y = float(row[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if not (np.isfinite(t) and np.isfinite(y)):
                raise ValueError(f"{path}:{lineno}: non-finite value in row {row!r}")
            if time_range is not None:
                start, end = time_range
                t = (t - start) / (end - start)
            if t < 0.0 or t > 1.0:
                raise ValueError(f"{path}:{lineno}: time {row[1]} outside the day")
            if t in rows[aid]:
                if strict:
                    raise ValueError(f"{path}:{lineno}: duplicate timestamp for asset {aid} at time {row[1]}")
                log.debug("asset %d: duplicate time %r, keeping last row", aid, t)
            rows[aid][t] = y
    if not rows:
        raise ValueError(f"{path}: no observations")
    out = []
    for aid in sorted(rows):
        items = sorted(rows[aid].items())
        out.append(TickSeries(aid, np.array([t for t, _ in items]), np.array([y for _, y in items])))
    return out


def write_ticks(series: Sequence[TickSeries], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["asset_id", "time", "log_price"])
        for s in series:
            for t, y in zip(s.times, s.log_prices):
                w.writerow([s.asset_id, repr(float(t)), repr(float(y))])


def _select(series, tau, mode):
    p = len(series)
    times = np.empty((p, tau.size))
    prices = np.empty((p, tau.size))
    for i, s in enumerate(series):
        last = np.searchsorted(s.times, tau, side="right") - 1
        if mode == "first" and tau.size > 1:
            idx = last.copy()
            idx[1:] = np.searchsorted(s.times, tau[:-1], side="right")
        else:
            idx = last
        times[i] = s.times[idx]
        prices[i] = s.log_prices[idx]
    return times, prices


def refresh_time_sync(series: Sequence[TickSeries], selection: str = "last") -> SyncGrid:
    """All-asset refresh-time synchronization.

    ``tau[0]`` is the first time every asset has traded; ``tau[k]`` is the
    first time every asset has traded again strictly after ``tau[k-1]``. The
    grid stops once some asset has no further observation.

    Parameters
    ----------
    series : sequence of TickSeries
    selection : {'last', 'first'}
        Which observation inside ``(tau[k-1], tau[k]]`` to keep.
    """
    if not series:
        raise ValueError("no assets")
    if selection not in ("last", "first"):
        raise ValueError(f"unknown selection {selection!r}")
    union = np.unique(np.concatenate([s.times for s in series]))
    # next_all[u] = first time >= every asset has an observation strictly after union[u]
    next_all = np.full(union.size, -np.inf)
    for s in series:
        j = np.searchsorted(s.times, union, side="right")
        nxt = np.full(union.size, np.inf)
        ok = j < s.times.size
        nxt[ok] = s.times[j[ok]]
        np.maximum(next_all, nxt, out=next_all)
    finite = np.isfinite(next_all)
    nxt_idx = np.full(union.size, -1)
    nxt_idx[finite] = np.searchsorted(union, next_all[finite])

    t0 = max(s.times[0] for s in series)
    u = int(np.searchsorted(union, t0))
    chain = [u]
    while nxt_idx[u] >= 0:
        u = int(nxt_idx[u])
        chain.append(u)
    tau = union[np.array(chain)]
    if tau.size < 2:
        raise ValueError("insufficient overlap: refresh-time grid has no intervals")
    times, prices = _select(series, tau, selection)
    return SyncGrid(tau, times, prices, tuple(s.asset_id for s in series))


def previous_tick_sync(series: Sequence[TickSeries], grid) -> SyncGrid:
    """Sample every asset at its most recent observation at or before each grid time.

    Grid points preceding any asset's first observation are dropped from the front.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValueError("grid must be strictly increasing within [0, 1]")
    if not series:
        raise ValueError("no assets")
    t0 = max(s.times[0] for s in series)
    grid = grid[grid >= t0]
    if grid.size < 2:
        raise ValueError("insufficient overlap: fewer than 2 grid points after the last first-observation")
    times, prices = _select(series, grid, "last")
    return SyncGrid(grid, times, prices, tuple(s.asset_id for s in series))
