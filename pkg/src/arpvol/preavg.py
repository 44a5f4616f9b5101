"""
Pre-averaged returns and the quadratic variables fed to the robust estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np

from .sync import SyncGrid


def triangular(x):
    return np.minimum(x, 1.0 - x)


@dataclass(frozen=True)
class Kernel:
    """Pre-averaging weights tabulated at ``l / K`` for ``l = 0..K``."""

    K: int
    weights: np.ndarray
    phi: float
    zeta: float

    @classmethod
    def from_function(cls, K: int, g: Callable = triangular) -> "Kernel":
        if K < 2:
            raise ValueError(f"bandwidth K must be >= 2, got {K}")
        w = np.asarray(g(np.arange(K + 1) / K), dtype=float)
        if abs(w[0]) > 1e-14 or abs(w[-1]) > 1e-14:
            raise ValueError("weight function must vanish at 0 and 1")
        if g is triangular:
            # rational weights min(l, K - l) / K: sum exactly, round once
            m = [min(l, K - l) for l in range(K + 1)]
            phi = float(Fraction(sum(v * v for v in m[:K]), K**3))
            zeta = float(Fraction(sum((b - a) ** 2 for a, b in zip(m, m[1:])), K**2))
            return cls(K, w, phi, zeta)
        phi = float(np.sum(w[:K] ** 2) / K)
        if phi <= 0:
            raise ValueError("weight function is identically zero")
        zeta = float(np.sum(np.diff(w) ** 2))
        return cls(K, w, phi, zeta)


def default_kernel(n: int, c_k: float = 1.0) -> Kernel:
    """Triangular kernel with bandwidth ``K = floor(c_k * sqrt(n))``."""
    if n < 9:
        raise ValueError(f"need n >= 9 intervals for a bandwidth of at least 2, got n={n}")
    K = int(np.floor(c_k * np.sqrt(n)))
    if K < 2:
        raise ValueError(f"bandwidth floor({c_k} * sqrt({n})) = {K} < 2")
    if K >= n:
        raise ValueError(f"bandwidth K={K} must be below n={n}")
    return Kernel.from_function(K)


def pre_averaged_returns(grid: SyncGrid, kernel: Kernel) -> np.ndarray:
    """Kernel-weighted sums of ``K`` consecutive returns.

    Returns an array of shape ``(p, n - K)``; column ``k - 1`` is
    ``sum_{l<K} g(l/K) * (Y(tau_{k+l+1}) - Y(tau_{k+l}))``.
    """
    n, K = grid.n, kernel.K
    if n <= K:
        raise ValueError(f"need n > K, got n={n}, K={K}")
    D = grid.returns()
    windows = np.lib.stride_tricks.sliding_window_view(D, K, axis=1)
    return windows @ kernel.weights[:K]


@dataclass(frozen=True)
class QuadPanel:
    """Quadratic pre-averaged and quadratic return variables, produced per pair on demand.

    The full ``p x p x n`` tensors are never materialized; ``q(i, j)`` and
    ``qrho(i, j)`` build one pair's series, ``q_row``/``qrho_row`` one block of
    pairs sharing the first index.
    """

    Z: np.ndarray
    D: np.ndarray
    same_time_count: np.ndarray
    n: int
    K: int
    phi: float
    zeta: float
    pairs: tuple = ()

    @property
    def p(self) -> int:
        return self.Z.shape[0]

    @property
    def scale(self) -> float:
        return (self.n - self.K) / (self.phi * self.K)

    def q(self, i: int, j: int) -> np.ndarray:
        return self.scale * (self.Z[i] * self.Z[j])

    def qrho(self, i: int, j: int) -> np.ndarray:
        return 0.5 * (self.D[i] * self.D[j])

    def q_row(self, i: int, js) -> np.ndarray:
        return self.scale * (self.Z[i] * self.Z[js])

    def qrho_row(self, i: int, js) -> np.ndarray:
        return 0.5 * (self.D[i] * self.D[js])

    def iter_pairs(self) -> Iterator[tuple[int, int]]:
        yield from self.pairs


def _pair_list(p: int, pairs) -> tuple:
    if pairs == "all":
        return tuple((i, j) for i in range(p) for j in range(i, p))
    if pairs == "diagonal":
        return tuple((i, i) for i in range(p))
    out = []
    for i, j in pairs:
        if not (0 <= i < p and 0 <= j < p):
            raise ValueError(f"pair {(i, j)} out of range for p={p}")
        out.append((min(i, j), max(i, j)))
    return tuple(out)


def quad_panel(grid: SyncGrid, kernel: Kernel, pairs="all") -> QuadPanel:
    """Build the quadratic-variable panel for ``pairs`` ('all', 'diagonal' or a list)."""
    Z = pre_averaged_returns(grid, kernel)
    D = grid.returns()
    sel = grid.times[:, 1:]
    p = grid.p
    same = np.empty((p, p), dtype=np.int64)
    for i in range(p):
        same[i] = np.count_nonzero(sel == sel[i], axis=1)
    return QuadPanel(Z, D, same, grid.n, kernel.K, kernel.phi, kernel.zeta, _pair_list(p, pairs))
