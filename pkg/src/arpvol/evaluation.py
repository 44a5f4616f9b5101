"""
Error norms, stability (MSPE) and gross-exposure constrained minimum-variance portfolios.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class NormReport:
    frobenius: float
    spectral: float
    max: float
    relative_frobenius: float | None = None

    def as_dict(self) -> dict:
        return {
            "frobenius": self.frobenius,
            "relative_frobenius": self.relative_frobenius,
            "spectral": self.spectral,
            "max": self.max,
        }


def norms(est, truth) -> NormReport:
    """Frobenius, spectral, max and relative Frobenius norms of ``est - truth``.

    The relative Frobenius norm ``sqrt(p^-1 ||truth^-1/2 A truth^-1/2||_F^2)``
    is only reported when ``truth`` is positive definite.
    """
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape or est.ndim != 2 or est.shape[0] != est.shape[1]:
        raise ValueError(f"dimension mismatch: {est.shape} vs {truth.shape}")
    A = est - truth
    p = A.shape[0]
    rel = None
    w, V = np.linalg.eigh(0.5 * (truth + truth.T))
    if w[0] > 0:
        root_inv = (V / np.sqrt(w)) @ V.T
        rel = float(np.linalg.norm(root_inv @ A @ root_inv, "fro") / np.sqrt(p))
    return NormReport(
        frobenius=float(np.linalg.norm(A, "fro")),
        spectral=float(np.linalg.norm(A, 2)),
        max=float(np.abs(A).max()),
        relative_frobenius=rel,
    )


def mspe(series: Sequence, period=None) -> float:
    """Mean squared Frobenius distance between consecutive matrices.

    ``period`` is an optional ``(start, stop)`` index range (Python slice semantics).
    """
    mats = list(series)
    if period is not None:
        mats = mats[slice(*period)]
    if len(mats) < 2:
        raise ValueError("need at least 2 matrices")
    diffs = [np.linalg.norm(np.asarray(a, float) - np.asarray(b, float), "fro") ** 2 for a, b in zip(mats[:-1], mats[1:])]
    return float(np.sum(diffs) / (len(mats) - 1))


@dataclass(frozen=True)
class PortfolioSolution:
    weights: np.ndarray
    objective: float
    gross_exposure: float
    c0: float
    iterations: int


def _excess_threshold(y, s):
    """The ``a`` with ``sum((y - a)_+) = s`` for ``s > 0``."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - s
    k = np.arange(1, u.size + 1)
    hit = np.flatnonzero(u - css / k > 0)
    # an empty hit set only happens when s is lost to rounding
    rho = hit[-1] if hit.size else 0
    return css[rho] / (rho + 1)


def project_budget_l1(y, c0: float) -> np.ndarray:
    """Euclidean projection onto ``{w : sum(w) = 1, ||w||_1 <= c0}`` (requires ``c0 >= 1``).

    With the l1 bound active the solution is ``soft(y - nu, mu)``, whose positive
    and negative parts sum to ``(c0 + 1) / 2`` and ``(c0 - 1) / 2``; each part is
    a one-sided threshold found by sorting.
    """
    y = np.asarray(y, dtype=float)
    w = y - (np.sum(y) - 1.0) / y.size
    if np.sum(np.abs(w)) <= c0:
        return w
    a = _excess_threshold(y, 0.5 * (c0 + 1.0))
    neg = 0.5 * (c0 - 1.0)
    b = -_excess_threshold(-y, neg) if neg > 0 else np.min(y)
    return np.maximum(y - a, 0.0) - np.maximum(b - y, 0.0)


def _polish(G, w, c0, tol=1e-10):
    """Re-solve on the support of ``w`` with equality constraints; returns None when inconsistent."""
    support = np.abs(w) > 1e-9
    if not np.any(support):
        return None
    s = np.sign(w[support])
    Gs = G[np.ix_(support, support)]
    # with one sign on the support the l1 bound coincides with the budget row
    l1_active = np.sum(np.abs(w)) > c0 - 1e-7 and np.any(s > 0) and np.any(s < 0)
    A = np.ones((1, s.size)) if not l1_active else np.vstack([np.ones(s.size), s])
    b = np.array([1.0]) if not l1_active else np.array([1.0, c0])
    k = A.shape[0]
    kkt = np.block([[2 * Gs, A.T], [A, np.zeros((k, k))]])
    try:
        sol = np.linalg.solve(kkt, np.concatenate([np.zeros(s.size), b]))
    except np.linalg.LinAlgError:
        return None
    ws = sol[: s.size]
    if np.any(np.sign(ws) != s):
        return None
    out = np.zeros_like(w)
    out[support] = ws
    if abs(out.sum() - 1) > tol or np.sum(np.abs(out)) > c0 + tol:
        return None
    return out


def min_variance_portfolio(gamma, c0: float, max_iter: int = 20000, tol: float = 1e-7) -> PortfolioSolution:
    """Minimize ``w' gamma w`` subject to ``sum(w) = 1`` and ``||w||_1 <= c0``.

    Accelerated projected gradient with an exact projection onto the
    constraint set, followed by an equality-constrained re-solve on the final
    support that is kept only if it is feasible and no worse.
    """
    if c0 < 1:
        raise ValueError(f"infeasible: gross exposure c0={c0} < 1 cannot meet the budget constraint")
    G = np.asarray(gamma, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or not np.all(np.isfinite(G)):
        raise ValueError("gamma must be a finite square matrix")
    G = 0.5 * (G + G.T)
    lam = np.linalg.eigvalsh(G)
    if lam[0] <= 0:
        raise ValueError(f"gamma is not positive definite (min eigenvalue {lam[0]:.3g}); project it first")
    p = G.shape[0]
    step = 1.0 / (2.0 * lam[-1])
    w = np.full(p, 1.0 / p)
    z, t = w.copy(), 1.0
    obj = float(w @ G @ w)
    it = 0
    for it in range(1, max_iter + 1):
        w_new = project_budget_l1(z - step * 2.0 * (G @ z), c0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
        obj = float(w @ G @ w)
        grad_map = w - project_budget_l1(w - step * 2.0 * (G @ w), c0)
        if np.max(np.abs(grad_map)) < tol * step:
            break
    polished = _polish(G, w, c0)
    if polished is not None and float(polished @ G @ polished) <= obj + 1e-15 * abs(obj):
        w = polished
        obj = float(w @ G @ w)
    return PortfolioSolution(w, obj, float(np.sum(np.abs(w))), float(c0), it)


def realized_portfolio_risk(weights, returns) -> float:
    """Square root of the realized variance of portfolio returns; ``returns`` has shape (intervals, p)."""
    r = np.asarray(returns, dtype=float) @ np.asarray(weights, dtype=float)
    return float(np.sqrt(np.sum(r * r)))
