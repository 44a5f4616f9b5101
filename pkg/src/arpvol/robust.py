"""
Adaptive truncation estimators of integrated (co)volatility.

The truncation function ``psi`` is a bounded, odd, non-decreasing influence
function indexed by ``alpha`` in (1, 2]. Pairs whose quadratic variables only
have ``alpha``-th moments get a correspondingly gentler truncation; with every
``alpha = 2`` the estimator is the universal (URP) variant and with ``psi``
replaced by the identity it is the plain pre-averaged realized volatility (PRVM).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .preavg import Kernel, QuadPanel, default_kernel, quad_panel
from .sync import SyncGrid

METHODS = ("arp", "urp", "prvm")


@dataclass(frozen=True)
class PsiParams:
    alpha: float
    c_alpha: float = field(init=False)
    t_alpha: float = field(init=False)

    def __post_init__(self):
        a = float(self.alpha)
        if not 1.0 < a <= 2.0:
            raise ValueError(f"alpha must lie in (1, 2], got {a}")
        c = max((a - 1.0) / a, math.sqrt((2.0 - a) / a))
        t = (1.0 / (a * c)) ** (1.0 / (a - 1.0))
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c_alpha", c)
        object.__setattr__(self, "t_alpha", t)

    @property
    def bound(self) -> float:
        """sup |psi|."""
        return abs(math.log(1.0 - self.t_alpha + self.c_alpha * self.t_alpha ** self.alpha))


def c_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return np.maximum((alpha - 1.0) / alpha, np.sqrt((2.0 - alpha) / alpha))


def t_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return (1.0 / (alpha * c_alpha(alpha))) ** (1.0 / (alpha - 1.0))


def psi_bound(alpha):
    t = t_alpha(alpha)
    return np.abs(np.log(1.0 - t + c_alpha(alpha) * t ** alpha))


def psi(x, alpha):
    """Truncation function; ``alpha`` may be a scalar, PsiParams or an array broadcasting with ``x``."""
    if isinstance(alpha, PsiParams):
        alpha = alpha.alpha
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 1.0) or np.any(alpha > 2.0):
        raise ValueError("alpha must lie in (1, 2]")
    x = np.asarray(x, dtype=float)
    c = c_alpha(alpha)
    t = t_alpha(alpha)
    xc = np.clip(x, -t, t)
    ax = np.abs(xc)
    # odd extension of -log(1 - x + c x^alpha) on [0, t]
    out = -np.sign(xc) * np.log1p(-ax + c * ax ** alpha)
    return out if out.ndim else float(out)


def truncated_mean(values, theta, alpha):
    """``sum(psi(theta * v)) / (len(v) * theta)`` along the last axis."""
    values = np.asarray(values, dtype=float)
    theta = np.asarray(theta, dtype=float)
    m = values.shape[-1]
    th = theta[..., None]
    with np.errstate(invalid="ignore"):
        s = psi(th * values, np.asarray(alpha, dtype=float)[..., None]).sum(axis=-1) / (m * theta)
    # theta = inf only arises when every value is zero
    return np.where(np.isinf(theta), 0.0, s)


def normal_abs_moment(order):
    """E|Z|^order for standard normal Z."""
    order = np.asarray(order, dtype=float)
    a = order / 2.0
    return np.exp(a * math.log(2.0) + gammaln(a + 0.5) - 0.5 * math.log(math.pi))


def harmonic_alpha(alpha_i) -> np.ndarray:
    a = np.asarray(alpha_i, dtype=float)
    return np.minimum(2.0, 2.0 * np.outer(a, a) / np.add.outer(a, a))


@dataclass(frozen=True)
class TailIndices:
    alpha_i: np.ndarray
    alpha_ij: np.ndarray
    c1: float = 5.0
    c2: float = 2.0

    @classmethod
    def from_alpha_i(cls, alpha_i, c1=5.0, c2=2.0) -> "TailIndices":
        a = np.asarray(alpha_i, dtype=float)
        return cls(a, harmonic_alpha(a), c1, c2)

    @classmethod
    def universal(cls, p: int) -> "TailIndices":
        return cls(np.full(p, 2.0), np.full((p, p), 2.0))


def tail_index_from_returns(D, c1: float = 5.0, c2: float = 2.0, step: float = 0.01) -> np.ndarray:
    """Moment-ratio tail index of each row of ``D``.

    The smallest grid value ``a`` in ``{1 + step, ..., c1}`` for which the
    standardized ``2a``-th absolute moment exceeds ``c2`` times the Gaussian
    one; ``c1`` if there is none.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if D.shape[1] < 2:
        raise ValueError("need at least 2 returns per asset")
    grid = np.round(np.arange(1.0 + step, c1 + 0.5 * step, step), 10)
    log_ref = np.log(c2) + np.log(normal_abs_moment(2.0 * grid))
    out = np.full(D.shape[0], float(c1))
    for i, d in enumerate(D):
        sd = d.std(ddof=1)
        if not sd > 0:
            raise ValueError(f"degenerate asset {i}: zero return variance")
        with np.errstate(divide="ignore"):
            logx = np.log(np.abs((d - d.mean()) / sd))
        # log of mean |x|^{2a}, stable for large orders
        e = 2.0 * grid[:, None] * logx[None, :]
        mx = e.max(axis=1, keepdims=True)
        log_m = mx[:, 0] + np.log(np.exp(e - mx).mean(axis=1))
        hit = np.flatnonzero(log_m > log_ref)
        if hit.size:
            out[i] = grid[hit[0]]
    return out


def estimate_tail_indices(grid: SyncGrid, c1: float = 5.0, c2: float = 2.0, step: float = 0.01) -> TailIndices:
    """Per-asset tail indices from synchronized returns and their pairwise combination."""
    if grid.n < 30:
        raise ValueError(f"need n >= 30 intervals for tail-index estimation, got {grid.n}")
    alpha_i = tail_index_from_returns(grid.returns(), c1, c2, step)
    return TailIndices.from_alpha_i(alpha_i, c1, c2)


def _theta(S, alpha, count, K_factor, c, log_p):
    with np.errstate(divide="ignore"):
        base = K_factor * log_p / ((alpha - 1.0) * c_alpha(alpha) * S * count)
    return c * base ** (1.0 / alpha)


def choose_theta(panel: QuadPanel, tails, c: float, p_for_log: float | None = None):
    """Data-driven truncation levels for the pre-averaged and the noise-bias parts.

    Returns ``(theta, theta_rho)``, both ``p x p`` and symmetric; entries for
    pairs outside the panel are NaN.
    """
    if not c > 0:
        raise ValueError(f"tuning constant c must be positive, got {c}")
    p_for_log = max(panel.p, 2) if p_for_log is None else p_for_log
    if not p_for_log > 1:
        raise ValueError("p_for_log must exceed 1 so that log(p) > 0")
    log_p = math.log(p_for_log)
    A = tails.alpha_ij if isinstance(tails, TailIndices) else np.asarray(tails, dtype=float)
    p, n, K = panel.p, panel.n, panel.K
    theta = np.full((p, p), np.nan)
    theta_rho = np.full((p, p), np.nan)
    for i, js in _rows(panel):
        a = A[i, js]
        Q = panel.q_row(i, js)
        R = panel.qrho_row(i, js)
        _check_finite(Q, i, js, "Q")
        _check_finite(R, i, js, "Q_rho")
        S = np.mean(np.abs(Q) ** a[:, None], axis=1)
        S_rho = np.mean(np.abs(R) ** a[:, None], axis=1)
        theta[i, js] = theta[js, i] = _theta(S, a, n - K, K, c, log_p)
        theta_rho[i, js] = theta_rho[js, i] = _theta(S_rho, a, n - 1, 1.0, c, log_p)
    return theta, theta_rho


@dataclass(frozen=True)
class RobustEstimate:
    """Truncated pre-averaging estimate; ``gamma_hat`` targets the integrated volatility matrix.

    ``T_hat`` targets integrated volatility plus the noise bias
    ``rho_ij = (#same-time selections) * zeta * eta_ij / (phi K)``; ``rho_hat``
    estimates that bias from raw returns.
    """

    T_hat: np.ndarray
    rho_hat: np.ndarray
    gamma_hat: np.ndarray
    theta: np.ndarray
    theta_rho: np.ndarray
    alpha_ij: np.ndarray
    method: str
    n: int
    K: int


def _rows(panel: QuadPanel):
    rows: dict[int, list[int]] = {}
    for i, j in panel.iter_pairs():
        rows.setdefault(i, []).append(j)
    for i in sorted(rows):
        yield i, np.array(rows[i])


def _check_finite(block, i, js, name):
    if not np.all(np.isfinite(block)):
        r, k = np.argwhere(~np.isfinite(block))[0]
        raise ValueError(f"non-finite {name} at (i={i}, j={int(js[r])}, k={int(k) + 1})")


def robust_estimate(panel: QuadPanel, tails, theta=None, theta_rho=None, method: str = "arp") -> RobustEstimate:
    """Truncated means of the quadratic variables, minus the truncated noise-bias estimate.

    For ``method='urp'`` every ``alpha_ij`` is set to 2 (``theta`` must have been
    chosen with the same); for ``'prvm'`` no truncation is applied and the
    ``theta`` arguments are ignored.
    """
    method = method.lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    p, n, K = panel.p, panel.n, panel.K
    if method == "urp":
        A = np.full((p, p), 2.0)
    elif isinstance(tails, TailIndices):
        A = tails.alpha_ij
    elif tails is None:
        A = np.full((p, p), np.nan)
    else:
        A = np.asarray(tails, dtype=float)
    if method != "prvm" and (theta is None or theta_rho is None):
        raise ValueError(f"method {method!r} needs theta and theta_rho")
    bias_scale = panel.zeta / (panel.phi * K)
    T = np.full((p, p), np.nan)
    rho = np.full((p, p), np.nan)
    for i, js in _rows(panel):
        Q = panel.q_row(i, js)
        R = panel.qrho_row(i, js)
        _check_finite(Q, i, js, "Q")
        _check_finite(R, i, js, "Q_rho")
        if method == "prvm":
            t_row = Q.mean(axis=1)
            r_row = bias_scale * R.sum(axis=1)
        else:
            t_row = truncated_mean(Q, theta[i, js], A[i, js])
            r_row = bias_scale * (n - 1) * truncated_mean(R, theta_rho[i, js], A[i, js])
        T[i, js] = T[js, i] = t_row
        rho[i, js] = rho[js, i] = r_row
    if method == "prvm":
        theta = np.full((p, p), np.nan)
        theta_rho = np.full((p, p), np.nan)
    return RobustEstimate(T, rho, T - rho, np.asarray(theta), np.asarray(theta_rho), A, method, n, K)


def estimate_volatility(
    grid: SyncGrid,
    method: str = "arp",
    c: float = 0.2,
    c1: float = 5.0,
    c2: float = 2.0,
    kernel: Kernel | None = None,
    c_k: float = 1.0,
    p_for_log: float | None = None,
    tails: TailIndices | None = None,
    pairs="all",
) -> RobustEstimate:
    """Full pipeline from a synchronized grid to an integrated volatility matrix estimate."""
    method = method.lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    kernel = kernel or default_kernel(grid.n, c_k)
    panel = quad_panel(grid, kernel, pairs)
    if method == "prvm":
        return robust_estimate(panel, None, method="prvm")
    if method == "urp":
        tails = TailIndices.universal(grid.p)
    elif tails is None:
        tails = estimate_tail_indices(grid, c1, c2)
    theta, theta_rho = choose_theta(panel, tails, c, p_for_log)
    return robust_estimate(panel, tails, theta, theta_rho, method)
