"""
Low-rank plus sparse regularization of volatility matrix estimates (POET).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SCHEMES = ("hard", "soft", "sector")


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return 0.5 * (M + M.T)


def symmetric_eigen(M):
    """Eigenvalues in descending order and the matching orthonormal eigenvectors (columns)."""
    S = symmetrize(M)
    w, V = np.linalg.eigh(S)
    return w[::-1].copy(), V[:, ::-1].copy()


@dataclass(frozen=True)
class PoetDecomposition:
    theta_hat: np.ndarray
    sigma_hat: np.ndarray
    sigma_tilde: np.ndarray
    r: int
    eigenvalues: np.ndarray
    varpi_n: float
    scheme: str

    @property
    def gamma_poet(self) -> np.ndarray:
        return self.theta_hat + self.sigma_hat


def threshold_idiosyncratic(sigma_tilde, varpi_n: float = 0.0, scheme: str = "hard", sectors=None) -> np.ndarray:
    """Threshold the off-diagonal part of a residual covariance; negative diagonals are clipped to 0."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    St = np.asarray(sigma_tilde, dtype=float)
    d = np.maximum(np.diag(St), 0.0)
    if scheme == "sector":
        if sectors is None:
            raise ValueError("sector scheme needs a membership vector")
        sectors = np.asarray(sectors)
        if sectors.shape != d.shape:
            raise ValueError("sector membership length does not match the matrix")
        out = np.where(sectors[:, None] == sectors[None, :], St, 0.0)
    else:
        if varpi_n < 0 or np.isnan(varpi_n):
            raise ValueError(f"varpi_n must be non-negative, got {varpi_n}")
        if np.isinf(varpi_n):
            out = np.zeros_like(St)
        else:
            level = varpi_n * np.sqrt(np.outer(d, d))
            keep = np.abs(St) >= level
            if scheme == "hard":
                out = np.where(keep, St, 0.0)
            else:
                out = np.where(keep, np.sign(St) * (np.abs(St) - level), 0.0)
    np.fill_diagonal(out, d)
    return out


def poet(gamma_hat, r: int, varpi_n: float = 0.0, scheme: str = "hard", sectors=None) -> PoetDecomposition:
    """Split ``gamma_hat`` into its top-``r`` principal part and a thresholded remainder.

    Parameters
    ----------
    gamma_hat : (p, p) array
        Input estimate; symmetrized first.
    r : int
        Number of factors, ``1 <= r < p``.
    varpi_n : float
        Correlation threshold level for the 'hard' and 'soft' schemes.
    scheme : {'hard', 'soft', 'sector'}
    sectors : sequence, optional
        Sector label per asset; cross-sector residual covariances are zeroed.
    """
    G = symmetrize(gamma_hat)
    p = G.shape[0]
    if not 1 <= r < p:
        raise ValueError(f"rank r must satisfy 1 <= r < p={p}, got {r}")
    if scheme != "sector" and (varpi_n < 0 or np.isnan(varpi_n)):
        raise ValueError(f"varpi_n must be non-negative, got {varpi_n}")
    lam, V = symmetric_eigen(G)
    Vr = V[:, :r]
    theta_hat = (Vr * lam[:r]) @ Vr.T
    theta_hat = 0.5 * (theta_hat + theta_hat.T)
    sigma_tilde = G - theta_hat
    sigma_hat = threshold_idiosyncratic(sigma_tilde, varpi_n, scheme, sectors)
    return PoetDecomposition(theta_hat, sigma_hat, sigma_tilde, r, lam, float(varpi_n), scheme)


def psd_project(M, mode: str = "spectral_shift") -> np.ndarray:
    """Map a symmetric matrix onto the positive semi-definite cone.

    'spectral_shift' adds ``max(0, -lambda_min)`` to the diagonal, which
    attains the smallest spectral-norm distance; 'frobenius_clip' zeroes the
    negative eigenvalues.
    """
    S = symmetrize(M)
    if mode == "spectral_shift":
        lam_min = np.linalg.eigvalsh(S)[0]
        if lam_min >= 0:
            return S
        return S + (-lam_min) * np.eye(S.shape[0])
    if mode == "frobenius_clip":
        w, V = np.linalg.eigh(S)
        if w[0] >= 0:
            return S
        out = (V * np.maximum(w, 0.0)) @ V.T
        return 0.5 * (out + out.T)
    raise ValueError(f"unknown projection mode {mode!r}")


def poet_inverse(M, rtol: float = 1e-8) -> np.ndarray:
    """Inverse of a (PSD-projected) POET estimate via its spectral decomposition."""
    if isinstance(M, PoetDecomposition):
        M = M.gamma_poet
    S = symmetrize(M)
    w, V = np.linalg.eigh(S)
    if not w[-1] > 0 or w[0] <= rtol * w[-1]:
        raise ValueError(
            f"matrix is numerically singular (min eigenvalue {w[0]:.3g}, max {w[-1]:.3g}); "
            "use a larger varpi_n or a positive shift floor"
        )
    inv = (V / w) @ V.T
    return 0.5 * (inv + inv.T)


def scree(matrices: Sequence) -> np.ndarray:
    """Descending eigenvalues of the element-wise sum of same-sized matrices."""
    mats = [np.asarray(m, dtype=float) for m in matrices]
    if not mats:
        raise ValueError("no matrices")
    shape = mats[0].shape
    for k, m in enumerate(mats):
        if m.shape != shape:
            raise ValueError(f"matrix {k} has shape {m.shape}, expected {shape}")
    return symmetric_eigen(np.sum(mats, axis=0))[0]
