"""
Synthetic factor jump-diffusion market with heavy-tailed, asynchronous, noisy ticks.

Instantaneous covariance at regular time cell ``l`` (``t_l = l / n_all``)::

    varsigma_ij(l) = kappa(l)^|i-j| * sqrt(varsigma_ii(l) varsigma_jj(l)) + (B' diag(varsigma^f(l)) B)_ij

with diagonals ``(1 + |t_df|) * base_sv`` cycling over four stochastic
volatility families. Prices are integrated exactly on the union of the
regular cells and the random observation times, so the ground truth
``sum_l varsigma(l) / n_all`` is the integrated volatility of the simulated
continuous path. Jumps and noise are added afterwards and are excluded from
the truth.

Random streams are keyed by purpose (and asset where relevant) off a single
master seed, so switching a component off never shifts another one's draws.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .sync import TickSeries

log = logging.getLogger(__name__)

TAIL_MODES = ("hetero", "homo", "gauss")

# stream purposes
_TIMES, _WEIGHTS, _RETAIN, _DF, _LOADINGS, _PRICE_BM, _FACTOR_BM, _KAPPA_BM = range(8)
_SV, _SV_INIT, _TSCALE, _FACTOR_TSCALE, _JUMPS, _NOISE, _FACTOR_DF, _FACTOR_SV = range(8, 16)


@dataclass
class SVParams:
    # geometric OU: d log v = k (m - log v) dt + s dW
    gou_kappa: float = 0.6
    gou_mean: float = -0.35
    gou_sigma: float = 0.25
    # each of two CIR components: dv = k (m - v) dt + s sqrt(v) dW
    cir_kappa: float = 0.1
    cir_mean: float = 0.3
    cir_sigma: float = 0.2
    # GARCH diffusion: dv = k (m - v) dt + s v dW
    garch_kappa: float = 0.35
    garch_mean: float = 0.2
    garch_sigma: float = 0.5
    # log v = b0 + f1 + b2 f2, df_k = -a_k f_k dt + s_k dW_k, corr(dW_k, price) = leverage
    ll_b0: float = -0.3
    ll_b2: float = 0.5
    ll_a1: float = 0.1
    ll_s1: float = 0.3
    ll_a2: float = 1.0
    ll_s2: float = 0.8
    ll_leverage: float = -0.3
    # correlation driver: du = k (m - u) dt + s u dW_kappa, kappa = tanh(u / 4)
    u_kappa: float = 0.03
    u_mean: float = 0.64
    u_sigma: float = 0.118
    stationary_start: bool = True


@dataclass
class SimConfig:
    p: int = 50
    r: int = 3
    n_all: int = 1000
    tail_mode: str = "hetero"
    seed: int = 0
    jump_intensity: float = 5.0
    jump_sd_mult: float = 0.2
    noise_sd_mult: float = 0.1
    w_range: tuple = (0.8, 1.0)
    drift: float = 0.02
    loading_sd: float = 0.9
    df_range: tuple = (2.5, 4.0)
    homo_df: float = 5.0
    loadings_seed: int | None = None
    sv: SVParams = field(default_factory=SVParams)

    def __post_init__(self):
        if isinstance(self.sv, dict):
            self.sv = SVParams(**self.sv)
        self.w_range = tuple(self.w_range)
        self.df_range = tuple(self.df_range)
        if self.p < 1 or self.r < 0:
            raise ValueError("need p >= 1 and r >= 0")
        if self.n_all < 100:
            raise ValueError(f"n_all must be >= 100, got {self.n_all}")
        if self.tail_mode not in TAIL_MODES:
            raise ValueError(f"tail_mode must be one of {TAIL_MODES}")
        if min(self.jump_intensity, self.jump_sd_mult, self.noise_sd_mult) < 0:
            raise ValueError("jump and noise multipliers must be non-negative")
        lo, hi = self.w_range
        if not 0 < lo <= hi <= 1:
            raise ValueError(f"w_range must satisfy 0 < lo <= hi <= 1, got {self.w_range}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimTruth:
    ticks: list
    gamma_true: np.ndarray
    r: int
    df: np.ndarray
    diagnostics: dict
    cfg: SimConfig

    @property
    def alpha_i(self) -> np.ndarray:
        """Tail index implied by the degrees of freedom (``df / 2``; inf for Gaussian)."""
        return self.df / 2.0

    @property
    def alpha_ij(self) -> np.ndarray:
        a = np.minimum(self.alpha_i, 1e6)
        return np.minimum(2.0, 2.0 * np.outer(a, a) / np.add.outer(a, a))


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _raw_t(rng, df, size):
    """Student-t draws with per-column df; infinite df gives standard normals."""
    df = np.broadcast_to(np.asarray(df, dtype=float), size)
    if np.all(np.isinf(df)):
        return rng.standard_normal(size)
    return rng.standard_t(df, size=size)


def _std_t(rng, df: float, size):
    """Unit-variance Student-t draws (normal when df is infinite)."""
    if np.isinf(df):
        return rng.standard_normal(size)
    return rng.standard_t(df, size=size) * np.sqrt((df - 2.0) / df)


def degrees_of_freedom(cfg: SimConfig) -> np.ndarray:
    if cfg.tail_mode == "hetero":
        return _rng(cfg.seed, _DF).uniform(*cfg.df_range, size=cfg.p)
    if cfg.tail_mode == "homo":
        return np.full(cfg.p, float(cfg.homo_df))
    return np.full(cfg.p, np.inf)


def sampling_times(cfg: SimConfig) -> np.ndarray:
    """Common candidate times: ``n_all - 1`` sorted uniforms plus the endpoints 0 and 1."""
    u = np.sort(_rng(cfg.seed, _TIMES).uniform(0.0, 1.0, size=cfg.n_all - 1))
    return np.concatenate([[0.0], u, [1.0]])


def observation_masks(cfg: SimConfig) -> np.ndarray:
    """Boolean ``(p, n_all + 1)`` mask: asset i keeps each candidate time with probability ``w_i``."""
    w = _rng(cfg.seed, _WEIGHTS).uniform(*cfg.w_range, size=cfg.p)
    masks = np.empty((cfg.p, cfg.n_all + 1), dtype=bool)
    for i in range(cfg.p):
        m = _rng(cfg.seed, _RETAIN, i).random(cfg.n_all + 1) < w[i]
        if m.sum() < 2:
            m[[0, -1]] = True
        masks[i] = m
    return masks


def observation_times(cfg: SimConfig) -> list:
    """Per-asset observation times exactly as used by :func:`simulate`."""
    t = sampling_times(cfg)
    return [t[m] for m in observation_masks(cfg)]


def _stationary_init(sv: SVParams, family: int, rng, size):
    if family == 0:
        sd = sv.gou_sigma / np.sqrt(2 * sv.gou_kappa)
        return {"x": sv.gou_mean + sd * rng.standard_normal(size)}
    if family == 1:
        shape = 2 * sv.cir_kappa * sv.cir_mean / sv.cir_sigma**2
        scale = sv.cir_sigma**2 / (2 * sv.cir_kappa)
        return {"a": rng.gamma(shape, scale, size), "b": rng.gamma(shape, scale, size)}
    if family == 2:
        # stationary law is inverse gamma
        shape = 1 + 2 * sv.garch_kappa / sv.garch_sigma**2
        scale = 2 * sv.garch_kappa * sv.garch_mean / sv.garch_sigma**2
        return {"v": scale / rng.gamma(shape, 1.0, size)}
    sd1 = sv.ll_s1 / np.sqrt(2 * sv.ll_a1)
    sd2 = sv.ll_s2 / np.sqrt(2 * sv.ll_a2)
    return {"f1": sd1 * rng.standard_normal(size), "f2": sd2 * rng.standard_normal(size)}


def _mean_init(sv: SVParams, family: int, size):
    if family == 0:
        return {"x": np.full(size, sv.gou_mean)}
    if family == 1:
        return {"a": np.full(size, sv.cir_mean), "b": np.full(size, sv.cir_mean)}
    if family == 2:
        return {"v": np.full(size, sv.garch_mean)}
    return {"f1": np.zeros(size), "f2": np.zeros(size)}


def _level(sv: SVParams, family: int, s):
    if family == 0:
        return np.exp(s["x"])
    if family == 1:
        return s["a"] + s["b"]
    if family == 2:
        return s["v"]
    return np.exp(sv.ll_b0 + s["f1"] + sv.ll_b2 * s["f2"])


def _step(sv: SVParams, family: int, s, dt, dB, dW_price):
    """One Euler step; ``dB`` has shape (m, 2) of N(0, dt) increments."""
    floor = 1e-8
    if family == 0:
        s["x"] = s["x"] + sv.gou_kappa * (sv.gou_mean - s["x"]) * dt + sv.gou_sigma * dB[:, 0]
    elif family == 1:
        for key, col in (("a", 0), ("b", 1)):
            v = s[key]
            v = v + sv.cir_kappa * (sv.cir_mean - v) * dt + sv.cir_sigma * np.sqrt(v) * dB[:, col]
            s[key] = np.maximum(np.abs(v), floor)
    elif family == 2:
        v = s["v"]
        v = v + sv.garch_kappa * (sv.garch_mean - v) * dt + sv.garch_sigma * v * dB[:, 0]
        s["v"] = np.maximum(np.abs(v), floor)
    else:
        rho = sv.ll_leverage
        c = np.sqrt(1 - rho**2)
        d1 = rho * dW_price + c * dB[:, 0]
        d2 = rho * dW_price + c * dB[:, 1]
        s["f1"] = s["f1"] - sv.ll_a1 * s["f1"] * dt + sv.ll_s1 * d1
        s["f2"] = s["f2"] - sv.ll_a2 * s["f2"] * dt + sv.ll_s2 * d2


def base_volatility(cfg: SimConfig, dW_cell: np.ndarray) -> np.ndarray:
    """Base instantaneous variances, shape ``(n_all, p)``; asset i follows family ``i % 4``."""
    n, p, sv = cfg.n_all, cfg.p, cfg.sv
    dt = 1.0 / n
    dB = _rng(cfg.seed, _SV).standard_normal((n, p, 2)) * np.sqrt(dt)
    init_rng = _rng(cfg.seed, _SV_INIT)
    out = np.empty((n, p))
    for fam in range(4):
        idx = np.arange(fam, p, 4)
        if idx.size == 0:
            continue
        s = _stationary_init(sv, fam, init_rng, idx.size) if sv.stationary_start else _mean_init(sv, fam, idx.size)
        for l in range(n):
            out[l, idx] = _level(sv, fam, s)
            _step(sv, fam, s, dt, dB[l, idx], dW_cell[l, idx])
    return out


def _factor_volatility(cfg: SimConfig) -> np.ndarray:
    n, r, sv = cfg.n_all, cfg.r, cfg.sv
    dt = 1.0 / n
    if r == 0:
        return np.zeros((n, 0))
    rng = _rng(cfg.seed, _FACTOR_SV)
    x = sv.gou_mean + sv.gou_sigma / np.sqrt(2 * sv.gou_kappa) * rng.standard_normal(r) if sv.stationary_start else np.full(r, sv.gou_mean)
    dB = rng.standard_normal((n, r)) * np.sqrt(dt)
    base = np.empty((n, r))
    for l in range(n):
        base[l] = np.exp(x)
        x = x + sv.gou_kappa * (sv.gou_mean - x) * dt + sv.gou_sigma * dB[l]
    if cfg.tail_mode == "hetero":
        df_f = _rng(cfg.seed, _FACTOR_DF).uniform(*cfg.df_range, size=r)
    elif cfg.tail_mode == "homo":
        df_f = np.full(r, float(cfg.homo_df))
    else:
        df_f = np.full(r, np.inf)
    scale = _raw_t(_rng(cfg.seed, _FACTOR_TSCALE), df_f, (n, r))
    return (1.0 + np.abs(scale)) * base


def correlation_path(cfg: SimConfig, dW_cell: np.ndarray):
    """Common correlation parameter ``kappa`` per cell and the number of clamps applied."""
    n, p, sv = cfg.n_all, cfg.p, cfg.sv
    dt = 1.0 / n
    dW0 = _rng(cfg.seed, _KAPPA_BM).standard_normal(n) * np.sqrt(dt)
    dWk = np.sqrt(0.96) * dW0 - 0.2 * dW_cell.sum(axis=1) / np.sqrt(p)
    u = np.empty(n)
    cur = sv.u_mean
    for l in range(n):
        u[l] = cur
        cur = cur + sv.u_kappa * (sv.u_mean - cur) * dt + sv.u_sigma * cur * dWk[l]
    kappa = np.tanh(u / 4.0)
    lim = 1.0 - 1e-12
    repairs = int(np.count_nonzero(np.abs(kappa) > lim))
    if repairs:
        log.warning("clamped |kappa| in %d cells to keep the covariance positive definite", repairs)
    return np.clip(kappa, -lim, lim), repairs


def _ar1_mix(z, kappa):
    """Apply the Cholesky factor of ``[kappa^|i-j|]`` row-wise: y_0 = z_0, y_i = kappa y_{i-1} + sqrt(1-kappa^2) z_i."""
    y = np.empty_like(z)
    c = np.sqrt(1.0 - kappa**2)
    y[:, 0] = z[:, 0]
    for i in range(1, z.shape[1]):
        y[:, i] = kappa * y[:, i - 1] + c * z[:, i]
    return y


def _diffusion_truth(diag_var, kappa, dt, chunk=256):
    n, p = diag_var.shape
    s = np.sqrt(diag_var)
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    G = np.zeros((p, p))
    for a in range(0, n, chunk):
        kk = kappa[a:a + chunk, None, None] ** lag[None]
        ss = s[a:a + chunk]
        G += np.einsum("li,lj,lij->ij", ss, ss, kk)
    return G * dt


def simulate(cfg: SimConfig) -> SimTruth:
    """Simulate one day of noisy asynchronous ticks and the integrated volatility of the continuous part."""
    n, p, r = cfg.n_all, cfg.p, cfg.r
    dt = 1.0 / n
    df = degrees_of_freedom(cfg)
    t_obs = sampling_times(cfg)
    masks = observation_masks(cfg)

    reg = np.arange(n + 1) / n
    merged = np.union1d(t_obs, reg)
    steps = np.diff(merged)
    cell = np.searchsorted(reg, merged[:-1], side="right") - 1
    cell_start = np.searchsorted(cell, np.arange(n))

    dW = _rng(cfg.seed, _PRICE_BM).standard_normal((steps.size, p)) * np.sqrt(steps)[:, None]
    dW_cell = np.add.reduceat(dW, cell_start, axis=0)

    base = base_volatility(cfg, dW_cell)
    scale = _raw_t(_rng(cfg.seed, _TSCALE), df, (n, p))
    diag_var = (1.0 + np.abs(scale)) * base
    kappa, repairs = correlation_path(cfg, dW_cell)

    lseed = cfg.seed if cfg.loadings_seed is None else cfg.loadings_seed
    B = _rng(lseed, _LOADINGS).normal(0.0, cfg.loading_sd, size=(r, p))
    fvar = _factor_volatility(cfg)

    dX = cfg.drift * steps[:, None] + np.sqrt(diag_var[cell]) * _ar1_mix(dW, kappa[cell])
    if r:
        dWf = _rng(cfg.seed, _FACTOR_BM).standard_normal((steps.size, r)) * np.sqrt(steps)[:, None]
        dX += (np.sqrt(fvar[cell]) * dWf) @ B
    X = np.vstack([np.zeros((1, p)), np.cumsum(dX, axis=0)])

    gamma = _diffusion_truth(diag_var, kappa, dt)
    if r:
        gamma += (B.T * (fvar.sum(axis=0) * dt)) @ B
    gamma = 0.5 * (gamma + gamma.T)
    gsd = np.sqrt(np.diag(gamma))

    obs_idx = np.searchsorted(merged, t_obs)
    X_obs = X[obs_idx]
    ticks = []
    jump_counts = np.zeros(p, dtype=int)
    for i in range(p):
        y = X_obs[:, i].copy()
        jr = _rng(cfg.seed, _JUMPS, i)
        nj = jr.poisson(cfg.jump_intensity)
        jt = jr.uniform(0.0, 1.0, nj)
        js = _std_t(jr, df[i], nj) * cfg.jump_sd_mult * gsd[i]
        jump_counts[i] = nj
        for tj, sj in zip(jt, js):
            y[t_obs >= tj] += sj
        eps = _std_t(_rng(cfg.seed, _NOISE, i), df[i], n + 1) * cfg.noise_sd_mult * gsd[i]
        m = masks[i]
        ticks.append(TickSeries(i, t_obs[m], (y + eps)[m]))

    diagnostics = {
        "jump_counts": jump_counts.tolist(),
        "noise_sd": (cfg.noise_sd_mult * gsd).tolist(),
        "observations": masks.sum(axis=1).tolist(),
        "kappa_repairs": repairs,
        "kappa_mean": float(kappa.mean()),
    }
    return SimTruth(ticks, gamma, r, df, diagnostics, cfg)
