import dataclasses

import numpy as np
import pytest

from arpvol.simulate import SimConfig, degrees_of_freedom, observation_masks, simulate


def small(**kw):
    base = dict(p=4, r=1, n_all=300, seed=11)
    base.update(kw)
    return SimConfig(**base)


def test_determinism():
    a, b = simulate(small()), simulate(small())
    np.testing.assert_array_equal(a.gamma_true, b.gamma_true)
    for x, y in zip(a.ticks, b.ticks):
        np.testing.assert_array_equal(x.times, y.times)
        np.testing.assert_array_equal(x.log_prices, y.log_prices)
    c = simulate(small(seed=12))
    assert not np.array_equal(a.gamma_true, c.gamma_true)


def test_truth_is_symmetric_psd():
    t = simulate(small(p=12, r=3))
    np.testing.assert_array_equal(t.gamma_true, t.gamma_true.T)
    assert np.linalg.eigvalsh(t.gamma_true)[0] >= -1e-10


def test_noise_and_jumps_leave_truth_and_times_alone():
    a = simulate(small())
    b = simulate(small(noise_sd_mult=0.5, jump_intensity=20))
    np.testing.assert_array_equal(a.gamma_true, b.gamma_true)
    for x, y in zip(a.ticks, b.ticks):
        np.testing.assert_array_equal(x.times, y.times)


def test_noiseless_ticks_are_exact_diffusion():
    # with noise and jumps off, the truth is fully determined by the path: same draws give same prices
    cfg = small(jump_intensity=0, noise_sd_mult=0, w_range=(1, 1))
    t = simulate(cfg)
    assert all(len(s) == cfg.n_all + 1 for s in t.ticks)


def test_realized_variance_oracle():
    errs = []
    for s in range(200):
        cfg = SimConfig(p=1, r=0, n_all=4000, tail_mode="gauss", seed=s, jump_intensity=0, noise_sd_mult=0, w_range=(1, 1))
        t = simulate(cfg)
        rv = np.sum(np.diff(t.ticks[0].log_prices) ** 2)
        errs.append(rv / t.gamma_true[0, 0] - 1)
    errs = np.array(errs)
    assert abs(errs.mean()) <= 0.10
    assert np.mean(np.abs(errs) <= 0.10) >= 0.99


def test_jump_counts_poisson_mean():
    counts = np.concatenate([simulate(SimConfig(p=2, r=0, n_all=100, seed=s)).diagnostics["jump_counts"] for s in range(500)])
    assert 4.5 <= counts.mean() <= 5.5


def test_retention_rate():
    cfg = SimConfig(p=30, n_all=2000, seed=3)
    rate = observation_masks(cfg).mean(axis=1)
    assert np.all((rate >= 0.78) & (rate <= 1.0))


def test_degrees_of_freedom_modes():
    h = degrees_of_freedom(SimConfig(p=40, tail_mode="hetero"))
    assert np.all((h >= 2.5) & (h <= 4))
    assert np.all(degrees_of_freedom(SimConfig(p=5, tail_mode="homo")) == 5)
    t = simulate(small(tail_mode="gauss"))
    assert np.all(np.isinf(t.df))
    assert np.all(t.alpha_ij == 2.0)


def test_alpha_ij_truth():
    t = simulate(small(tail_mode="hetero"))
    a = t.df / 2
    i, j = 0, 1
    assert t.alpha_ij[i, j] == pytest.approx(min(2.0, 2 * a[i] * a[j] / (a[i] + a[j])))


def test_correlation_bounded():
    t = simulate(SimConfig(p=6, n_all=500, seed=4))
    assert t.diagnostics["kappa_repairs"] == 0
    assert -1 < t.diagnostics["kappa_mean"] < 1


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(tail_mode="cauchy")
    with pytest.raises(ValueError):
        SimConfig(w_range=(0.0, 1.0))
    with pytest.raises(ValueError):
        SimConfig(n_all=10)
    cfg = SimConfig(sv={"gou_kappa": 1.0})
    assert cfg.sv.gou_kappa == 1.0
    assert dataclasses.replace(cfg, seed=5).to_dict()["seed"] == 5


def test_ticks_are_valid_series():
    t = simulate(small(p=8))
    for s in t.ticks:
        assert np.all(np.diff(s.times) > 0)
        assert s.times[0] >= 0 and s.times[-1] <= 1
        assert np.all(np.isfinite(s.log_prices))
