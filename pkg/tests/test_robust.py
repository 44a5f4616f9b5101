import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from arpvol.preavg import default_kernel, quad_panel
from arpvol.robust import (
    PsiParams, TailIndices, c_alpha, choose_theta, estimate_tail_indices, estimate_volatility,
    harmonic_alpha, normal_abs_moment, psi, psi_bound, robust_estimate, t_alpha, tail_index_from_returns,
    truncated_mean,
)
from arpvol.sync import refresh_time_sync

from conftest import brownian_ticks


def test_psi_exact_values():
    assert psi(0.0, 1.3) == 0.0
    assert psi(1.0, 2.0) == pytest.approx(math.log(2), abs=1e-12)
    assert psi(50.0, 2.0) == pytest.approx(math.log(2), abs=1e-12)
    assert psi(-0.5, 2.0) == pytest.approx(math.log(0.625), abs=1e-12)


def test_params_alpha2():
    pp = PsiParams(2.0)
    assert pp.c_alpha == 0.5 and pp.t_alpha == 1.0
    assert pp.bound == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        PsiParams(1.0)
    with pytest.raises(ValueError):
        psi(0.3, 2.5)


def test_t_alpha_is_turning_point():
    # derivative of x - c x^a vanishes at t: 1 = a c t^(a-1)
    a = np.linspace(1.01, 2, 50)
    np.testing.assert_allclose(a * c_alpha(a) * t_alpha(a) ** (a - 1), 1.0, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(1.01, 2.0))
def test_psi_properties(x1, x2, a):
    lo, hi = min(x1, x2), max(x1, x2)
    assert psi(lo, a) <= psi(hi, a) + 1e-15
    assert psi(-x1, a) == -psi(x1, a)
    assert abs(psi(x1, a)) <= psi_bound(a) + 1e-12


def test_psi_broadcasting():
    x = np.linspace(-3, 3, 7)
    a = np.array([1.2, 1.5, 2.0])[:, None]
    out = psi(x[None, :], a)
    assert out.shape == (3, 7)
    np.testing.assert_allclose(out[1], psi(x, 1.5))


def test_normal_moment_oracle():
    for order in (1.0, 2.0, 3.3, 4.0, 7.5):
        ref = integrate.quad(lambda z: abs(z) ** order * stats.norm.pdf(z), -np.inf, np.inf)[0]
        assert normal_abs_moment(order) == pytest.approx(ref, rel=1e-8)
    assert normal_abs_moment(4.0) == pytest.approx(3.0)


def test_harmonic_alpha():
    A = harmonic_alpha([2.0, 1.5, 3.0])
    assert A[0, 0] == 2.0
    assert A[1, 2] == pytest.approx(2.0)
    assert A[1, 1] == pytest.approx(1.5)
    np.testing.assert_array_equal(A, A.T)
    assert np.all(A <= 2)


def test_tail_index_gaussian_hits_cap():
    D = np.random.default_rng(0).standard_normal((3, 10000))
    np.testing.assert_array_equal(tail_index_from_returns(D), 5.0)


def test_tail_index_heavy():
    r = np.random.default_rng(1)
    a = tail_index_from_returns(r.standard_t(2.5, size=(20, 2000)))
    assert np.median(a) < 2.0


def test_tail_index_matches_scan_oracle():
    d = np.random.default_rng(4).standard_t(3, 500)
    z = (d - d.mean()) / d.std(ddof=1)
    expected = 5.0
    for a in np.arange(101, 501) / 100:
        if np.mean(np.abs(z) ** (2 * a)) > 2 * normal_abs_moment(2 * a):
            expected = a
            break
    assert tail_index_from_returns(d[None, :])[0] == pytest.approx(expected)


def test_tail_index_errors():
    with pytest.raises(ValueError, match="degenerate"):
        tail_index_from_returns(np.zeros((1, 50)))


def _panel(seed=0, p=3, n=400, noise=0.0):
    g = refresh_time_sync(brownian_ticks(p, n, seed=seed, noise=noise))
    return g, quad_panel(g, default_kernel(g.n))


def test_theta_plugin_and_scaling():
    # alpha 2, c 1, K 10, n 110, p = e, S = 1 -> sqrt(0.2)
    K, n = 10, 110
    base = K * 1.0 / ((2 - 1) * 0.5 * 1.0 * (n - K))
    assert math.sqrt(base) == pytest.approx(math.sqrt(0.2))
    g, panel = _panel()
    tails = TailIndices.universal(g.p)
    th, thr = choose_theta(panel, tails, c=1.0, p_for_log=math.e)
    S = np.mean(panel.q(0, 1) ** 2)
    ref = math.sqrt(panel.K / (0.5 * S * (panel.n - panel.K)))
    assert th[0, 1] == pytest.approx(ref)
    g4 = type(g)(g.tau, g.times, 2 * g.prices, g.asset_ids)
    th4, _ = choose_theta(quad_panel(g4, default_kernel(g4.n)), tails, c=1.0, p_for_log=math.e)
    np.testing.assert_allclose(th4, th / 4)


def test_theta_errors():
    g, panel = _panel()
    with pytest.raises(ValueError):
        choose_theta(panel, TailIndices.universal(g.p), c=0.0)
    with pytest.raises(ValueError):
        choose_theta(panel, TailIndices.universal(g.p), c=0.2, p_for_log=1.0)


def test_truncated_mean_small_theta_limit():
    v = np.array([0.3, -1.2, 4.0, 2.2])
    assert truncated_mean(v, 1e-8, 2.0) == pytest.approx(v.mean(), rel=1e-6)
    # the gap to the plain mean is of order theta^(alpha - 1)
    gap = abs(truncated_mean(v, 1e-8, 1.5) - v.mean())
    assert gap <= 2 * c_alpha(1.5) * np.mean(np.abs(v) ** 1.5) * 1e-8 ** 0.5
    q = 0.7
    assert truncated_mean(np.full(5, q), 0.5, 2.0) == pytest.approx(psi(0.5 * q, 2.0) / 0.5)


def test_prvm_is_untruncated_mean():
    g, panel = _panel(noise=0.001)
    est = robust_estimate(panel, None, method="prvm")
    assert est.T_hat[0, 1] == pytest.approx(panel.q(0, 1).mean())
    np.testing.assert_array_equal(est.gamma_hat, est.gamma_hat.T)


def test_small_theta_recovers_prvm():
    g, panel = _panel(noise=0.001)
    tails = TailIndices.universal(g.p)
    th = np.full((g.p, g.p), 1e-8)
    arp = robust_estimate(panel, tails, th, th, "arp")
    prvm = robust_estimate(panel, None, method="prvm")
    np.testing.assert_allclose(arp.gamma_hat, prvm.gamma_hat, rtol=1e-4)


def test_urp_equals_arp_when_tails_light():
    g, panel = _panel()
    tails = TailIndices.from_alpha_i(np.full(g.p, 3.0))
    th, thr = choose_theta(panel, tails, 0.2)
    a = robust_estimate(panel, tails, th, thr, "arp")
    u = robust_estimate(panel, tails, th, thr, "urp")
    np.testing.assert_array_equal(a.gamma_hat, u.gamma_hat)


def test_non_finite_guard():
    g, panel = _panel()
    panel.Z[1, 5] = np.nan
    with pytest.raises(ValueError, match="non-finite Q"):
        robust_estimate(panel, None, method="prvm")


def test_prvm_consistency_brownian():
    # noiseless synchronous unit-variance Brownian paths
    vals = [estimate_volatility(refresh_time_sync(brownian_ticks(1, 1000, seed=s)), "prvm").gamma_hat[0, 0]
            for s in range(500)]
    assert abs(np.mean(vals) - 1.0) <= 0.05


def test_outlier_influence_bound():
    g, panel = _panel(n=500)
    tails = TailIndices.from_alpha_i(np.array([1.4, 1.7, 3.0]))
    th, thr = choose_theta(panel, tails, 0.2)
    Q = panel.q(0, 1)
    a = tails.alpha_ij[0, 1]
    base = truncated_mean(Q, th[0, 1], a)
    Q2 = Q.copy()
    Q2[7] = 1e6
    bump = truncated_mean(Q2, th[0, 1], a)
    assert abs(bump - base) <= psi_bound(a) / (Q.size * th[0, 1]) * (1 + 1e-12) * 2


def test_estimate_volatility_methods():
    g = refresh_time_sync(brownian_ticks(4, 600, seed=3, noise=0.002, keep=0.9))
    for m in ("arp", "urp", "prvm"):
        est = estimate_volatility(g, m)
        assert est.gamma_hat.shape == (4, 4)
        np.testing.assert_array_equal(est.gamma_hat, est.gamma_hat.T)
        assert np.all(np.diag(est.gamma_hat) > 0.5)
    with pytest.raises(ValueError):
        estimate_volatility(g, "foo")
    diag = estimate_volatility(g, "arp", pairs="diagonal")
    assert np.isnan(diag.gamma_hat[0, 1]) and np.isfinite(diag.gamma_hat[2, 2])


def test_tail_estimation_needs_length():
    g = refresh_time_sync(brownian_ticks(2, 20))
    with pytest.raises(ValueError):
        estimate_tail_indices(g)
