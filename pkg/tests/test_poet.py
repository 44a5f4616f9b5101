import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arpvol.poet import poet, poet_inverse, psd_project, scree, symmetric_eigen, threshold_idiosyncratic


def factor_matrix(p=20, r=3, seed=0, diag=None):
    rng = np.random.default_rng(seed)
    B = rng.normal(0, 1, (r, p))
    D = np.diag(rng.uniform(0.5, 1.5, p) if diag is None else diag)
    return B.T @ B + D


def test_eigen_examples():
    w, _ = symmetric_eigen(np.eye(3))
    np.testing.assert_allclose(w, 1)
    w, V = symmetric_eigen(np.diag([1.0, 3.0, 2.0]))
    np.testing.assert_allclose(w, [3, 2, 1])
    np.testing.assert_allclose(np.abs(V), np.eye(3)[:, [1, 2, 0]])
    w, V = symmetric_eigen([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(w, [3, 1])
    np.testing.assert_allclose(np.abs(V), np.full((2, 2), 2 ** -0.5))


def test_eigen_rejects_nonfinite():
    with pytest.raises(ValueError):
        symmetric_eigen([[1.0, np.nan], [np.nan, 1.0]])


def test_exact_recovery_varpi_zero():
    G = factor_matrix()
    dec = poet(G, 3, 0.0)
    assert np.max(np.abs(dec.gamma_poet - G)) <= 1e-10
    single = poet(G, 3, scheme="sector", sectors=np.zeros(20))
    np.testing.assert_array_equal(single.gamma_poet, dec.gamma_poet)


def test_large_varpi_error_is_eigen_leakage():
    G = factor_matrix(diag=np.ones(20))
    dec = poet(G, 3, np.inf)
    assert np.count_nonzero(dec.sigma_hat - np.diag(np.diag(dec.sigma_hat))) == 0
    off = dec.sigma_tilde - np.diag(np.diag(dec.sigma_tilde))
    err = np.max(np.abs(dec.gamma_poet - G))
    assert err == pytest.approx(np.max(np.abs(off)), rel=1e-9)
    # with identity idiosyncratic part the residual is the projector onto the complement
    _, V = symmetric_eigen(G)
    P = V[:, :3] @ V[:, :3].T
    np.testing.assert_allclose(dec.sigma_tilde, np.eye(20) - P, atol=1e-10)


def test_reconstruction_and_errors():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(8, 8))
    dec = poet(A, 2, 0.3)
    S = 0.5 * (A + A.T)
    assert np.max(np.abs(S - dec.theta_hat - dec.sigma_tilde)) <= 1e-10 * np.max(np.abs(S))
    assert np.linalg.matrix_rank(dec.theta_hat) <= 2
    assert np.all(np.diff(dec.eigenvalues) <= 0)
    with pytest.raises(ValueError):
        poet(A, 8, 0.1)
    with pytest.raises(ValueError):
        poet(A, 0, 0.1)
    with pytest.raises(ValueError):
        poet(A, 2, -0.1)
    with pytest.raises(ValueError):
        poet(A, 2, scheme="sector")


def test_varpi_zero_keeps_everything():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(6, 6))
    dec = poet(A, 1, 0.0)
    St = dec.sigma_tilde
    off = ~np.eye(6, dtype=bool)
    np.testing.assert_array_equal(dec.sigma_hat[off], St[off])
    np.testing.assert_array_equal(np.diag(dec.sigma_hat), np.maximum(np.diag(St), 0))


def test_threshold_tie_is_kept():
    St = np.array([[4.0, 2.0], [2.0, 1.0]])
    # level = 1 * sqrt(4 * 1) = 2
    np.testing.assert_array_equal(threshold_idiosyncratic(St, 1.0, "hard"), St)
    np.testing.assert_array_equal(threshold_idiosyncratic(St, 1.0, "soft"), np.diag([4.0, 1.0]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1.5), st.floats(0, 1.5))
def test_threshold_properties(seed, v1, v2):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(7, 7))
    St = A @ A.T - 3 * np.eye(7)
    lo, hi = min(v1, v2), max(v1, v2)
    d = np.maximum(np.diag(St), 0)
    level = hi * np.sqrt(np.outer(d, d))
    off = ~np.eye(7, dtype=bool)
    for scheme in ("hard", "soft"):
        out = threshold_idiosyncratic(St, hi, scheme)
        kept = off & (out != 0)
        assert np.all(np.abs(out - St)[kept] <= level[kept] + 1e-12)
        np.testing.assert_array_equal(out, out.T)
    keep_lo = threshold_idiosyncratic(St, lo, "hard") != 0
    keep_hi = threshold_idiosyncratic(St, hi, "hard") != 0
    assert np.all(keep_lo[off] | ~keep_hi[off])


def test_sector_scheme():
    G = factor_matrix(p=6, r=1)
    dec = poet(G, 1, scheme="sector", sectors=[0, 0, 1, 1, 2, 2])
    assert dec.sigma_hat[0, 2] == 0 and dec.sigma_hat[0, 1] == dec.sigma_tilde[0, 1]
    with pytest.raises(ValueError):
        poet(G, 1, scheme="sector", sectors=[0, 1])


def test_psd_examples():
    M = np.diag([2.0, -1.0])
    np.testing.assert_allclose(psd_project(M, "spectral_shift"), np.diag([3.0, 0.0]))
    np.testing.assert_allclose(psd_project(M, "frobenius_clip"), np.diag([2.0, 0.0]))
    S = factor_matrix(p=5, r=2)
    for mode in ("spectral_shift", "frobenius_clip"):
        np.testing.assert_array_equal(psd_project(S, mode), S)
    with pytest.raises(ValueError):
        psd_project(M, "nearest")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 12))
def test_psd_properties(seed, p):
    A = np.random.default_rng(seed).normal(size=(p, p))
    S = 0.5 * (A + A.T)
    shift = psd_project(S, "spectral_shift")
    clip = psd_project(S, "frobenius_clip")
    tol = 1e-10 * max(np.linalg.norm(S, 2), 1)
    assert np.linalg.eigvalsh(shift)[0] >= -tol
    assert np.linalg.eigvalsh(clip)[0] >= -tol
    off = ~np.eye(p, dtype=bool)
    np.testing.assert_array_equal(shift[off], S[off])
    w = np.linalg.eigvalsh(S)
    assert np.trace(clip) == pytest.approx(w[w > 0].sum(), abs=1e-9)
    # both are spectral-norm minimizers over the PSD cone
    assert np.linalg.norm(shift - S, 2) == pytest.approx(max(0, -w[0]), abs=1e-9)
    assert np.linalg.norm(clip - S, 2) == pytest.approx(max(0, -w[0]), abs=1e-9)


def test_inverse():
    np.testing.assert_allclose(poet_inverse(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(poet_inverse(np.diag([4.0, 2.0])), np.diag([0.25, 0.5]))
    A = np.random.default_rng(7).normal(size=(10, 10))
    M = A @ A.T + 0.5 * np.eye(10)
    assert np.max(np.abs(M @ poet_inverse(M) - np.eye(10))) <= 1e-8
    dec = poet(M, 2, 0.0)
    np.testing.assert_allclose(poet_inverse(dec), poet_inverse(dec.gamma_poet))
    with pytest.raises(ValueError, match="singular"):
        poet_inverse(np.diag([1.0, 0.0]))


def test_scree():
    np.testing.assert_allclose(scree([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]), [1, 1])
    rng = np.random.default_rng(3)
    mats = []
    for _ in range(5):
        A = rng.normal(size=(4, 4))
        mats.append(A @ A.T)
    np.testing.assert_allclose(scree(mats), np.sort(np.linalg.eigvalsh(sum(mats)))[::-1])
    np.testing.assert_allclose(scree(mats[:1]), np.sort(np.linalg.eigvalsh(mats[0]))[::-1])
    with pytest.raises(ValueError):
        scree([np.eye(2), np.eye(3)])
