import itertools

import numpy as np
import pytest
from scipy.linalg import solve_triangular

from pnmimo import channel as ch
from pnmimo import detector as det
from pnmimo.constellation import make_qam
from pnmimo.errors import RankDeficient, SpaceTooLarge
from pnmimo.sphere import real_nnd

DEG = np.pi / 180.0


def random_instance(rng, n_t=2, n_r=2, order=16, gamma=100.0, sigma=3 * DEG):
    k = make_qam(order)
    h = ch.sample_rayleigh(n_t, n_r, rng).h
    x = k.points[rng.integers(0, order, n_t)]
    pn = ch.gaussian_iid(n_t, n_r, sigma, sigma)
    theta = ch.sample_phase_noise(pn, rng)
    obs = ch.apply_channel(ch.ChannelInstance(h=h), x, theta, gamma, rng)
    return k, h, obs, pn


def exhaustive_euclidean(y, h, k):
    best, best_d = None, np.inf
    for combo in itertools.product(k.points, repeat=h.shape[1]):
        x = np.array(combo)
        d = np.sum(np.abs(y - h @ x) ** 2)
        if d < best_d:
            best, best_d = x, d
    return best


def test_build_ab_scalar():
    a, b = det.build_ab(np.array([[1.0 + 0j]]), np.array([1.0 + 0j]), np.array([1.0 + 0j]))
    np.testing.assert_allclose(a, [[0.0, 0.0], [-1.0, -1.0]])
    np.testing.assert_allclose(b, [0.0, 0.0])


def test_build_ab_matches_finite_differences():
    rng = np.random.default_rng(2)
    h = ch.sample_rayleigh(2, 2, rng).h
    x = make_qam(16).points[rng.integers(0, 16, 2)]
    y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    a, b = det.build_ab(h, x, y)

    def resid(theta):
        n_t = 2
        r = y * np.exp(-1j * theta[n_t:]) - h @ (np.exp(1j * theta[:n_t]) * x)
        return np.concatenate([r.real, r.imag])

    np.testing.assert_allclose(resid(np.zeros(4)), b, atol=1e-12)
    eps = 1e-7
    for i in range(4):
        e = np.zeros(4)
        e[i] = eps
        fd = (resid(e) - resid(-e)) / (2 * eps)
        np.testing.assert_allclose(fd, a[:, i], atol=1e-6)


def test_build_w_scalar_closed_form():
    a = np.array([[0.0, 0.0], [-1.0, -1.0]])
    sigma2 = (3 * DEG) ** 2
    ws = det.build_w(a, sigma2 * np.eye(2), gamma=1000.0)
    expect = np.eye(2)
    expect[1, 1] += 2.0 * 1000.0 * 2.0 * sigma2
    np.testing.assert_allclose(ws.w_mat, expect, atol=1e-12)
    np.testing.assert_allclose(ws.chol_lower @ ws.chol_lower.T, ws.w_mat, atol=1e-12)


def test_approx_loglik_zero_q_reduction():
    rng = np.random.default_rng(5)
    k, h, obs, _ = random_instance(rng)
    q0 = np.zeros((4, 4))
    f = det.approx_loglik(obs.x_true, obs.y, h, obs.gamma, q0)
    d = obs.gamma * np.sum(np.abs(obs.y - h @ obs.x_true) ** 2)
    assert f == pytest.approx(-d, abs=1e-9)


def test_approx_loglik_degenerate_limit():
    rng = np.random.default_rng(6)
    k, h, obs, pn = random_instance(rng)
    d = obs.gamma * np.sum(np.abs(obs.y - h @ obs.x_true) ** 2)
    for t in (1e-4, 1e-6):
        f = det.approx_loglik(obs.x_true, obs.y, h, obs.gamma, t * pn.q_theta)
        assert abs(f + d) < 1e4 * t


def test_approx_loglik_noiseless_truth_scores_highest():
    # with y exactly on the signal point, b = 0 and only -0.5 ln det remains
    k = make_qam(16)
    h = np.eye(2, dtype=complex)
    x = k.points[[5, 9]]
    pn = ch.gaussian_iid(2, 2, 2 * DEG, 2 * DEG)
    y = h @ x
    f = det.approx_loglik(x, y, h, 1000.0, pn.q_theta)
    ws = det.whitened_system(x, y, h, 1000.0, pn.q_theta)
    assert f == pytest.approx(-0.5 * np.log(np.linalg.det(ws.w_mat)), rel=1e-9)


def test_whitened_objective_identity():
    rng = np.random.default_rng(8)
    for _ in range(20):
        k, h, obs, pn = random_instance(rng)
        x = k.points[rng.integers(0, 16, 2)]
        ws = det.whitened_system(x, obs.y, h, obs.gamma, pn.q_theta)
        quad = ws.b_vec @ np.linalg.solve(ws.w_mat, ws.b_vec)
        u = solve_triangular(ws.chol_lower, ws.b_vec, lower=True)
        assert u @ u == pytest.approx(quad, abs=1e-8)


def test_real_embedding_round_trip():
    rng = np.random.default_rng(1)
    y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    y_r, h_r = det.real_embed(y, h)
    x_r = np.concatenate([x.real, x.imag])
    np.testing.assert_allclose(det.to_complex(x_r), x, atol=1e-14)
    assert np.linalg.norm(y_r - h_r @ x_r) == pytest.approx(np.linalg.norm(y - h @ x), abs=1e-12)


def test_snr_ceiling():
    assert det.snr_ceiling(100.0, None) == 100.0
    assert det.snr_ceiling(100.0, 1e4) == 100.0
    assert det.snr_ceiling(1e6, 1e4) == 1e4
    with pytest.raises(ValueError):
        det.snr_ceiling(10.0, -1.0)
    assert det.default_gamma_max(256) == pytest.approx(1e4)
    assert det.default_gamma_max(1024) == pytest.approx(10 ** 4.5)


def test_nnd_identity_channel_is_componentwise():
    rng = np.random.default_rng(4)
    k = make_qam(64)
    h = np.eye(3, dtype=complex)
    y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    res = det.nnd(y, h, k)
    from pnmimo.constellation import quantize_vector
    np.testing.assert_array_equal(res.x_hat, quantize_vector(y, k))


def test_nnd_exact_vs_exhaustive():
    rng = np.random.default_rng(12)
    k = make_qam(16)
    for _ in range(200):
        h = ch.sample_rayleigh(2, 2, rng).h
        y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        res = det.nnd(y, h, k)
        np.testing.assert_array_equal(res.x_hat, exhaustive_euclidean(y, h, k))
        assert res.nnd_node_count >= 2


def test_real_nnd_rank_deficient():
    k = make_qam(4)
    h = np.zeros((2, 2), dtype=complex)
    with pytest.raises(RankDeficient):
        y_r, h_r = det.real_embed(np.ones(2, dtype=complex), h)
        real_nnd(y_r, h_r, k.pam_levels)


def test_lmmse_recovers_clean_signal():
    rng = np.random.default_rng(3)
    k = make_qam(16)
    h = ch.sample_rayleigh(2, 4, rng).h
    x = k.points[[1, 14]]
    res = det.naive_lmmse(h @ x, h, 1e6, k)
    np.testing.assert_array_equal(res.x_hat, x)


def test_siw_zero_q_equals_nnd():
    rng = np.random.default_rng(21)
    k = make_qam(16)
    q0 = np.zeros((4, 4))
    for _ in range(50):
        h = ch.sample_rayleigh(2, 2, rng).h
        y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        siw = det.siw_detect(y, h, 100.0, q0, k)
        ml = det.nnd(y, h, k, 100.0, q0)
        np.testing.assert_array_equal(siw.x_hat, ml.x_hat)


def test_siw_score_dominates_candidates():
    rng = np.random.default_rng(31)
    for _ in range(50):
        k, h, obs, pn = random_instance(rng, gamma=10 ** 3.5)
        siw = det.siw_detect(obs.y, h, obs.gamma, pn.q_theta, k)
        lm = det.naive_lmmse(obs.y, h, obs.gamma, k, pn.q_theta)
        ml = det.nnd(obs.y, h, k, obs.gamma, pn.q_theta)
        assert siw.score >= lm.score - 1e-9
        assert siw.score >= ml.score - 1e-9
        assert siw.score == pytest.approx(
            det.approx_loglik(siw.x_hat, obs.y, h, obs.gamma, pn.q_theta), abs=1e-9)


def test_siw_iterative_never_worse_than_single_pass():
    rng = np.random.default_rng(41)
    for _ in range(30):
        k, h, obs, pn = random_instance(rng, gamma=10 ** 3.5)
        one = det.siw_detect(obs.y, h, obs.gamma, pn.q_theta, k)
        it = det.siw_iterative(obs.y, h, obs.gamma, pn.q_theta, k, max_iter=4)
        assert it.score >= one.score - 1e-9
    with pytest.raises(ValueError):
        det.siw_iterative(obs.y, h, obs.gamma, pn.q_theta, k, max_iter=0)


def test_siw_corrects_a_naive_error():
    # scan seeds for a scalar 256-QAM instance where naive ML errs but the
    # whitened pass recovers the sent symbol, confirmed by the exhaustive
    # surrogate argmax
    k = make_qam(256)
    pn = ch.gaussian_iid(1, 1, 2 * DEG, 2 * DEG)
    gamma = 10 ** 4.0
    found = False
    for seed in range(500):
        rng = np.random.default_rng(seed)
        x = k.points[rng.integers(0, 256, 1)]
        theta = ch.sample_phase_noise(pn, rng)
        obs = ch.apply_channel(ch.identity_channel(1), x, theta, gamma, rng)
        ml = det.nnd(obs.y, np.eye(1, dtype=complex), k, gamma, pn.q_theta)
        if np.array_equal(ml.x_hat, x):
            continue
        siw = det.siw_detect(obs.y, np.eye(1, dtype=complex), gamma, pn.q_theta, k)
        if np.array_equal(siw.x_hat, x):
            ex = det.exhaustive_aml(obs.y, np.eye(1, dtype=complex), gamma, pn.q_theta, k)
            np.testing.assert_array_equal(ex.x_hat, x)
            found = True
            break
    assert found


def test_exhaustive_aml_matches_brute_force():
    rng = np.random.default_rng(17)
    k, h, obs, pn = random_instance(rng, order=4)
    res = det.exhaustive_aml(obs.y, h, obs.gamma, pn.q_theta, k)
    best, best_f = None, -np.inf
    for combo in itertools.product(k.points, repeat=2):
        f = det.approx_loglik(np.array(combo), obs.y, h, obs.gamma, pn.q_theta)
        if f > best_f:
            best, best_f = np.array(combo), f
    np.testing.assert_array_equal(res.x_hat, best)
    assert res.score == pytest.approx(best_f)


def test_exhaustive_aml_guard():
    k = make_qam(1024)
    with pytest.raises(SpaceTooLarge):
        det.exhaustive_aml(np.zeros(4, dtype=complex), np.eye(4, dtype=complex),
                           100.0, np.eye(8) * 1e-4, k)
