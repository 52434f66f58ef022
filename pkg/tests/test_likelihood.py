import numpy as np
import pytest

from pnmimo import channel as ch
from pnmimo import likelihood_bounds as lb
from pnmimo.constellation import make_qam
from pnmimo.errors import DimensionTooLarge

DEG = np.pi / 180.0


def test_residual_norms_match_direct_loop():
    rng = np.random.default_rng(0)
    h = ch.sample_rayleigh(2, 3, rng).h
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    thetas = rng.normal(0, 0.05, (20, 5))
    got = lb.residual_sq_norms(y, h, x, thetas)
    for t, g in zip(thetas, got):
        r = y - ch.phase_rotated(h, x, t)
        assert np.sum(np.abs(r) ** 2) == pytest.approx(g, rel=1e-10)


def test_mc_loglik_zero_q_exact():
    rng = np.random.default_rng(1)
    h = ch.sample_rayleigh(1, 1, rng).h
    x = np.array([1.0 + 0j])
    y = np.array([0.8 + 0.1j])
    est = lb.mc_loglik(x, y, h, 500.0, np.zeros((2, 2)), 100, rng)
    assert est.std_error == 0.0
    assert est.value == pytest.approx(-500.0 * np.sum(np.abs(y - h @ x) ** 2))


def test_mc_loglik_validates_s():
    with pytest.raises(ValueError):
        lb.mc_loglik(np.array([1.0 + 0j]), np.array([1.0 + 0j]),
                     np.eye(1, dtype=complex), 1.0, np.eye(2) * 1e-3, 1,
                     np.random.default_rng(0))


def test_quad_matches_mc_on_random_scalar_instances():
    # the deterministic quadrature must sit inside the Monte-Carlo error bars
    pn = ch.gaussian_iid(1, 1, 3 * DEG, 3 * DEG)
    k = make_qam(64)
    misses = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        h = ch.sample_rayleigh(1, 1, rng).h
        x = k.points[rng.integers(0, 64, 1)]
        theta = ch.sample_phase_noise(pn, rng)
        obs = ch.apply_channel(ch.ChannelInstance(h=h), x, theta, 1000.0, rng)
        quad = lb.quad_loglik(x, obs.y, h, 1000.0, pn.q_theta)
        mc = lb.mc_loglik(x, obs.y, h, 1000.0, pn.q_theta, 10**6,
                          np.random.default_rng(10000 + seed))
        # compare on the likelihood scale where the std error lives
        rel = abs(np.exp(quad.value - mc.value) - 1.0)
        if rel > 3.0 * mc.std_error:
            misses += 1
    assert misses <= 2


def test_quad_node_doubling_converged():
    pn = ch.gaussian_iid(1, 1, 3 * DEG, 3 * DEG)
    rng = np.random.default_rng(5)
    h = ch.sample_rayleigh(1, 1, rng).h
    x = np.array([1.0 + 1j]) / np.sqrt(2)
    y = h @ x + 0.01 * (rng.standard_normal(1) + 1j * rng.standard_normal(1))
    a = lb.quad_loglik(x, y, h, 10**4, pn.q_theta, n_nodes=64).value
    b = lb.quad_loglik(x, y, h, 10**4, pn.q_theta, n_nodes=128).value
    assert abs(a - b) < 1e-8


def test_quad_dimension_guard():
    pn = ch.gaussian_iid(2, 2, 3 * DEG, 3 * DEG)
    with pytest.raises(DimensionTooLarge):
        lb.quad_loglik(np.ones(2, dtype=complex), np.ones(2, dtype=complex),
                       np.eye(2, dtype=complex), 100.0, pn.q_theta)


def test_quad_zero_q_exact():
    h = np.eye(1, dtype=complex)
    x = np.array([1.0 + 0j])
    y = np.array([0.5 + 0.2j])
    est = lb.quad_loglik(x, y, h, 200.0, np.zeros((2, 2)))
    assert est.value == pytest.approx(-200.0 * np.sum(np.abs(y - x) ** 2))


def test_one_dim_likelihood_limits():
    # no phase noise collapses to the plain Gaussian factor
    v = lb.one_dim_likelihood(1.0 + 0j, 1.1 + 0j, 50.0, 0.0)
    assert v == pytest.approx(np.exp(-50.0 * 0.01), rel=1e-9)
    # tiny variance approaches the same limit
    v2 = lb.one_dim_likelihood(1.0 + 0j, 1.1 + 0j, 50.0, 1e-12)
    assert v2 == pytest.approx(v, rel=1e-4)
    with pytest.raises(ValueError):
        lb.one_dim_likelihood(1.0 + 0j, 1.0 + 0j, 50.0, -1.0)


def test_one_dim_likelihood_against_mc():
    gamma = 1000.0
    ssq = 2 * (3 * DEG) ** 2
    rng = np.random.default_rng(2)
    phi = rng.standard_normal(2 * 10**6) * np.sqrt(ssq)
    mc = np.mean(np.exp(-gamma * np.abs(1.0 - np.exp(1j * phi)) ** 2))
    v = lb.one_dim_likelihood(1.0 + 0j, 1.0 + 0j, gamma, ssq)
    assert v == pytest.approx(mc, rel=0.02)


def test_identity_channel_likelihood_factorizes():
    # for H = I the joint phase integral is a product of scalar factors
    pn = ch.gaussian_iid(2, 2, 3 * DEG, 2 * DEG)
    k = make_qam(16)
    rng = np.random.default_rng(9)
    x = k.points[rng.integers(0, 16, 2)]
    y = x * np.exp(1j * rng.normal(0, 0.05, 2)) + 0.01 * (
        rng.standard_normal(2) + 1j * rng.standard_normal(2))
    gamma = 500.0
    ssq = (3 * DEG) ** 2 + (2 * DEG) ** 2
    product = np.prod([lb.one_dim_likelihood(x[i], y[i], gamma, ssq) for i in range(2)])
    mc = lb.mc_loglik(x, y, np.eye(2, dtype=complex), gamma, pn.q_theta,
                      2 * 10**6, np.random.default_rng(77))
    assert np.log(product) == pytest.approx(mc.value, abs=4 * mc.std_error + 1e-6)


def test_mc_std_error_calibrated():
    # delta-method error bar should match the spread over repetitions
    pn = ch.gaussian_iid(1, 1, 3 * DEG, 3 * DEG)
    x = np.array([1.0 + 0j])
    y = np.array([1.0 + 0j])
    h = np.eye(1, dtype=complex)
    vals, ses = [], []
    for rep in range(200):
        est = lb.mc_loglik(x, y, h, 10**4, pn.q_theta, 10**4, np.random.default_rng(rep))
        vals.append(est.value)
        ses.append(est.std_error)
    emp = np.std(vals)
    assert np.mean(ses) == pytest.approx(emp, rel=0.5)


def test_paired_compare_antisymmetric():
    pn = ch.gaussian_iid(2, 2, 3 * DEG, 3 * DEG)
    k = make_qam(16)
    rng = np.random.default_rng(3)
    h = ch.sample_rayleigh(2, 2, rng).h
    xa = k.points[[0, 5]]
    xb = k.points[[1, 5]]
    y = h @ xa + 0.05 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    d1, s1 = lb.paired_mc_compare(xa, xb, y, h, 100.0, pn.q_theta, 10**4,
                                  np.random.default_rng(42))
    d2, s2 = lb.paired_mc_compare(xb, xa, y, h, 100.0, pn.q_theta, 10**4,
                                  np.random.default_rng(42))
    assert d1 == pytest.approx(-d2, abs=1e-12)
    assert s1 == pytest.approx(s2, abs=1e-12)


def test_batch_phase_samples_families():
    rng = np.random.default_rng(4)
    g = lb.batch_phase_samples(ch.gaussian_iid(1, 1, 5 * DEG, 2 * DEG), 50000, rng)
    np.testing.assert_allclose(np.var(g, axis=0), [(5 * DEG) ** 2, (2 * DEG) ** 2], rtol=0.05)
    u = lb.batch_phase_samples(ch.uniform_iid(1, 1, 5 * DEG, 2 * DEG), 50000, rng)
    assert np.max(np.abs(u[:, 0])) <= np.sqrt(3) * 5 * DEG + 1e-12
    np.testing.assert_allclose(np.var(u, axis=0), [(5 * DEG) ** 2, (2 * DEG) ** 2], rtol=0.05)
