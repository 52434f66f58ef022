import numpy as np
import pytest

from pnmimo import channel as ch
from pnmimo.errors import InvalidSpacing
from pnmimo.rng import trial_rng


def test_rayleigh_moments():
    rng = np.random.default_rng(0)
    h = ch.sample_rayleigh(100, 100, rng).h
    assert abs(np.mean(h)) < 0.02
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, rel=0.02)
    # real and imaginary parts carry half the power each
    assert np.var(h.real) == pytest.approx(0.5, rel=0.05)


def test_rayleigh_reproducible():
    a = ch.sample_rayleigh(4, 4, trial_rng(5, 0, 3, "channel")).h
    b = ch.sample_rayleigh(4, 4, trial_rng(5, 0, 3, "channel")).h
    np.testing.assert_array_equal(a, b)
    c = ch.sample_rayleigh(4, 4, trial_rng(5, 0, 4, "channel")).h
    assert not np.array_equal(a, c)


def test_identity_channel():
    inst = ch.identity_channel(3)
    np.testing.assert_array_equal(inst.h, np.eye(3))
    assert inst.condition_number() == pytest.approx(1.0)


def test_los_mimo_geometry():
    inst = ch.make_los_mimo(1.0)
    assert inst.h.shape == (4, 4)
    for j in range(4):
        assert np.linalg.norm(inst.h[:, j]) ** 2 == pytest.approx(4.0, rel=1e-12)
    # full spacing gives orthogonal columns
    g = inst.h.conj().T @ inst.h
    np.testing.assert_allclose(g, 4.0 * np.eye(4), atol=1e-10)
    assert inst.condition_number() == pytest.approx(1.0, abs=1e-9)
    # smaller spacing means a worse conditioned channel
    c33 = ch.make_los_mimo(0.33).condition_number()
    c70 = ch.make_los_mimo(0.7).condition_number()
    assert c33 > c70 > 1.0


def test_los_mimo_bad_spacing():
    for s in (0.0, -0.5, 1.5):
        with pytest.raises(InvalidSpacing):
            ch.make_los_mimo(s)


def test_phase_noise_sampling_stats():
    deg = np.pi / 180.0
    model = ch.gaussian_iid(2, 3, 3.0 * deg, 5.0 * deg)
    rng = np.random.default_rng(11)
    draws = np.array([ch.sample_phase_noise(model, rng) for _ in range(20000)])
    np.testing.assert_allclose(np.var(draws[:, :2], axis=0), (3 * deg) ** 2, rtol=0.06)
    np.testing.assert_allclose(np.var(draws[:, 2:], axis=0), (5 * deg) ** 2, rtol=0.06)


def test_uniform_phase_noise_variance_matched():
    deg = np.pi / 180.0
    model = ch.uniform_iid(1, 1, 4.0 * deg, 2.0 * deg)
    rng = np.random.default_rng(3)
    draws = np.array([ch.sample_phase_noise(model, rng) for _ in range(40000)])
    half_t = np.sqrt(3.0) * 4 * deg
    assert np.max(np.abs(draws[:, 0])) <= half_t
    assert np.var(draws[:, 0]) == pytest.approx((4 * deg) ** 2, rel=0.05)
    assert np.var(draws[:, 1]) == pytest.approx((2 * deg) ** 2, rel=0.05)


def test_no_phase_noise_model():
    model = ch.no_phase_noise(2, 2)
    assert model.is_zero
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(ch.sample_phase_noise(model, rng), np.zeros(4))


def test_gaussian_cov_validation():
    q = np.eye(3)
    model = ch.gaussian_cov(q, 1, 2)
    assert model.dim == 3
    with pytest.raises(ValueError):
        ch.gaussian_cov(np.eye(4), 1, 2)
    bad = np.eye(3)
    bad[0, 1] = 0.5
    with pytest.raises(ValueError):
        ch.gaussian_cov(bad, 1, 2)


def test_phase_rotated_ordering():
    # transmit angles come first in the stacked vector
    h = np.array([[1.0 + 0j, 0.0], [0.0, 1.0 + 0j]])
    x = np.array([1.0 + 0j, 1.0 + 0j])
    theta = np.array([0.3, 0.0, 0.0, -0.2])
    out = ch.phase_rotated(h, x, theta)
    assert out[0] == pytest.approx(np.exp(1j * 0.3))
    assert out[1] == pytest.approx(np.exp(-1j * 0.2))


def test_apply_channel_noiseless_and_magnitude():
    inst = ch.identity_channel(2)
    x = np.array([1.0 + 1j, -1.0 + 0j])
    theta = np.array([0.1, -0.4, 0.2, 0.05])
    obs = ch.apply_channel(inst, x, theta, gamma=100.0, noiseless=True)
    np.testing.assert_allclose(np.abs(obs.y), np.abs(x), atol=1e-12)
    np.testing.assert_array_equal(obs.x_true, x)


def test_apply_channel_noise_variance():
    inst = ch.identity_channel(1)
    x = np.array([0.0 + 0j])
    theta = np.zeros(2)
    gamma = 4.0
    rng = np.random.default_rng(9)
    pw = np.mean([np.abs(ch.apply_channel(inst, x, theta, gamma, rng).y[0]) ** 2
                  for _ in range(20000)])
    assert pw == pytest.approx(1.0 / gamma, rel=0.05)


def test_apply_channel_rejects_bad_gamma():
    inst = ch.identity_channel(1)
    with pytest.raises(ValueError):
        ch.apply_channel(inst, np.array([1.0 + 0j]), np.zeros(2), 0.0, noiseless=True)
