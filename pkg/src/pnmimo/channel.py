"""Channel matrices, phase-noise models, and noisy observations."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidSpacing, UnsupportedModel


@dataclass(frozen=True)
class ChannelInstance:
    """A realized channel matrix with provenance metadata."""

    h: np.ndarray                      # (n_r, n_t) complex
    model_tag: str = "fixed"           # rayleigh | los_mimo | identity | fixed
    spacing_fraction: Optional[float] = None

    @property
    def n_r(self) -> int:
        return self.h.shape[0]

    @property
    def n_t(self) -> int:
        return self.h.shape[1]

    def condition_number(self) -> float:
        s = np.linalg.svd(self.h, compute_uv=False)
        return float(s[0] / s[-1])


@dataclass(frozen=True)
class PhaseNoiseModel:
    """Joint model for the n_t transmit + n_r receive phase angles.

    The angle vector is ordered transmit block first, then receive block.
    q_theta is always the (variance-matched) covariance, also for the
    uniform family, so detectors can consume it uniformly.
    """

    family: str                       # gaussian_iid | gaussian_cov | uniform_iid | none
    n_t: int
    n_r: int
    sigma_t: float = 0.0              # radians
    sigma_r: float = 0.0              # radians
    q_theta: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.n_t + self.n_r

    @property
    def is_zero(self) -> bool:
        return self.family == "none" or not np.any(self.q_theta)


def _iid_cov(n_t: int, n_r: int, sigma_t: float, sigma_r: float) -> np.ndarray:
    q = np.zeros(n_t + n_r)
    q[:n_t] = sigma_t**2
    q[n_t:] = sigma_r**2
    return np.diag(q)


def gaussian_iid(n_t: int, n_r: int, sigma_t: float, sigma_r: float) -> PhaseNoiseModel:
    return PhaseNoiseModel("gaussian_iid", n_t, n_r, sigma_t, sigma_r,
                           _iid_cov(n_t, n_r, sigma_t, sigma_r))


def uniform_iid(n_t: int, n_r: int, sigma_t: float, sigma_r: float) -> PhaseNoiseModel:
    """Uniform angles on [-sqrt(3)*sigma, +sqrt(3)*sigma], variance-matched."""
    return PhaseNoiseModel("uniform_iid", n_t, n_r, sigma_t, sigma_r,
                           _iid_cov(n_t, n_r, sigma_t, sigma_r))


def gaussian_cov(q_theta: np.ndarray, n_t: int, n_r: int) -> PhaseNoiseModel:
    q = np.asarray(q_theta, dtype=np.float64)
    if q.shape != (n_t + n_r, n_t + n_r):
        raise ValueError("q_theta shape does not match n_t + n_r")
    if not np.allclose(q, q.T, atol=1e-10):
        raise ValueError("q_theta must be symmetric")
    return PhaseNoiseModel("gaussian_cov", n_t, n_r, q_theta=q)


def no_phase_noise(n_t: int, n_r: int) -> PhaseNoiseModel:
    return PhaseNoiseModel("none", n_t, n_r, q_theta=np.zeros((n_t + n_r, n_t + n_r)))


@dataclass(frozen=True)
class Observation:
    """One received vector plus everything needed to regenerate it."""

    y: np.ndarray               # (n_r,) complex
    gamma: float                # linear SNR
    x_true: np.ndarray          # (n_t,) complex
    theta_true: np.ndarray      # (n_t + n_r,) radians
    z: np.ndarray = field(default=None, repr=False)   # stored AWGN draw


def sample_rayleigh(n_t: int, n_r: int, rng: np.random.Generator) -> ChannelInstance:
    """i.i.d. circularly-symmetric complex Gaussian entries, unit variance."""
    h = (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / np.sqrt(2.0)
    return ChannelInstance(h=h, model_tag="rayleigh")


def identity_channel(n: int) -> ChannelInstance:
    return ChannelInstance(h=np.eye(n, dtype=complex), model_tag="identity")


def make_los_mimo(spacing_fraction: float) -> ChannelInstance:
    """Deterministic dual-polarized 4x4 line-of-sight channel.

    Two-element arrays at both ends; the inter-element phase grows
    quadratically with the element separation (Fresnel regime), reaching
    pi/2 (orthogonal columns) at the optimal spacing. The 2x2 array
    response is Kronecker-multiplied with I_2 for the two polarizations
    and columns are scaled to squared norm n_r.
    """
    if not (0.0 < spacing_fraction <= 1.0):
        raise InvalidSpacing(f"spacing_fraction must be in (0, 1], got {spacing_fraction}")
    phi = 0.5 * np.pi * spacing_fraction**2
    m = np.array([[1.0, np.exp(1j * phi)],
                  [np.exp(1j * phi), 1.0]])
    h = np.kron(m, np.eye(2))
    h *= np.sqrt(4.0) / np.linalg.norm(h[:, 0])   # each column has squared norm n_r = 4
    return ChannelInstance(h=h, model_tag="los_mimo", spacing_fraction=spacing_fraction)


def sample_phase_noise(model: PhaseNoiseModel, rng: np.random.Generator) -> np.ndarray:
    """One draw of the angle vector (transmit block first)."""
    d = model.dim
    if model.family == "none":
        return np.zeros(d)
    if model.family == "gaussian_iid":
        std = np.sqrt(np.diag(model.q_theta))
        return rng.standard_normal(d) * std
    if model.family == "uniform_iid":
        half = np.sqrt(3.0) * np.sqrt(np.diag(model.q_theta))
        return rng.uniform(-1.0, 1.0, d) * half
    if model.family == "gaussian_cov":
        # Eigen-based factor handles PSD-singular covariances.
        w, v = np.linalg.eigh(model.q_theta)
        w = np.clip(w, 0.0, None)
        return v @ (np.sqrt(w) * rng.standard_normal(d))
    raise UnsupportedModel(model.family)


def phase_rotated(h: np.ndarray, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Lambda_R H Lambda_T x for the given angle vector."""
    n_t = x.shape[0]
    return np.exp(1j * theta[n_t:]) * (h @ (np.exp(1j * theta[:n_t]) * x))


def apply_channel(ch: ChannelInstance, x: np.ndarray, theta: np.ndarray, gamma: float,
                  rng: Optional[np.random.Generator] = None, noiseless: bool = False) -> Observation:
    """Generate y = Lambda_R H Lambda_T x + z with per-entry noise variance 1/gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    mean = phase_rotated(ch.h, x, theta)
    if noiseless:
        z = np.zeros(ch.n_r, dtype=complex)
    else:
        z = (rng.standard_normal(ch.n_r) + 1j * rng.standard_normal(ch.n_r)) * np.sqrt(0.5 / gamma)
    return Observation(y=mean + z, gamma=float(gamma), x_true=np.array(x, dtype=complex),
                       theta_true=np.array(theta, dtype=float), z=z)
