"""Diagnostics for the hardness of exact ML detection.

Closed-form radius statistics of the residual sphere (with their
Monte-Carlo counterparts), the phase-aligned minimum distance, and the
counterexample showing the exact log-likelihood is not concave.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .channel import PhaseNoiseModel
from .constellation import Constellation
from .errors import UnsupportedModel
from .likelihood_bounds import quad_loglik


@dataclass(frozen=True)
class RadiusStats:
    e_r2: float
    var_r2: float
    w1: float
    w2: float
    w3: float
    pbar2: float
    sigma2: float


def expected_radius(n_t: int, n_r: int, gamma: float, sigma_t: float, sigma_r: float) -> float:
    """E||Y - H X||^2 for Rayleigh H, uniform unit-energy input, iid phases."""
    return 2.0 * n_t * n_r * (1.0 - np.exp(-(sigma_r**2 + sigma_t**2) / 2.0)) + n_r / gamma


def radius_variance(n_t: int, n_r: int, gamma: float, sigma_t: float, sigma_r: float,
                    pbar2: float) -> RadiusStats:
    """Closed-form Var(R^2); pbar2 is E|X|^4 of the unit-energy alphabet."""
    if pbar2 < 1.0:
        raise ValueError("pbar2 must be >= 1 for a unit-energy constellation")
    s2 = (sigma_t**2 + sigma_r**2) / 2.0
    base = 1.0 - np.exp(-s2)
    w1 = 2.0 * pbar2 * (1.0 - 2.0 * np.exp(-s2) + np.exp(-2.0 * s2) * np.cosh(2.0 * s2)) - base**2
    w2 = 2.0 * (1.0 - 2.0 * np.exp(-s2) + np.exp(-2.0 * s2) * np.cosh(sigma_r**2)) - base**2
    w3 = pbar2 * (1.0 - 2.0 * np.exp(-s2) + np.exp(-2.0 * s2) * np.cosh(sigma_t**2)) - base**2
    var_v2 = 4.0 * n_t * n_r * (w1 + w2 * (n_t - 1) + w3 * (n_r - 1))
    e_v2 = 2.0 * n_t * n_r * base
    var_r2 = var_v2 + 2.0 * n_r / gamma**2 + 2.0 * e_v2 / gamma
    return RadiusStats(e_r2=e_v2 + n_r / gamma, var_r2=var_r2, w1=w1, w2=w2, w3=w3,
                       pbar2=pbar2, sigma2=s2)


def sample_radius_sq(n_t: int, n_r: int, gamma: float, sigma_t: float, sigma_r: float,
                     k: Constellation, trials: int, rng: np.random.Generator,
                     batch: int = 2000) -> np.ndarray:
    """Monte-Carlo draws of R^2 under the radius-statistics hypothesis."""
    out = np.empty(trials)
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        h = (rng.standard_normal((m, n_r, n_t)) + 1j * rng.standard_normal((m, n_r, n_t))) / np.sqrt(2)
        x = k.points[rng.integers(0, k.order, (m, n_t))]
        tht = rng.standard_normal((m, n_t)) * sigma_t
        thr = rng.standard_normal((m, n_r)) * sigma_r
        z = (rng.standard_normal((m, n_r)) + 1j * rng.standard_normal((m, n_r))) * np.sqrt(0.5 / gamma)
        hx = np.einsum("mrt,mt->mr", h, x)
        hx_pn = np.exp(1j * thr) * np.einsum("mrt,mt->mr", h, np.exp(1j * tht) * x)
        out[done:done + m] = np.sum(np.abs(hx_pn + z - hx) ** 2, axis=1)
        done += m
    return out


def _aligned_objective(theta_t: np.ndarray, x: np.ndarray, y_abs: np.ndarray,
                       h: np.ndarray) -> float:
    """Distance after absorbing the optimal receive phases in closed form."""
    u = h @ (np.exp(1j * theta_t) * x)
    return float(np.sum((y_abs - np.abs(u)) ** 2))


def min_phase_distance(x: np.ndarray, y: np.ndarray, h: np.ndarray,
                       iters: int = 200, restarts: int = 20,
                       seed: int = 0) -> float:
    """Upper estimate of min over all phases of ||y - H_theta x||^2.

    Receive phases have a per-coordinate closed-form optimum; transmit
    phases follow damped gradient steps with backtracking (monotone per
    restart), from multiple random starts.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    n_t = x.shape[0]
    y_abs = np.abs(y)
    spec = np.linalg.norm(h, 2) ** 2 * max(1.0, float(np.max(np.abs(x)) ** 2))
    step0 = 0.5 / max(spec, 1e-12)
    rng = np.random.default_rng(seed)
    best = np.inf
    for restart in range(restarts):
        theta = np.zeros(n_t) if restart == 0 else rng.uniform(-np.pi, np.pi, n_t)
        val = _aligned_objective(theta, x, y_abs, h)
        for _ in range(iters):
            u = h @ (np.exp(1j * theta) * x)
            au = np.abs(u)
            phase_u = np.where(au > 0, u / np.where(au > 0, au, 1.0), 0.0)
            # d|u_k|/d theta_l = Re(conj(phase_u_k) * j h_kl e^{j theta_l} x_l)
            jac = (np.conj(phase_u)[:, None] * (1j * h * (np.exp(1j * theta) * x)[None, :])).real
            grad = 2.0 * ((au - y_abs) @ jac)
            step = step0
            improved = False
            for _ in range(30):
                cand = theta - step * grad
                cval = _aligned_objective(cand, x, y_abs, h)
                if cval < val:
                    theta, val = cand, cval
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        best = min(best, val)
    return best


def non_concavity_witness(z: np.ndarray, h: np.ndarray) -> dict:
    """The midpoint construction: y = Hz, x = j|z| has m(x) = m(-x) = 0 but
    m(0) = ||y||^2, so midpoint concavity of -m fails."""
    y = h @ z
    x = 1j * np.abs(z)
    m_plus = min_phase_distance(x, y, h)
    m_minus = min_phase_distance(-x, y, h)
    m_zero = float(np.sum(np.abs(y) ** 2))
    return {"m_plus": m_plus, "m_minus": m_minus, "m_zero": m_zero,
            "midpoint_violated": 0.5 * (m_plus + m_minus) < m_zero - 1e-6}


def high_snr_ratio_check(x: np.ndarray, y: np.ndarray, h: np.ndarray,
                         pn: PhaseNoiseModel, gamma_list: Sequence[float],
                         m_value: Optional[float] = None) -> List[Tuple[float, float, float]]:
    """Table of (gamma, -f_quad/gamma, |gap to m|) along increasing SNR."""
    if pn.family not in ("gaussian_iid", "gaussian_cov", "none"):
        raise UnsupportedModel(f"high-SNR check defined for Gaussian families, got {pn.family}")
    m = min_phase_distance(x, y, h) if m_value is None else m_value
    rows = []
    for gamma in gamma_list:
        ratio = -quad_loglik(x, y, h, gamma, pn.q_theta).value / gamma
        rows.append((float(gamma), float(ratio), float(abs(ratio - m))))
    return rows
