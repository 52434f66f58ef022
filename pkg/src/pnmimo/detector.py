"""Detectors for the phase-noise MIMO channel.

Naive LMMSE and naive ML (sphere-decoder NND) ignore the phase noise.
The approximate log-likelihood scores a candidate through the covariance
of the linearized self-interference; self-interference whitening (SIW)
estimates that covariance from an initial guess, whitens, and re-detects.
"""

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .constellation import Constellation, quantize_vector
from .errors import NumericalError, SpaceTooLarge
from .sphere import real_nnd

EXHAUSTIVE_GUARD = 2**20


@dataclass(frozen=True)
class WhitenedSystem:
    """Real linearization (A, b) and self-interference covariance W."""

    a_mat: np.ndarray        # (2 n_r, n_t + n_r)
    b_vec: np.ndarray        # (2 n_r,)
    w_mat: np.ndarray        # (2 n_r, 2 n_r) SPD
    chol_lower: np.ndarray   # lower-triangular, chol_lower @ chol_lower.T == w_mat


@dataclass
class DetectionResult:
    x_hat: np.ndarray
    method: str              # lmmse | naive_ml | selection | siw | siw_iter | exhaustive_aml
    score: float             # approximate log-likelihood of x_hat
    nnd_node_count: int = 0


def build_ab(h: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Real linearization of the phase-rotated residual around theta = 0."""
    hx_cols = h * x[None, :]          # h @ diag(x)
    a_top = np.hstack([hx_cols.imag, np.diag(y.imag)])
    a_bot = np.hstack([-hx_cols.real, -np.diag(y.real)])
    a_mat = np.vstack([a_top, a_bot])
    r = y - h @ x
    b_vec = np.concatenate([r.real, r.imag])
    return a_mat, b_vec


def build_w(a_mat: np.ndarray, q_theta: np.ndarray, gamma: float) -> WhitenedSystem:
    """W = I + 2 gamma A Q A^T with its lower Cholesky factor."""
    m = a_mat.shape[0]
    w = np.eye(m) + 2.0 * gamma * (a_mat @ q_theta @ a_mat.T)
    w = 0.5 * (w + w.T)
    try:
        chol = np.linalg.cholesky(w)
    except np.linalg.LinAlgError as exc:   # pragma: no cover - I + PSD is SPD
        raise NumericalError("Cholesky of W failed") from exc
    return WhitenedSystem(a_mat=a_mat, b_vec=None, w_mat=w, chol_lower=chol)


def whitened_system(x: np.ndarray, y: np.ndarray, h: np.ndarray, gamma: float,
                    q_theta: np.ndarray) -> WhitenedSystem:
    a_mat, b_vec = build_ab(h, x, y)
    ws = build_w(a_mat, q_theta, gamma)
    return WhitenedSystem(a_mat=a_mat, b_vec=b_vec, w_mat=ws.w_mat, chol_lower=ws.chol_lower)


def approx_loglik(x: np.ndarray, y: np.ndarray, h: np.ndarray, gamma: float,
                  q_theta: np.ndarray) -> float:
    """-gamma b^T W^-1 b - (1/2) ln det W, via Cholesky solves only."""
    ws = whitened_system(x, y, h, gamma, q_theta)
    u = solve_triangular(ws.chol_lower, ws.b_vec, lower=True, check_finite=False)
    return float(-gamma * (u @ u) - np.sum(np.log(np.diag(ws.chol_lower))))


def real_embed(y: np.ndarray, h: np.ndarray):
    """Stack [Re; Im] of y and the matching 2x2 block matrix of h."""
    y_r = np.concatenate([y.real, y.imag])
    h_r = np.block([[h.real, -h.imag], [h.imag, h.real]])
    return y_r, h_r


def to_complex(x_r: np.ndarray) -> np.ndarray:
    n = x_r.shape[0] // 2
    return x_r[:n] + 1j * x_r[n:]


def snr_ceiling(gamma: float, gamma_max: Optional[float]) -> float:
    """Effective SNR used inside detector scoring; channel noise unchanged."""
    if gamma_max is None:
        return gamma
    if gamma_max <= 0:
        raise ValueError("gamma_max must be positive")
    return min(gamma, gamma_max)


def default_gamma_max(order: int) -> float:
    """Scoring-SNR ceiling in linear units (40 dB up to 256-QAM, else 45 dB)."""
    return 10.0 ** 4.5 if order >= 1024 else 10.0 ** 4.0


def naive_lmmse(y: np.ndarray, h: np.ndarray, gamma: float, k: Constellation,
                q_theta: Optional[np.ndarray] = None) -> DetectionResult:
    """Quantized LMMSE filter output; the filter ignores the phase noise."""
    n_r = h.shape[0]
    filt = h.conj().T @ np.linalg.solve(np.eye(n_r) / gamma + h @ h.conj().T, y)
    x_hat = quantize_vector(filt, k)
    score = _score(x_hat, y, h, gamma, q_theta)
    return DetectionResult(x_hat=x_hat, method="lmmse", score=score)


def nnd(y: np.ndarray, h: np.ndarray, k: Constellation, gamma: float = 1.0,
        q_theta: Optional[np.ndarray] = None) -> DetectionResult:
    """Exact minimum-Euclidean-distance detection via sphere decoding."""
    y_r, h_r = real_embed(y, h)
    x_r, nodes = real_nnd(y_r, h_r, k.pam_levels)
    x_hat = to_complex(x_r)
    score = _score(x_hat, y, h, gamma, q_theta)
    return DetectionResult(x_hat=x_hat, method="naive_ml", score=score, nnd_node_count=nodes)


def _score(x_hat, y, h, gamma, q_theta) -> float:
    if q_theta is None:
        return float(-gamma * np.sum(np.abs(y - h @ x_hat) ** 2))
    return approx_loglik(x_hat, y, h, gamma, q_theta)


def _whitened_search(x_ref: np.ndarray, y: np.ndarray, h: np.ndarray, gamma: float,
                     q_theta: np.ndarray, k: Constellation):
    """Whiten with W estimated at x_ref, then run the real NND."""
    ws = whitened_system(x_ref, y, h, gamma, q_theta)
    y_r, h_r = real_embed(y, h)
    y_w = solve_triangular(ws.chol_lower, y_r, lower=True, check_finite=False)
    h_w = solve_triangular(ws.chol_lower, h_r, lower=True, check_finite=False)
    x_r, nodes = real_nnd(y_w, h_w, k.pam_levels)
    return to_complex(x_r), nodes


def siw_detect(y: np.ndarray, h: np.ndarray, gamma: float, q_theta: np.ndarray,
               k: Constellation) -> DetectionResult:
    """Self-interference whitening: two NND passes plus score-based acceptance."""
    res = _siw_rounds(y, h, gamma, q_theta, k, max_iter=1)
    res.method = "siw"
    return res


def siw_iterative(y: np.ndarray, h: np.ndarray, gamma: float, q_theta: np.ndarray,
                  k: Constellation, max_iter: int = 4) -> DetectionResult:
    """List extension of SIW: re-estimate W at the current best candidate
    each round; stop on a revisited point or after max_iter rounds."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    res = _siw_rounds(y, h, gamma, q_theta, k, max_iter=max_iter)
    res.method = "siw_iter"
    return res


def _siw_rounds(y, h, gamma, q_theta, k, max_iter):
    lmmse = naive_lmmse(y, h, gamma, k, q_theta)
    ml0 = nnd(y, h, k, gamma, q_theta)
    # strict ">" keeps the naive-ML point on a tie
    if lmmse.score > ml0.score:
        incumbent, other = lmmse, ml0
    else:
        incumbent, other = ml0, lmmse
    cand = [incumbent.x_hat, other.x_hat]
    scores = [incumbent.score, other.score]
    nodes = ml0.nnd_node_count
    best = 0
    for _ in range(max_iter):
        x_new, n = _whitened_search(cand[best], y, h, gamma, q_theta, k)
        nodes += n
        if any(np.array_equal(x_new, c) for c in cand):
            break
        cand.append(x_new)
        scores.append(approx_loglik(x_new, y, h, gamma, q_theta))
        # argmax with first-occurrence ties: the new point must win strictly
        if scores[-1] > scores[best]:
            best = len(cand) - 1
    return DetectionResult(x_hat=cand[best], method="siw", score=scores[best],
                           nnd_node_count=nodes)


def exhaustive_aml(y: np.ndarray, h: np.ndarray, gamma: float, q_theta: np.ndarray,
                   k: Constellation) -> DetectionResult:
    """Exact argmax of the approximate log-likelihood over the full alphabet."""
    n_t = h.shape[1]
    size = k.order ** n_t
    if size > EXHAUSTIVE_GUARD:
        raise SpaceTooLarge(f"{k.order}^{n_t} = {size} candidates exceeds {EXHAUSTIVE_GUARD}")
    best_x, best_f = None, -np.inf
    for combo in itertools.product(k.points, repeat=n_t):
        x = np.array(combo)
        f = approx_loglik(x, y, h, gamma, q_theta)
        if f > best_f:
            best_x, best_f = x, f
    return DetectionResult(x_hat=best_x, method="exhaustive_aml", score=best_f)
