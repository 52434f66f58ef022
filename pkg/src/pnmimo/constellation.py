"""Normalized square QAM alphabets and their real (PAM) factorization."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidOrder

SUPPORTED_ORDERS = (4, 16, 64, 256, 1024)


@dataclass(frozen=True)
class Constellation:
    """A square M-QAM alphabet with unit average energy.

    Points are ordered row-major over (Re, Im) PAM levels, ascending, so
    that tie-breaking and serialized outputs are reproducible.
    """

    order: int
    points: np.ndarray = field(repr=False)       # (M,) complex
    pam_levels: np.ndarray = field(repr=False)   # (sqrt(M),) real, ascending
    avg_energy: float = 1.0

    @property
    def label(self) -> str:
        return f"qam{self.order}"

    def min_sq_distance(self) -> float:
        """Minimum squared distance between distinct points."""
        step = self.pam_levels[1] - self.pam_levels[0]
        return float(step * step)

    def fourth_moment(self) -> float:
        """E|X|^4 under uniform symbols (>= 1 by Jensen for unit energy)."""
        return float(np.mean(np.abs(self.points) ** 4))


def make_qam(order: int) -> Constellation:
    """Build the unit-energy square QAM constellation of the given order."""
    if order not in SUPPORTED_ORDERS:
        raise InvalidOrder(f"unsupported QAM order {order}; pick one of {SUPPORTED_ORDERS}")
    m = int(round(np.sqrt(order)))
    levels = (2.0 * np.arange(m) - (m - 1)).astype(np.float64)
    scale = np.sqrt(np.mean(levels[:, None] ** 2 + levels[None, :] ** 2))
    pam = levels / scale
    # points are built from the scaled PAM levels so that the real-embedded
    # search reconstructs constellation entries bit-exactly
    points = (pam[:, None] + 1j * pam[None, :]).ravel()   # row-major over (Re, Im)
    avg = float(np.mean(np.abs(points) ** 2))
    points.setflags(write=False)
    pam.setflags(write=False)
    return Constellation(order=order, points=points, pam_levels=pam, avg_energy=avg)


def nearest_symbol(c: complex, k: Constellation) -> complex:
    """Closest constellation point to c; ties go to the earliest point."""
    idx = int(np.argmin(np.abs(k.points - c) ** 2))
    return complex(k.points[idx])


def quantize_vector(v: np.ndarray, k: Constellation) -> np.ndarray:
    """Componentwise nearest_symbol with the same first-minimum tie rule."""
    d = np.abs(v[:, None] - k.points[None, :]) ** 2
    return k.points[np.argmin(d, axis=1)]


def real_alphabet(k: Constellation) -> np.ndarray:
    """PAM levels used by the real-valued nearest-neighbor search."""
    return k.pam_levels
