"""Exception types shared across the package."""


class PnmimoError(Exception):
    """Base class for all package errors."""


class InvalidOrder(PnmimoError):
    """Requested QAM order is not a supported perfect square."""


class InvalidSpacing(PnmimoError):
    """LoS-MIMO spacing fraction outside (0, 1]."""


class NumericalError(PnmimoError):
    """A numerical factorization failed unexpectedly."""


class RankDeficient(PnmimoError):
    """Channel matrix is rank deficient after real embedding."""


class SpaceTooLarge(PnmimoError):
    """Exhaustive search space exceeds the guard limit."""


class DimensionTooLarge(PnmimoError):
    """Tensor quadrature guard: too many phase-noise dimensions."""


class UnsupportedModel(PnmimoError):
    """Operation not defined for this phase-noise family."""


class ConfigError(PnmimoError):
    """Invalid experiment configuration."""
