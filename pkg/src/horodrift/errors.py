"""Exception types raised across the package."""


class HorodriftError(Exception):
    """Base class for all package errors."""


class InvalidPoint(HorodriftError, ValueError):
    """A point, isometry or boundary point does not belong to the space."""


class InvalidPair(HorodriftError, ValueError):
    """Two boundary points were required to be distinct."""


class InvalidNet(HorodriftError, ValueError):
    """A net is empty, or misses points an operation needs."""


class InvalidAlpha(HorodriftError, ValueError):
    """Hölder exponent outside (0, 1]."""


class InvalidMeasure(HorodriftError, ValueError):
    """Malformed finitely supported measure."""


class LambdaViolation(HorodriftError, ValueError):
    """A measure is not supported in the declared truncation set G_lambda."""


class SupportExplosion(HorodriftError, RuntimeError):
    """Exact enumeration of a convolution power would exceed the atom cap."""


class InsufficientEscape(HorodriftError, RuntimeError):
    """A walk did not travel far enough to read off a forward limit."""


class InsufficientTrials(HorodriftError, RuntimeError):
    """Every cell of a large-deviation grid was censored."""


class ConfigError(HorodriftError, ValueError):
    """Experiment configuration failed validation."""
