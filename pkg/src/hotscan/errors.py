"""Exception types shared across the package."""


class HotscanError(Exception):
    """Base class for all package errors."""


class ShapeError(HotscanError):
    """Dimension mismatch in a tensor or matrix operation."""


class ConfigError(HotscanError):
    """Invalid configuration value."""


class NumericalError(HotscanError):
    """A linear-algebra step failed (singular system, divergence, ...)."""


class DivergenceError(NumericalError):
    """Non-finite values appeared during an iterative solve."""


class DataError(HotscanError):
    """Malformed input data file."""
