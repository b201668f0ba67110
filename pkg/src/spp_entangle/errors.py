"""Exception types raised across the package."""


class SppEntangleError(Exception):
    """Base class for all package errors."""


class ModeMismatch(SppEntangleError, ValueError):
    """Mode lists or element dimensions do not line up."""


class Unphysical(SppEntangleError, ValueError):
    """A parameter set would describe a device with gain or a super-normalized state."""


class DomainError(SppEntangleError, ValueError):
    """An argument lies outside its allowed range."""


class FitError(SppEntangleError, RuntimeError):
    """A sinusoid fit could not be performed."""


class EstimatorError(SppEntangleError, ValueError):
    """A statistical estimator received data it cannot process."""


class ConfigError(SppEntangleError, ValueError):
    """A run configuration failed to parse or validate."""
