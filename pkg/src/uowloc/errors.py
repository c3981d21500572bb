"""Exception types shared across the package."""


class UowlocError(Exception):
    """Base class for all package-specific errors."""


class DegenerateGeometry(UowlocError):
    """Source/anchor geometry makes the requested quantity undefined."""


class InvalidChannel(UowlocError):
    """Channel parameters outside their admissible range."""


class InvalidNoise(UowlocError):
    """Noise model incompatible with the requested operation."""


class SingularCovariance(UowlocError):
    """A per-anchor covariance is not invertible (condition number > 1e12)."""


class SingularFim(UowlocError):
    """Fisher information matrix is not invertible (condition number > 1e12)."""


class EmptyInput(UowlocError):
    """An operation that needs at least one element received none."""


class AllWeightsSingular(UowlocError):
    """No usable weight matrix could be formed for any anchor."""


class GenerationFailed(UowlocError):
    """Scenario generation exhausted its retry budget."""


class ConfigError(UowlocError):
    """Base class for configuration problems (maps to CLI exit code 2)."""


class ParseError(ConfigError):
    """Config document is not syntactically valid or has unknown keys."""


class ValidationError(ConfigError):
    """Config values are out of range or inconsistent."""


class BackendUnavailable(UowlocError):
    """The requested compute backend is not installed."""
