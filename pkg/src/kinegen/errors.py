"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class ShapeError(ValueError):
    """Array shape or dimension mismatch."""


class ParseError(ValueError):
    """Malformed corpus, checkpoint, or config file."""


class DegenerateProfileError(ValueError):
    """Profile unusable for the requested operation (e.g. zero integral)."""


class UndefinedCorrelationError(ValueError):
    """Correlation undefined because an input series is constant."""


class BatchError(ValueError):
    """A training batch cannot be constructed as requested."""


class NumericalError(RuntimeError):
    """Training produced a non-finite loss or parameter value."""
