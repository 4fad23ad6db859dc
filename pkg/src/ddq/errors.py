"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A config value or input database makes the requested operation impossible."""


class DimensionMismatchError(ValueError):
    """An input vector or gradient does not match the network's declared shapes."""


class TrainingError(RuntimeError):
    """A learning step produced non-finite values and was aborted."""
