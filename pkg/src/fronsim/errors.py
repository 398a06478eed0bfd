"""Exception types shared across fronsim modules."""


class ConfigurationError(ValueError):
    """Invalid configuration, dimensions, or parameter values."""


class InvalidSourceError(ValueError):
    """A search was started from a non-free cell."""


class UndefinedMetricError(ValueError):
    """A metric was requested on a record that cannot define it."""


class GateUpdateError(RuntimeError):
    """An online gate update produced non-finite parameters."""
