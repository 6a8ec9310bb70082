"""Package exception types."""


class EstimatorError(RuntimeError):
    """An information-gain or gradient estimate could not be formed."""


class ConfigError(ValueError):
    """An experiment configuration failed validation; message names the field."""
