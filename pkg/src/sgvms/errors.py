"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A problem or run configuration violates a structural constraint."""


class UnsupportedConfigurationError(ConfigurationError):
    """The configuration is valid but outside what this code supports."""


class SolverError(RuntimeError):
    """A linear solve failed or produced an unusable result."""
