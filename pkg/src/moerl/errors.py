"""Error types shared across modules."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""
