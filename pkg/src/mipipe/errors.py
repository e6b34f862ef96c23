"""Exception types shared across the pipeline."""


class ArchiveError(ValueError):
    """Malformed or unreadable trial archive."""


class ConfigError(ValueError):
    """Invalid configuration value."""


class RankDeficientError(ValueError):
    """A covariance matrix required to be full rank is not."""


class CriterionUndefinedError(ValueError):
    """A selection criterion cannot be evaluated (e.g. flat histogram)."""
