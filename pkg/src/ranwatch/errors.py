"""Exception types shared across the pipeline.

The CLI maps these onto exit codes, so every stage raises one of the two
subclasses rather than bare ValueError/OSError where the cause is clear.
"""


class RanwatchError(Exception):
    """Base class for pipeline errors."""


class DataError(RanwatchError):
    """Input data is missing, malformed, or inconsistent."""


class ConfigError(RanwatchError):
    """A configuration, rule, or scenario file is invalid."""
