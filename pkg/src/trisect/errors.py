"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
SamplingError -> 3. Plain ValueError is used for programming-level
argument errors inside the library.
"""


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


class DataError(Exception):
    """Unreadable, malformed, or unusable input data."""


class SamplingError(Exception):
    """A rejection-sampling budget was exhausted before success."""
