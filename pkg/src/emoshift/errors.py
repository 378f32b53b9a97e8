"""Exception hierarchy shared across the pipeline.

Exit-code mapping for the CLI: DataError -> 1, ConfigError -> 2,
NumericalError -> 3. Anything else is a bug and propagates.
"""


class EmoshiftError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class DataError(EmoshiftError):
    """Invalid input data: bad shapes, ranges, missing corpus entries."""

    exit_code = 1


class ConfigError(EmoshiftError):
    """Invalid configuration or incompatible artifacts (hash mismatch)."""

    exit_code = 2


class NumericalError(EmoshiftError):
    """Numerical failure: non-finite losses, non-convergent matrix ops."""

    exit_code = 3


class NoFaceError(DataError):
    """A scorer could not locate a face in the input frame."""
