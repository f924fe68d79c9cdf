"""Exception types shared across the package.

The CLI maps these onto exit codes: config/usage problems exit 2, data
problems exit 3, numerical failures exit 4, and a simulation that produced
partial results exits 1.
"""


class GptdfError(Exception):
    """Base class for all package errors."""


class ConfigError(GptdfError):
    """Malformed configuration, scenario, or benchmark description."""


class DataError(GptdfError):
    """Unusable input data: empty, unparseable, degenerate, or too short."""


class NumericalError(GptdfError):
    """Linear-algebra failure that survived all numerical safeguards."""


class PartialFailure(GptdfError):
    """A multi-node run finished but one or more nodes failed."""
