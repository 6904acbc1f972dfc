"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class PrivtabError(Exception):
    """Base class for all package errors."""


class ConfigError(PrivtabError):
    """Invalid configuration or parameter value."""


class ParameterError(ConfigError):
    """A function argument violates its stated precondition."""


class DataError(PrivtabError):
    """Malformed or unusable input data."""


class ShapeError(DataError):
    """Array shapes do not conform for an operation."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        detail = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {detail}")


class NumericError(PrivtabError):
    """A computation produced NaN/Inf or failed to converge."""


class UndefinedMetricError(DataError):
    """A ranking metric is undefined for the given label configuration."""


class DegradedDataError(DataError):
    """Training data too degenerate to fit the requested model (e.g. one class)."""
