"""Exception types shared across the package."""


class CtpirError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(CtpirError):
    """Tensor shapes are incompatible for the requested operation."""


class DomainError(CtpirError, ValueError):
    """An input value lies outside the mathematical domain of an operation."""


class ContractError(CtpirError):
    """A caller violated a documented precondition."""


class NumericError(CtpirError):
    """A computation produced NaN or Inf, or otherwise left the finite regime."""


class ParseError(CtpirError):
    """A data file could not be parsed; message carries file and location."""


class GraphValidationError(CtpirError):
    """A graph violates a structural invariant; message lists offending ids."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class GraphLookupError(CtpirError, KeyError):
    """An entity, relation, or year is not present in the graph."""

    def __str__(self):
        # KeyError would repr() the message; keep it readable.
        return Exception.__str__(self)


class RangeError(CtpirError):
    """A requested year range is not covered by the available snapshots."""
