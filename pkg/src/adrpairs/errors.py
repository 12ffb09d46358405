"""Exception hierarchy shared by all adrpairs modules."""


class AdrPairsError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(AdrPairsError, ValueError):
    """Input violates a documented precondition or type invariant."""


class ParseError(AdrPairsError, ValueError):
    """Input text could not be parsed (bad number, bad date, missing column)."""


class TransportError(AdrPairsError, OSError):
    """Network fetch failed before a body could be parsed."""


class EvaluationError(AdrPairsError, ArithmeticError):
    """A numerical evaluation produced a non-finite result."""
