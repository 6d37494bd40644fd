"""Exception taxonomy shared across the library.

The CLI maps these onto stable exit codes: usage problems exit 1, data
problems (parsing, file consistency) exit 2, numeric failures exit 3.
"""


class AlignmtError(Exception):
    """Base class for all library errors."""


class ShapeError(AlignmtError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(AlignmtError, ValueError):
    """An argument is outside the operation's domain."""


class ParseError(AlignmtError, ValueError):
    """A text input (alignment line, checkpoint, manifest) is malformed."""


class ConsistencyError(AlignmtError, ValueError):
    """Parallel inputs disagree (line counts, supervision counts, ...)."""


class ConfigurationError(AlignmtError, ValueError):
    """A configuration combination is invalid."""


class DataError(AlignmtError, ValueError):
    """Gold-standard data violates its own invariants."""


class NumericError(AlignmtError, ArithmeticError):
    """A numeric invariant was violated (NaN gradient, positive log-prob)."""


class DeterminismError(AlignmtError, RuntimeError):
    """Two evaluations of a supposedly deterministic function disagreed."""


class CheckpointError(AlignmtError, ValueError):
    """A checkpoint file failed version or shape-manifest validation."""
