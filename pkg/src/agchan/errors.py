"""Exception hierarchy shared by every stage of the pipeline.

The CLI maps these onto exit codes, so each family stays distinct:
parse problems, numeric/degenerate inputs and plain bad arguments.
"""


class AgChanError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(AgChanError, ValueError):
    """An argument violates an operation's precondition."""


class DomainError(InvalidArgumentError):
    """A model formula was evaluated outside its calibrated domain."""


class ParseError(AgChanError, ValueError):
    """A document does not match its file format.

    Parameters
    ----------
    path : str
        File the document came from (may be ``"<memory>"``).
    field : str
        Dotted location of the offending field, e.g. ``snapshots[3].mpcs[0].delay_ns``.
    message : str
        What is wrong with it.
    """

    def __init__(self, path, field, message):
        self.path = str(path)
        self.field = field
        super().__init__(f"{self.path}: {field}: {message}")


class NumericError(AgChanError, ArithmeticError):
    """Base class for numerically degenerate inputs or failed numerics."""


class DegenerateProfileError(NumericError):
    """A power delay profile or CIR carries no usable power."""


class DegenerateSnapshotError(NumericError):
    """Snapshot delays are all identical, so delay normalisation is undefined."""


class DegenerateClusteringError(NumericError):
    """Two cluster centroids coincide, so a validity index is undefined."""


class DegenerateClusterError(NumericError):
    """A cluster is too small or too flat for the requested descriptor."""


class DegenerateSampleError(NumericError):
    """A sample is constant (or empty after filtering) and cannot be fitted."""


class UndefinedKFactorError(NumericError):
    """K-factor needs at least two components."""


class UndefinedSlopeError(NumericError):
    """Delay-vs-distance slope needs two distinct link distances."""


class FitFailureError(NumericError):
    """Non-linear least squares did not converge.

    The best parameters seen so far are kept on ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ValidationFailure(AgChanError):
    """A validation report contains at least one failed check."""
