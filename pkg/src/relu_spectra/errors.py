"""Exception hierarchy shared by all modules."""


class ReluSpectraError(Exception):
    """Base class for every error raised by this package."""


class NumericError(ReluSpectraError):
    """A numerical routine failed (non-convergence, non-finite values)."""


class ConvergenceError(NumericError):
    def __init__(self, rows, cols, sweeps):
        self.rows, self.cols, self.sweeps = rows, cols, sweeps
        super().__init__(
            f"SVD of a {rows}x{cols} matrix did not converge after {sweeps} sweeps"
        )


class OptimizerDivergence(NumericError):
    def __init__(self, step, k=None):
        self.step, self.k = step, k
        where = f"rank k={k}, " if k is not None else ""
        super().__init__(f"loss became non-finite ({where}step {step})")


class DataError(ReluSpectraError):
    """Input data could not be read or does not satisfy a precondition."""


class IdxMagicError(DataError):
    pass


class TruncatedPayloadError(DataError):
    def __init__(self, path, offset, expected):
        self.path, self.offset, self.expected = path, offset, expected
        super().__init__(
            f"{path}: payload truncated at byte offset {offset} "
            f"(expected {expected} bytes)"
        )


class CountMismatchError(DataError):
    pass


class CsvParseError(DataError):
    def __init__(self, path, row, col, value):
        self.path, self.row, self.col, self.value = path, row, col, value
        super().__init__(
            f"{path}: non-numeric cell {value!r} at row {row}, column {col}"
        )


class InsufficientSamplesError(DataError):
    """Not enough correctly or incorrectly classified points for a subset."""

    def __init__(self, subset, available, requested):
        self.subset = subset
        self.available = available
        self.requested = requested
        self.shortfall = requested - available
        super().__init__(
            f"{subset} pool has {available} samples, {requested} requested "
            f"(shortfall {self.shortfall})"
        )


class InfeasibleError(NumericError):
    """The linear program has no feasible point."""


class UnboundedError(NumericError):
    """The linear program's objective is unbounded below."""
