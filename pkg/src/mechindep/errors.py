"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Input violates a documented precondition or schema."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (singularity, non-convergence, underflow)."""


class RankDeficientError(NumericalError):
    """A design matrix is rank deficient where a full-rank fit was required.

    ``deficient_columns`` lists 0-based indices of a column subset that is
    linearly dependent on the preceding columns (from a pivoted QR).
    """

    def __init__(self, message: str, deficient_columns: tuple[int, ...] = ()):
        super().__init__(message)
        self.deficient_columns = tuple(int(c) for c in deficient_columns)


class BenchmarkError(RuntimeError):
    """A benchmark repetition failed; carries (axis value, repetition, seed) context."""

    def __init__(self, message: str, *, axis_value=None, repetition=None, seed=None):
        super().__init__(message)
        self.axis_value = axis_value
        self.repetition = repetition
        self.seed = seed
