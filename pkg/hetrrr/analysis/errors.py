"""
Exception types raised by the analysis package.
Every error derives from AnalysisError so callers can catch the family at once.
"""


class AnalysisError(ValueError):
    """Base class for all validation and numerical failures in analysis."""


class DimensionMismatch(AnalysisError):
    """Matrix shapes do not agree."""


class NonFiniteEntry(AnalysisError):
    """A NaN or infinite entry was found."""


class TooFewRows(AnalysisError):
    """Not enough observations for the requested operation."""


class InvalidPair(AnalysisError):
    """A pair (i, j) is not an ordered pair of distinct rows in range."""


class InvalidGamma(AnalysisError):
    """The concavity parameter violates the penalty or update-rule constraint."""


class SingularDesign(AnalysisError):
    """X^T X is numerically singular (collinear predictors)."""


class RankOutOfRange(AnalysisError):
    """Requested rank lies outside 1..min(p, q)."""


class DegenerateGrid(AnalysisError):
    """The lambda grid collapses because all residual rows coincide."""


class NonPositiveRSS(AnalysisError):
    """An information criterion received a residual sum of squares <= 0."""


class AllFitsDiverged(AnalysisError):
    """No grid point of a model search converged."""


class EmptyGroup(AnalysisError):
    """A subgroup indicator column has no members."""


class NotPositiveDefinite(AnalysisError):
    """A covariance parameter gives a matrix that is not positive definite."""


class RankDeficientSignal(AnalysisError):
    """The signal matrix has fewer nonzero singular values than required."""


class EmptyInput(AnalysisError):
    """An aggregation received no records."""


class InvalidParameter(AnalysisError):
    """A tuning or design parameter is outside its allowed range."""


class TieWarning(UserWarning):
    """Eigenvalues tie at the truncation position; the kept subspace is not unique."""
