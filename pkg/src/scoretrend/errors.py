"""Exception types shared across the package."""


class ScoreTrendError(Exception):
    """Base class for all scoretrend errors."""


class EmptyAfterTruncation(ScoreTrendError):
    """No usable scoring events remain after restricting to the time domain."""


class NonMonotoneScores(ScoreTrendError):
    """A cumulative team score decreases over time; the record set is rejected."""


class UnsupportedOrder(ScoreTrendError):
    """Requested kernel derivative order is outside the implemented range."""


class FactorizationFailure(ScoreTrendError):
    """Covariance matrix is not positive definite even after jitter escalation."""


class OptimizerDiverged(ScoreTrendError):
    """Marginal-likelihood optimization produced no finite objective at any start."""


class ChainDiverged(ScoreTrendError):
    """MCMC target density was persistently non-finite."""


class DegenerateCorrelation(ScoreTrendError):
    """|corr(d', d'')| = 1 at a time point; the crossing intensity is undefined."""


class InsufficientData(ScoreTrendError):
    """Too few records for the requested summary."""


class MissingBundle(ScoreTrendError):
    """A match result bundle was not found on disk."""
