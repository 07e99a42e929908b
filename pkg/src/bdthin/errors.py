"""Exception hierarchy shared across the package."""


class BDThinError(Exception):
    """Base class for all package errors."""


class ModelValidationError(BDThinError):
    """A model violates the birth-death / thinning invariants."""


class BoundaryRateNonzero(ModelValidationError):
    """lambda[J] or mu[0] is nonzero."""


class NonPositiveInteriorRate(ModelValidationError):
    """An interior birth or death rate is zero, negative, or non-finite."""


class ProbabilityOutOfRange(ModelValidationError):
    """A thinning probability lies outside [0, 1] or a forced boundary zero is nonzero."""


class AllThinningZero(ModelValidationError):
    """Every thinning probability is zero, so nothing is ever counted."""


class NumericOverflow(BDThinError):
    """Intermediate products overflowed despite the normalized recurrence."""


class SolveFailed(BDThinError):
    """Tridiagonal elimination hit a non-positive pivot or an oversized residual."""


class InternalIdentityViolated(BDThinError):
    """An internal cross-check identity failed; indicates an implementation bug."""


class StabilityCheckFailed(BDThinError):
    """The positive-recurrence sum for a countable-state model diverges numerically."""


class TruncationNotConverged(BDThinError):
    """max_states was reached before the truncation stopping rule fired."""


class ParamOutOfRange(BDThinError):
    """A named-model constructor received an illegal parameter."""


class InvalidConfig(BDThinError):
    """A simulation configuration violates its invariants."""
