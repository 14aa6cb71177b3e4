"""Exception hierarchy shared across the package.

Error names follow the contracts of the operations that raise them, so tests
and callers can match on the class rather than on message text.
"""


class PriorChainError(Exception):
    """Base class for all package errors."""


class InvalidValueError(PriorChainError):
    """An input was NaN, infinite, or negative where a probability was expected."""


class AllZeroError(PriorChainError):
    """Every entry of a weight vector was zero."""


class NotDiscreteError(PriorChainError):
    """Operation requires a discrete stimulus space."""


class OutOfBoundsError(PriorChainError):
    """Stimulus coordinates fall outside the space bounds."""


class ExternalUnavailableError(PriorChainError):
    """External classifier endpoint could not be reached."""


class MalformedReplyError(PriorChainError):
    """External classifier reply did not parse against the wire schema."""


class NotNormalizedError(PriorChainError):
    """External classifier reply probabilities do not sum to 1."""


class SameCategoryError(PriorChainError):
    """Categorization choice requires two distinct category options."""


class StaleTrialError(PriorChainError):
    """A choice was applied to a trial that is not the chain's in-flight trial."""


class EmptyError(PriorChainError):
    """No samples (or trials) remain after filtering."""


class NotConvergedError(PriorChainError):
    """Power iteration failed to reach the residual target."""


class DegenerateVarianceError(PriorChainError):
    """Correlation undefined: one side has zero variance."""


class MissingCategoryError(PriorChainError):
    """A count file does not cover the configured category set."""


class MismatchedCategoriesError(PriorChainError):
    """Inputs are defined over different category sets."""


class MalformedLogError(PriorChainError):
    """A trial log could not be parsed or fails replay validation."""


class InvalidConfigError(PriorChainError):
    """A run or session configuration is unusable."""


class UnknownSessionError(PriorChainError):
    """No session with the given id."""


class StaleTokenError(PriorChainError):
    """Response token does not match the in-flight trial."""


class MissingConfidenceError(PriorChainError):
    """Categorization response lacked the required confidence rating."""
