"""Exception types shared across the solver pipeline."""


class StripflowError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(StripflowError):
    """Invalid run configuration."""


class NonConvergence(StripflowError):
    """An iterative solve exhausted its budget.

    Carries the last iterate and residual history so multistart drivers can
    keep going and reports can show what happened.
    """

    def __init__(self, message, last=None, history=None):
        super().__init__(message)
        self.last = last
        self.history = history or []


class BracketNotFound(StripflowError):
    """The geometric lambda scan never flipped the bisection predicate."""


class PairNotOrdered(StripflowError):
    """Extracted nontrivial minimizer fails phibar > phi on interior nodes."""


class TargetNotBracketed(StripflowError):
    """Mid-height trace never crosses the normalization target."""


class NoConvergenceAcrossL(StripflowError):
    """Common-window differences stalled above tolerance along the L schedule."""


class EmptyLevelSet(StripflowError):
    """Requested level lies outside the range of the field."""


class VerificationFailure(StripflowError):
    """A verification stage reported a failing identity."""
