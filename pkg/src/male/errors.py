"""Exception types shared across the package.

Argument and configuration problems raise plain ``ValueError``; the classes
here cover failure modes that callers may want to catch separately.
"""


class NumericFailure(ArithmeticError):
    """A numerical routine produced a non-finite value or failed to converge."""


class ResourceLimitExceeded(RuntimeError):
    """A construction would exceed its configured size guard."""


class ExperimentFailure(RuntimeError):
    """An experiment run violated one of its own sanity thresholds."""
