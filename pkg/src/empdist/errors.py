"""Exception hierarchy shared across the package.

Two families matter to callers (and to the CLI exit codes): bad inputs or
malformed models raise :class:`ValidationError`; computations that fail for
numerical/structural reasons at runtime raise :class:`NumericsError`
subclasses.
"""


class ValidationError(ValueError):
    """Input or model fails a structural precondition (shape, completeness, ...)."""


class GuardRailError(ValidationError):
    """A desk-scale size guard was exceeded (chain too large, N too large)."""


class NumericsError(RuntimeError):
    """A numerical computation failed in a detectable, diagnosable way."""


class DegenerateSteadyStateError(NumericsError):
    """The summed channel does not have a unique fixed point."""


class DarkStateError(NumericsError):
    """The no-jump generator is (near-)singular: some state never emits an observed jump."""


class SupportMismatchError(NumericsError):
    """Two distributions/covariances live on different supports; comparison undefined."""


class ZeroProbabilityError(NumericsError):
    """A conditional probability was requested for a zero-probability condition."""


class TrajectoryCollapseError(NumericsError):
    """All outcome probabilities vanished during sampling (numerical collapse)."""
