"""Exception types shared across the package.

Every failure mode that callers are expected to handle gets its own class so
that drivers and the command line can distinguish "the request is malformed"
from "the method honestly cannot meet the requested tolerance".
"""


class ExpmrectError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(ExpmrectError):
    """Operands have incompatible shapes."""


class SingularMatrix(ExpmrectError):
    """A factorization hit an (almost) exactly zero pivot."""


class NotSPD(ExpmrectError):
    """A matrix required to be symmetric positive definite is not."""


class NotSymmetric(ExpmrectError):
    """A matrix required to be symmetric is not."""


class NoConvergence(ExpmrectError):
    """An iteration reached its budget without meeting its tolerance."""


class RepeatedRoots(ExpmrectError):
    """A denominator has (numerically) repeated roots, so the partial
    fraction form does not exist."""


class PoleInsideRegion(ExpmrectError):
    """A rational function has a pole inside or on the target rectangle."""


class PoleEvaluation(ExpmrectError):
    """A rational function was evaluated at (or numerically at) a pole."""


class SingularShift(ExpmrectError):
    """A shifted pencil beta*M - tau*K is numerically singular."""


class ScalingExhausted(ExpmrectError):
    """No admissible scaling parameter up to the cap meets the target.

    Carries a ``context`` dict with the rectangle, target and cap when
    raised by the driver.
    """

    def __init__(self, *args, context=None):
        super().__init__(*args)
        self.context = dict(context) if context else {}


class DegreeExhausted(ExpmrectError):
    """The greedy interpolation reached its degree cap above the target."""

    def __init__(self, *args, context=None):
        super().__init__(*args)
        self.context = dict(context) if context else {}


class RefitFailed(ExpmrectError):
    """The certified sup-error of a refitted approximant exceeds its target."""

    def __init__(self, *args, context=None):
        super().__init__(*args)
        self.context = dict(context) if context else {}


class DegenerateMesh(ExpmrectError):
    """A mesh operation produced (or received) zero-area or inverted cells."""
