"""Exception hierarchy shared by all modules."""


class LeviboundError(Exception):
    """Base class for every error raised by the package."""


class ArgumentError(LeviboundError, ValueError):
    """An argument is invalid (dimension mismatch, point outside the domain, ...)."""


class EvaluationError(LeviboundError):
    """A derivative or defining-function oracle failed."""


class DegenerateBoundaryError(LeviboundError):
    """The gradient of the defining function vanishes at a boundary point."""


class ProjectionError(LeviboundError):
    """Newton/bisection projection onto the boundary did not converge.

    ``diagnostics`` holds the iteration history for inspection.
    """

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class OutOfCollarError(ProjectionError):
    """The point is outside the region where the signed distance is smooth."""


class RankDriftError(LeviboundError):
    """The Levi rank is not locally constant near the requested point."""


class PseudoconvexityViolation(LeviboundError):
    """The mixed Levi block is nonzero, so the boundary is not pseudoconvex there."""


class OutOfChartError(LeviboundError):
    """A point lies outside the certified neighbourhood of a chart."""


class OutOfRangeError(LeviboundError):
    """A parameter (typically delta) is outside the certified range."""


class CertificationFailure(LeviboundError):
    """Sampling certification did not succeed within the search budget.

    ``worst`` carries the worst violating sample found.
    """

    def __init__(self, msg, worst=None):
        super().__init__(msg)
        self.worst = worst


class PreconditionError(LeviboundError):
    """An input failed a sampled precondition check."""


class ConditioningError(LeviboundError):
    """A Gram matrix or log-Hessian is numerically unusable."""


class InfeasibleDiscError(LeviboundError):
    """No contained analytic disc was found for any admissible radius."""
