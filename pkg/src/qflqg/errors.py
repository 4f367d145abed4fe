"""Exception types shared across the package."""


class QflqgError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(QflqgError):
    pass


class NotPSD(QflqgError):
    """A matrix that must be positive (semi)definite is not.

    Carries the name of the offending matrix.
    """

    def __init__(self, name, detail=""):
        self.name = name
        super().__init__(f"{name} is not positive (semi)definite{': ' + detail if detail else ''}")


class NonpositiveHorizon(QflqgError):
    pass


class ScenarioValidationError(QflqgError):
    """Aggregates every invariant violated by a scenario description."""

    def __init__(self, violations):
        self.violations = list(violations)
        msgs = "; ".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} scenario violation(s): {msgs}")


class SingularInnerMatrix(QflqgError):
    """R + B'PB is numerically singular; the weights are ill posed."""


class SingularInnovationCovariance(QflqgError):
    """An innovation covariance is numerically singular."""


class IndexOutOfRange(QflqgError, IndexError):
    pass


class TimeDesync(QflqgError):
    """A running filter state disagrees with the offline statistics index."""


class NoCellFound(QflqgError):
    """No quantizer cell contains the point; the partition is invalid."""


class PartitionInvalid(QflqgError):
    """Cell probabilities do not sum to one; cells overlap or leave gaps."""


class QuadratureNotConverged(QflqgError):
    def __init__(self, achieved, context=""):
        self.achieved = achieved
        super().__init__(
            f"quadrature did not converge{' for ' + context if context else ''} "
            f"(achieved error estimate {achieved:.3e})"
        )


class UnsupportedDimension(QflqgError):
    """Cell-moment quadrature supports dimensions p <= 3 only."""


class UnknownCell(QflqgError):
    pass


class DuplicateArrival(QflqgError):
    """The same origin time was delivered twice; the harness is corrupt."""


class FutureOrigin(QflqgError):
    pass


class InstanceTooLarge(QflqgError):
    """Brute-force enumeration guard (M**T too large)."""


class MissingArtifact(QflqgError):
    pass
