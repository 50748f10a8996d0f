"""Exception hierarchy shared by all sympcap modules."""


class SympcapError(Exception):
    """Base class for all library errors."""


class NotSymplectic(SympcapError):
    """Matrix fails the symplectic identity within tolerance."""


class NotOrthogonal(SympcapError):
    """Matrix expected to be orthogonal is not."""


class SingularMatrix(SympcapError):
    """Matrix expected to be invertible is numerically singular."""


class NoZeroFound(SympcapError):
    """A determinant root that must exist was not located numerically."""


class DimensionMismatch(SympcapError):
    """Vector or matrix dimensions are incompatible."""


class OriginNotInterior(SympcapError):
    """Operation requires the origin strictly inside the body."""


class NoFixedInteriorPoint(SympcapError):
    """Body has no usable fixed interior point for the given map."""


class NonConvergence(SympcapError):
    """Optimizer exhausted its budget without meeting the gradient tolerance."""


class CarrierResidualTooLarge(SympcapError):
    """Extracted carrier violates its boundary or closure tolerance."""


class ClassificationAmbiguous(SympcapError):
    """A carrier sample activates neither boundary constraint."""


class ZeroDenominator(SympcapError):
    """Quadrature denominator dropped below tolerance."""


class AssumptionViolated(SympcapError):
    """A stated precondition of a theorem-backed routine fails.

    The message names the condition that failed.
    """
