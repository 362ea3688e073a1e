class InverseSieveError(Exception):
    """Base class for all domain errors."""


class ZeroElement(InverseSieveError, ValueError):
    """A valuation was requested for the zero element."""


class AllCoordinatesVanish(InverseSieveError, ValueError):
    """A projective point reduces to the zero tuple modulo a prime."""


class ZeroPoint(InverseSieveError, ValueError):
    """A projective point with every coordinate zero."""


class BoxTooLarge(InverseSieveError):
    """The exact count of a box exceeds the enumeration budget."""


class BoundTooSmall(InverseSieveError, ValueError):
    """The height bound N is below the validity range of an inequality."""


class EmptySet(InverseSieveError, ValueError):
    """An operation that needs a nonempty set received an empty one."""


class HypothesisFailed(InverseSieveError):
    """A density hypothesis of a construction does not hold (N too small)."""


class HypothesisViolated(InverseSieveError, ValueError):
    """Arguments violate the hypothesis of a bound, e.g. t <= 2s."""


class NoKernel(InverseSieveError):
    """A linear system has only the trivial solution."""


class ChainInvalid(InverseSieveError, ValueError):
    """A projection-chain polynomial does not vanish on the current image."""


class DegreeTooSmall(InverseSieveError):
    """Too few monomials for the requested interpolation."""


class UnsupportedField(InverseSieveError, ValueError):
    """The operation is not implemented for this base field."""


class BudgetExceeded(InverseSieveError):
    """A generator or search would exceed its configured budget."""


class SpecError(InverseSieveError, ValueError):
    """A malformed experiment specification."""
