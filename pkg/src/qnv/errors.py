"""Exception hierarchy.

Everything raised by this package derives from :class:`QnvError` so callers
can catch one base class.  The CLI maps subclasses to exit codes.
"""


class QnvError(Exception):
    """Base class for all package errors."""


class InvalidSpec(QnvError):
    """Polynomial spec rejected: non-finite coefficients or y0 <= 0."""


class DomainError(QnvError):
    """Transform evaluated outside its domain [a, b]."""


class RangeError(QnvError):
    """Inversion target lies outside the open range of the transform."""


class CaseError(QnvError):
    """Operation undefined for this root configuration."""


class SpecShapeError(QnvError):
    """Spec lacks the reflection shape e3 = e1*L^2 with y0 = L."""


class LegInconsistency(QnvError):
    """Numeraire legs disagree: euro payoff times terminal value != dollar payoff."""


class NonFinitePayoff(QnvError):
    """A payoff returned NaN (or a negative value) on a sampled path."""


class NonIntegrable(QnvError):
    """An infinite payoff landed on a path with positive weight."""


class ResourceError(QnvError):
    """Requested paths x steps exceeds the configured budget."""


class ConfigError(QnvError):
    """Run-configuration text could not be parsed."""
