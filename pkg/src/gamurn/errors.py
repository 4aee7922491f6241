"""Exception hierarchy shared by all gamurn modules."""


class GamUrnError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(GamUrnError, ValueError):
    """An invalid scheme, schedule or parameter combination."""


class InconclusiveError(GamUrnError):
    """A quantity cannot be certified for the given scheme (e.g. an opaque table tail)."""


class DivergentTail(GamUrnError):
    """A reciprocal power series of the weights diverges."""


class DivergentScheme(GamUrnError):
    """The operation needs ``sum 1/f < inf`` but the scheme does not satisfy it."""


class SpbNotEstablished(GamUrnError):
    """Both summability conditions for the monopoly phase could not be proved."""


class UnsupportedSchedule(GamUrnError):
    """The exponential embedding only supports a constant creation probability."""


class PrecisionLoss(GamUrnError, FloatingPointError):
    """Clock increments vanished relative to the current position."""


class MissingCounterfactual(GamUrnError):
    """A trace lacks the firing-group record needed to build the generation tree."""


class InfeasibleTheta(GamUrnError):
    """The moment generating function is infinite at the requested argument."""


class RejectionStarvation(GamUrnError):
    """Rejection sampling accepted too few proposals to be useful."""


class Undecidable(GamUrnError):
    """Summability of an urn sequence cannot be decided from its family."""
