"""Exception hierarchy shared by every twpa_studio module."""


class TwpaError(Exception):
    """Base class for all package errors."""


class DomainError(TwpaError, ValueError):
    """An argument lies outside the domain of the operation."""


class SuperconductivityBrokenError(DomainError):
    """A current reached or exceeded the critical current."""


class ConfigError(TwpaError, ValueError):
    """Invalid configuration or device description."""


class NumericalError(TwpaError, RuntimeError):
    """Base class for failures of a numerical routine."""


class StiffSystemError(NumericalError):
    """The adaptive integrator could not make progress."""


class OscillationError(NumericalError):
    """Mode amplitudes diverged during propagation."""


class NotBracketedError(NumericalError):
    """The requested crossing does not occur on the supplied grid."""


class UnphysicalRatioError(DomainError):
    """A measured noise ratio implies negative vacuum noise."""


class TraceFormatError(TwpaError, ValueError):
    """A trace or gain file violates its CSV schema."""


class GridMismatchError(TwpaError, ValueError):
    """Arrays that must share a frequency grid do not."""
