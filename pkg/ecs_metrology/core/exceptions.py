EXIT_VALIDATION = 1
EXIT_AGREEMENT = 2


# Base exception for workbench errors
class MetrologyException(Exception):

    def __init__(self, message: str, exit_code: int = EXIT_VALIDATION):
        self.message = message
        self.exit_code = exit_code
        super().__init__(self.message)


# Invalid input: bad parameters, states outside the truncated space, etc.
class ValidationException(MetrologyException):

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_VALIDATION)


# Two independent computations of the same quantity disagree
class AgreementException(MetrologyException):

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_AGREEMENT)


class TruncationOverflow(ValidationException):
    """Discarded probability at the cutoff exceeds the tolerance."""


class CutoffTooSmall(ValidationException):
    """A Fock level needed by the state does not fit the cutoff."""


class OddN(ValidationException):
    """BAT states need an even photon number."""


class BadTransmissivity(ValidationException):
    """Transmissivity outside [0, 1]."""


class DimensionMismatch(ValidationException):
    """Operator and state live on different spaces."""


class NotHermitian(ValidationException):
    """Matrix too far from Hermitian to be symmetrized."""


class NotDensityOperator(ValidationException):
    """Matrix violates trace, Hermiticity or positivity of a density operator."""


class SupportLeakage(ValidationException):
    """Density operator has mass outside span{|n,0>, |0,m>}."""


class PipelineNotCovariant(ValidationException):
    """A pipeline step does not commute with the phase generator."""


class StationaryPoint(ValidationException):
    """Parity signal has zero slope at the working phase."""


class ZeroInformation(ValidationException):
    """Fisher information vanishes, so no finite bound exists."""
