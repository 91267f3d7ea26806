"""Exception hierarchy shared by all qrandbench modules."""


class QRandError(ValueError):
    """Base class for every error raised by qrandbench."""


class NotHermitian(QRandError):
    pass


class NotPSD(QRandError):
    pass


class TraceNotOne(QRandError):
    pass


class DimensionMismatch(QRandError):
    pass


class NotAMeasurement(QRandError):
    pass


class NotProjective(QRandError):
    pass


class NotRankOne(QRandError):
    pass


class InvalidDistribution(QRandError):
    pass


class InvalidOrder(QRandError):
    pass


class SupportViolation(QRandError):
    pass


class Unsupported(QRandError):
    pass


class OutOfRange(QRandError):
    pass


class TooManyOutcomes(QRandError):
    pass


class BudgetExhausted(QRandError):
    """Raised when a perturbation cannot be certified within its budget.

    The best iterate found so far is attached so callers can still inspect it.
    """

    def __init__(self, message, measurement=None, certificate=None):
        super().__init__(message)
        self.measurement = measurement
        self.certificate = certificate


class SeedLengthMismatch(QRandError):
    pass


class OutputTooLong(QRandError):
    pass
