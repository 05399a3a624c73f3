"""Exception hierarchy shared by every windrelief module.

``DomainError`` subclasses map to CLI exit code 1; anything else that escapes
(bad paths, unreadable files) maps to exit code 2.
"""


class DomainError(Exception):
    """Base class for errors caused by invalid data or parameters."""


# dataset
class MissingHeader(DomainError):
    pass


class RangeViolation(DomainError):
    def __init__(self, message, row=None, field=None):
        super().__init__(message)
        self.row = row
        self.field = field


class IncompleteSite(DomainError):
    pass


class EmptyInput(DomainError):
    pass


class NonFiniteInput(DomainError):
    pass


class UnknownRole(DomainError):
    pass


class InvalidCoordinate(DomainError):
    pass


class UpstreamFormat(DomainError):
    pass


class UpstreamUnavailable(DomainError):
    pass


# relief
class IndexOutOfRange(DomainError):
    pass


class SingleClass(DomainError):
    pass


class InsufficientData(DomainError):
    pass


class ZeroTargetRange(DomainError):
    pass


# cascadenet
class InvalidShape(DomainError):
    pass


class ShapeMismatch(DomainError):
    pass


class EmptyBatch(DomainError):
    pass


class DivergedLoss(DomainError):
    pass


class TrialFailed(DomainError):
    """A sensitivity-sweep trial failed; ``n_hidden`` names the trial."""

    def __init__(self, n_hidden, cause):
        super().__init__(f"trial n_hidden={n_hidden} failed: {cause}")
        self.n_hidden = n_hidden
        self.cause = cause


# metrics
class LengthMismatch(DomainError):
    pass


# windmodels
class NegativeSpeed(DomainError):
    pass


class EmptySeries(DomainError):
    pass


class BadWindow(DomainError):
    pass
