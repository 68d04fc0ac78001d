"""Exception types shared across the package."""

__all__ = [
    "QPolError",
    "UnphysicalStateError",
    "ChannelError",
    "NotCompletelyPositiveError",
    "NoTransmissionError",
    "TomographyError",
    "UnderdeterminedFitError",
    "FormatError",
]


class QPolError(Exception):
    """Base class for domain errors raised by this package."""


class UnphysicalStateError(QPolError):
    """A state, Stokes vector, or tensor violates physicality constraints."""


class ChannelError(QPolError):
    """A channel is invalid or cannot be applied to the given state."""


class NotCompletelyPositiveError(ChannelError):
    """The requested Mueller matrix has no completely positive Kraus form."""


class NoTransmissionError(QPolError):
    """A Monte Carlo run produced no transmitted photon within acceptance."""


class TomographyError(QPolError):
    """Tomographic reconstruction is impossible for the given counts."""


class UnderdeterminedFitError(QPolError):
    """A general Mueller fit has a continuous solution family.

    Carries the stabilizer report describing the ambiguity.
    """

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class FormatError(QPolError):
    """A file does not match the expected schema or layout."""
