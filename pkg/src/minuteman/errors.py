"""Exception types shared across the pipeline."""


class MinutemanError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MinutemanError):
    """A request value is outside its allowed range or malformed."""


class FormatError(ValidationError):
    """An audio payload does not conform to the required PCM format."""


class SequencingError(MinutemanError):
    """A chunk arrived out of order for its track."""


class NotFoundError(MinutemanError):
    """Referenced session, track, or document does not exist (or is closed)."""


class BusShutdown(MinutemanError):
    """The message bus has been shut down; no further publishes are accepted."""


class EditRejected(MinutemanError):
    """A document edit has malformed spans or an unknown base revision."""


class DocOrderError(MinutemanError):
    """An utterance append would violate sequence-number ordering."""


class ManifestError(MinutemanError):
    """A replay manifest failed validation."""
