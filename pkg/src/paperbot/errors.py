"""Exception types shared across the engine."""


class PaperbotError(Exception):
    """Base class for all engine errors."""


class IntegrityError(PaperbotError):
    """An event violates the channel log's ordering or referential rules."""


class NotFoundError(PaperbotError):
    """A referenced channel, message, paper, or record does not exist."""


class InvalidInputError(PaperbotError):
    """An argument fails a documented precondition."""


class RetryableError(PaperbotError):
    """A transient client failure; the call may be retried."""


class ConfigurationError(PaperbotError):
    """A client or service is missing required configuration."""


class GenerationFailedError(PaperbotError):
    """Message generation could not satisfy hard constraints after retries."""


class ConnectorError(PaperbotError):
    """Posting through the chat connector failed."""


class TranscriptError(PaperbotError):
    """A transcript file is malformed or internally inconsistent."""
