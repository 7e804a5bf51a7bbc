"""Exception types raised across the gateway.

Primitive DSP operations raise plain ``ValueError`` for bad arguments; the
classes here cover decoding, orchestration and delivery failures that callers
(mostly the CLI) need to tell apart.
"""


class EdgeReduceError(Exception):
    """Base class for all package-specific errors."""


class DecodeError(EdgeReduceError, ValueError):
    """A source file could not be decoded.

    ``offset`` is the sample offset of the failing chunk when the error was
    raised while streaming, otherwise ``None``.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (chunk at sample offset {offset})"
        super().__init__(message)
        self.offset = offset


class StrategyMismatch(EdgeReduceError, ValueError):
    pass


class ArtifactFormatError(EdgeReduceError, ValueError):
    pass


class CorruptGzip(EdgeReduceError, ValueError):
    pass


class DeliveryError(EdgeReduceError):
    """Upload gave up after exhausting its retries."""

    def __init__(self, message, attempts=None):
        super().__init__(message)
        self.attempts = list(attempts or [])


class RejectedBySink(DeliveryError):
    """The sink answered 4xx; the request is not retried."""
