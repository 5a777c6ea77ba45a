"""Exception hierarchy shared by every leanctx module."""

from __future__ import annotations


class LeanCtxError(Exception):
    """Base class for all errors raised by leanctx."""


class InvalidConfig(LeanCtxError, ValueError):
    pass


class EmptyDocument(LeanCtxError, ValueError):
    pass


class EmptyInput(LeanCtxError, ValueError):
    pass


class EmptyStore(LeanCtxError, LookupError):
    pass


class DimensionMismatch(LeanCtxError, ValueError):
    pass


class InvalidThreshold(LeanCtxError, ValueError):
    pass


class InvalidRate(LeanCtxError, ValueError):
    pass


class InsufficientSamples(LeanCtxError, ValueError):
    pass


class InvalidReward(LeanCtxError, ValueError):
    pass


class InvalidIndex(LeanCtxError, IndexError):
    pass


class CorruptAgentFile(LeanCtxError, ValueError):
    pass


class TemplateArityError(LeanCtxError, ValueError):
    pass


class ProviderError(LeanCtxError, RuntimeError):
    """A completion or embedding backend failed.

    ``retryable`` is True for transport-level failures (connection reset,
    timeout); ``status`` carries the HTTP status for non-2xx responses and
    ``attempts`` how many tries were made before giving up.
    """

    def __init__(self, message: str, *, retryable: bool = False,
                 status: int | None = None, attempts: int = 1):
        super().__init__(message)
        self.retryable = retryable
        self.status = status
        self.attempts = attempts


class ContextTooLarge(ProviderError):
    pass


class TrainingAborted(LeanCtxError, RuntimeError):
    """Raised when training stops early; ``progress`` describes what completed."""

    def __init__(self, message: str, progress: dict):
        super().__init__(message)
        self.progress = progress
