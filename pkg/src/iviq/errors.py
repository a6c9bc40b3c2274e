"""Exception hierarchy shared across the package."""

from __future__ import annotations


class IviqError(Exception):
    """Base class for all package errors."""


class ManifestError(IviqError):
    """Manifest failed to parse or violates a corpus invariant."""


class ContainerError(IviqError):
    """Embedding index container is corrupt or inconsistent."""


class DimensionMismatchError(IviqError):
    """Vector dimension disagrees with the index dimension."""


class ProviderError(IviqError):
    """A model provider call failed.

    ``endpoint`` and ``video_id`` identify the failing call when known.
    """

    def __init__(self, message: str, *, endpoint: str | None = None,
                 video_id: str | None = None, attempts: int | None = None):
        super().__init__(message)
        self.endpoint = endpoint
        self.video_id = video_id
        self.attempts = attempts


class DeadlineExceededError(ProviderError):
    """Answer provider did not finish inside the request deadline."""


class CapabilityError(IviqError):
    """Session config requests a capability the corpus does not support."""


class SessionStateError(IviqError):
    """Operation violates the session state machine (stale question, etc.)."""


class GeneratorExhausted(IviqError):
    """Question generator has nothing left to ask.

    A natural stop signal, not a failure.
    """
