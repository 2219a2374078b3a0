"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class MalformedInput(PipelineError):
    """Input document is not valid JSON or violates the thread schema."""


class NoHeader(PipelineError):
    """Thread does not contain exactly one header comment."""


class InvalidUrl(PipelineError):
    """String could not be interpreted as an http(s) URL."""


class NotFound(PipelineError):
    """Remote resource does not exist (HTTP 404)."""


class RateLimited(PipelineError):
    """Remote API refused the request due to rate limiting."""

    def __init__(self, message: str, retry_after: float = 0.0):
        super().__init__(message)
        self.retry_after = retry_after


class NetworkFailure(PipelineError):
    """Transport-level failure (DNS, connection, timeout)."""


class GatewayFailure(PipelineError):
    """LLM gateway could not produce a response after retries."""


class ReplayMiss(PipelineError):
    """Replay mode has no recorded exchange for the request digest."""


class UnsupportedPayload(PipelineError):
    """Role does not accept the given payload type (e.g. images)."""


class UnknownRole(PipelineError):
    """Configuration refers to a role the gateway does not define."""


class StubExhausted(PipelineError):
    """Scripted stub has no queued response left for the role."""


class SummaryFailure(PipelineError):
    """Link summarizer failed; caller records a failed cache entry."""


class JudgeFailure(PipelineError):
    """Quality judge output could not be parsed after a retry."""


class ForeignFieldKey(PipelineError):
    """Excerpt carries a field key outside the active schema."""


class EmptyInput(PipelineError):
    """Aggregation was asked to operate on an empty collection."""


class ConfigError(PipelineError):
    """Run configuration is invalid (bad paths, unknown mode)."""


class ParseFailure(PipelineError):
    """Binary document could not be parsed by its format handler."""
