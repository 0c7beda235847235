from .adapters import LiveAdapter, RecordingAdapter, ReplayAdapter, cassette_path, parse_messages_response
from .base import (
    Adapter,
    AuthError,
    ModelRequest,
    ModelResponse,
    ProviderError,
    ProviderTimeout,
    RateLimited,
    ReplayMiss,
    ServerError,
    StopReason,
    cache_key,
)
from .ratelimit import Admission, RateBudget, RateLimiter, Unadmittable
from .retry import RetriesExhausted, RetryPolicy, complete_with_retry

__all__ = [
    "Adapter", "Admission", "AuthError", "LiveAdapter", "ModelRequest", "ModelResponse",
    "ProviderError", "ProviderTimeout", "RateBudget", "RateLimited", "RateLimiter",
    "RecordingAdapter", "ReplayAdapter", "ReplayMiss", "RetriesExhausted", "RetryPolicy",
    "ServerError", "StopReason", "Unadmittable", "cache_key", "cassette_path",
    "complete_with_retry", "parse_messages_response",
]
