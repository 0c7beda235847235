"""Retry with exponential backoff."""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field

from .base import ModelRequest, ModelResponse, ProviderError, ProviderTimeout, RateLimited, ServerError

log = logging.getLogger(__name__)

RETRYABLE = (ProviderTimeout, RateLimited, ServerError)


class RetriesExhausted(ProviderError):
    def __init__(self, attempts: int, last_error: Exception):
        super().__init__(f"gave up after {attempts} attempts: {last_error!r}")
        self.attempts = attempts
        self.last_error = last_error


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    initial_backoff: float = 1.0
    backoff_multiplier: float = 2.0
    max_backoff: float = 60.0
    jitter: bool = False
    retryable: tuple = field(default=RETRYABLE)

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.initial_backoff < 0:
            raise ValueError("initial_backoff must be >= 0")
        if self.backoff_multiplier < 1:
            raise ValueError("backoff_multiplier must be >= 1")

    def backoff(self, failures: int, rng: random.Random | None = None) -> float:
        """Delay after the ``failures``-th consecutive failure (1-based)."""
        delay = min(self.initial_backoff * self.backoff_multiplier ** (failures - 1), self.max_backoff)
        if self.jitter:
            delay = (rng or random).uniform(0, delay)
        return delay


def complete_with_retry(adapter, request: ModelRequest, policy: RetryPolicy = RetryPolicy(), *,
                        sleep=time.sleep, stats: dict | None = None,
                        rng: random.Random | None = None) -> ModelResponse:
    """Call ``adapter.complete`` until success or ``policy.max_attempts`` calls.

    Retryable errors sleep the policy backoff (or the server's retry-after,
    whichever is longer) and try again; anything else propagates at once.
    ``stats["attempts"]`` is set to the number of calls made.
    """
    stats = stats if stats is not None else {}
    last: Exception | None = None
    for attempt in range(1, policy.max_attempts + 1):
        stats["attempts"] = attempt
        try:
            return adapter.complete(request)
        except policy.retryable as exc:
            last = exc
            if attempt == policy.max_attempts:
                break
            delay = policy.backoff(attempt, rng)
            retry_after = getattr(exc, "retry_after", None)
            if retry_after:
                delay = max(delay, retry_after)
            log.warning("attempt %d/%d failed (%r); retrying in %.2fs",
                        attempt, policy.max_attempts, exc, delay)
            sleep(delay)
    raise RetriesExhausted(policy.max_attempts, last)
