"""Rolling-window token and request budget."""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass

WINDOW = 60.0


class Unadmittable(Exception):
    def __init__(self, tokens: int, limit: int):
        super().__init__(f"request of {tokens} tokens exceeds the per-minute budget {limit}")
        self.tokens = tokens
        self.limit = limit


@dataclass(frozen=True)
class RateBudget:
    tokens_per_minute: int
    requests_per_minute: int

    def __post_init__(self):
        if self.tokens_per_minute <= 0 or self.requests_per_minute <= 0:
            raise ValueError("rate budgets must be positive")


@dataclass(frozen=True)
class Admission:
    admitted: bool
    wait: float = 0.0


class RateLimiter:
    """Admit requests so no 60 s window exceeds either budget.

    The window at time ``now`` covers admissions with ``t > now - 60``.
    Thread-safe; ``clock`` and ``sleep`` can be replaced for simulation.
    """

    def __init__(self, budget: RateBudget, clock=time.monotonic, sleep=time.sleep):
        self.budget = budget
        self._clock = clock
        self._sleep = sleep
        self._events: deque[tuple[float, int]] = deque()
        self._tokens = 0
        self._lock = threading.Lock()

    def _expire(self, now: float) -> None:
        # Same expression as the wait computed in admit(), so sleeping exactly
        # that wait always expires the event (now - WINDOW can round below t).
        while self._events and self._events[0][0] + WINDOW <= now:
            _, tokens = self._events.popleft()
            self._tokens -= tokens

    def admit(self, request_tokens: int, now: float | None = None) -> Admission:
        """Record and admit the request, or return the minimal wait that makes it fit."""
        if request_tokens > self.budget.tokens_per_minute:
            raise Unadmittable(request_tokens, self.budget.tokens_per_minute)
        with self._lock:
            now = self._clock() if now is None else now
            self._expire(now)
            tokens, requests = self._tokens, len(self._events)
            if (tokens + request_tokens <= self.budget.tokens_per_minute
                    and requests + 1 <= self.budget.requests_per_minute):
                self._events.append((now, request_tokens))
                self._tokens += request_tokens
                return Admission(True)
            # Drop the oldest admissions one by one until both budgets fit.
            for t, event_tokens in self._events:
                tokens -= event_tokens
                requests -= 1
                if (tokens + request_tokens <= self.budget.tokens_per_minute
                        and requests + 1 <= self.budget.requests_per_minute):
                    return Admission(False, t + WINDOW - now)
            raise AssertionError("unreachable: empty window always admits")

    def acquire(self, request_tokens: int) -> float:
        """Block until admitted; returns the total time waited."""
        waited = 0.0
        while True:
            decision = self.admit(request_tokens)
            if decision.admitted:
                return waited
            self._sleep(decision.wait)
            waited += decision.wait
