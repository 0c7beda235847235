"""Live HTTP, replay and recording adapters."""

from __future__ import annotations

import json
import logging
import os
import threading
from datetime import datetime, timezone
from pathlib import Path

import httpx

from .base import (
    AuthError,
    ModelRequest,
    ModelResponse,
    ProviderError,
    ProviderTimeout,
    RateLimited,
    ReplayMiss,
    ServerError,
    cache_key,
)

log = logging.getLogger(__name__)

_STOP_REASONS = {
    "end_turn": "complete",
    "stop_sequence": "complete",
    "stop": "complete",
    "complete": "complete",
    "max_tokens": "length",
    "length": "length",
}


class LiveAdapter:
    """Messages-style HTTP JSON API client.

    The API key is read from the environment variable ``api_key_env`` at
    call time; it is never accepted as an argument or stored in config.
    """

    def __init__(self, endpoint: str, *, api_key_env: str = "GENAI_API_KEY",
                 auth_header: str = "x-api-key", extra_headers: dict | None = None,
                 timeout: float = 120.0, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.auth_header = auth_header
        self.extra_headers = dict(extra_headers or {})
        self._client = client or httpx.Client(timeout=timeout)

    def _headers(self) -> dict:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AuthError(f"environment variable {self.api_key_env} is not set")
        headers = {"content-type": "application/json", **self.extra_headers}
        if self.auth_header.lower() == "authorization":
            headers[self.auth_header] = f"Bearer {key}"
        else:
            headers[self.auth_header] = key
        return headers

    def complete(self, request: ModelRequest) -> ModelResponse:
        body = {
            "model": request.model_id,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        }
        try:
            resp = self._client.post(self.endpoint, json=body, headers=self._headers())
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(str(exc)) from exc
        except httpx.TransportError as exc:
            raise ServerError(f"transport error: {exc}") from exc

        status = resp.status_code
        if status in (401, 403):
            raise AuthError(f"HTTP {status}")
        if status == 429:
            try:
                retry_after = float(resp.headers.get("retry-after", ""))
            except ValueError:
                retry_after = None
            raise RateLimited("HTTP 429", retry_after)
        if status == 408:
            raise ProviderTimeout("HTTP 408")
        if status >= 500:
            raise ServerError(f"HTTP {status}")
        if status >= 400:
            raise ProviderError(f"HTTP {status}: {resp.text[:200]}")
        return parse_messages_response(resp.json())


def parse_messages_response(data: dict) -> ModelResponse:
    """Map a messages-style response body onto ModelResponse."""
    try:
        content = data["content"]
        if isinstance(content, str):
            text = content
        else:
            text = "".join(part.get("text", "") for part in content if part.get("type", "text") == "text")
        usage = data.get("usage", {})
        stop = _STOP_REASONS.get(data.get("stop_reason") or "", "error")
        return ModelResponse(
            text=text,
            input_tokens=int(usage.get("input_tokens", 0)),
            output_tokens=int(usage.get("output_tokens", 0)),
            stop_reason=stop,
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ServerError(f"unexpected response body: {exc}") from exc


def cassette_path(root: Path, key: str) -> Path:
    return Path(root) / key[:2] / f"{key}.json"


class ReplayAdapter:
    """Serve recorded responses from a cassette directory."""

    def __init__(self, cassette_dir):
        self.root = Path(cassette_dir)

    def load(self, key: str) -> dict:
        path = cassette_path(self.root, key)
        try:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            raise ReplayMiss(key) from None

    def complete(self, request: ModelRequest) -> ModelResponse:
        return ModelResponse.from_dict(self.load(cache_key(request))["response"])


class RecordingAdapter:
    """Forward to ``inner`` and store each response as a cassette.

    Existing cassettes are never overwritten, so recording only appends.
    Writes are serialized through a lock.
    """

    def __init__(self, inner, cassette_dir, clock=None):
        self.inner = inner
        self.root = Path(cassette_dir)
        self._lock = threading.Lock()
        self._clock = clock or (lambda: datetime.now(timezone.utc))

    def complete(self, request: ModelRequest) -> ModelResponse:
        response = self.inner.complete(request)
        key = cache_key(request)
        path = cassette_path(self.root, key)
        with self._lock:
            if path.exists():
                log.debug("cassette %s already recorded; keeping the original", key)
                return response
            path.parent.mkdir(parents=True, exist_ok=True)
            doc = {
                "request": request.to_dict(),
                "response": response.to_dict(),
                "recorded_at": self._clock().isoformat(),
            }
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                           encoding="utf-8")
            tmp.replace(path)
        return response
