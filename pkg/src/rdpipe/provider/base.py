"""Provider-neutral completion contract."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Protocol


class ProviderError(Exception):
    """Base class for completion failures."""


class ProviderTimeout(ProviderError):
    pass


class RateLimited(ProviderError):
    def __init__(self, message: str = "rate limited", retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class ServerError(ProviderError):
    pass


class AuthError(ProviderError):
    pass


class ReplayMiss(ProviderError):
    """No cassette exists for the request; replay never falls through to live."""

    def __init__(self, key: str):
        super().__init__(f"no cassette for key {key}")
        self.key = key


class StopReason(str, Enum):
    COMPLETE = "complete"
    LENGTH = "length"
    ERROR = "error"


@dataclass(frozen=True)
class ModelRequest:
    model_id: str
    prompt: str
    max_output_tokens: int = 4096
    temperature: float = 0.0

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be nonempty")
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ModelResponse:
    text: str
    input_tokens: int = 0
    output_tokens: int = 0
    stop_reason: StopReason = StopReason.COMPLETE

    def __post_init__(self):
        object.__setattr__(self, "stop_reason", StopReason(self.stop_reason))

    @property
    def truncated(self) -> bool:
        return self.stop_reason is StopReason.LENGTH

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "stop_reason": self.stop_reason.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelResponse":
        return cls(
            text=data["text"],
            input_tokens=int(data.get("input_tokens", 0)),
            output_tokens=int(data.get("output_tokens", 0)),
            stop_reason=data.get("stop_reason", "complete"),
        )


class Adapter(Protocol):
    def complete(self, request: ModelRequest) -> ModelResponse: ...


def canonical_request_bytes(request: ModelRequest) -> bytes:
    payload = {
        "model_id": request.model_id,
        "temperature": float(request.temperature),
        "max_output_tokens": int(request.max_output_tokens),
        "prompt": request.prompt,
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def cache_key(request: ModelRequest) -> str:
    """SHA-256 over the canonical JSON of the four request fields, lowercase hex."""
    return hashlib.sha256(canonical_request_bytes(request)).hexdigest()
