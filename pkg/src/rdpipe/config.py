"""Pipeline configuration: a JSON key-value tree with validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

MODES = ("live", "replay", "record")


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass
class BudgetConfig:
    max_input_tokens: int = 150_000
    max_output_tokens: int = 4096
    instruction_tokens: int | None = None  # None: estimated from the template
    per_record_output_tokens: int = 60
    chars_per_token: float = 4.0
    safety_margin: float = 0.10


@dataclass
class RetryConfig:
    max_attempts: int = 5
    initial_backoff: float = 1.0
    backoff_multiplier: float = 2.0
    max_backoff: float = 60.0
    jitter: bool = False


@dataclass
class RateConfig:
    tokens_per_minute: int = 400_000
    requests_per_minute: int = 50


@dataclass
class EndpointConfig:
    url: str = "https://api.anthropic.com/v1/messages"
    auth_header: str = "x-api-key"
    api_key_env: str = "GENAI_API_KEY"
    headers: dict = field(default_factory=lambda: {"anthropic-version": "2023-06-01"})
    timeout: float = 120.0


@dataclass
class PipelineConfig:
    model_id: str = "claude-3-opus-20240229"
    temperature: float = 0.0
    allow_nonzero_temperature: bool = False
    mode: str = "replay"
    cassette_dir: str = "cassettes"
    workers: int = 4
    strict_json: bool = False
    templates: dict = field(default_factory=dict)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    retry: RetryConfig = field(default_factory=RetryConfig)
    rate: RateConfig = field(default_factory=RateConfig)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    base_dir: str | None = field(default=None, repr=False, compare=False)

    _NESTED = {"budget": BudgetConfig, "retry": RetryConfig, "rate": RateConfig, "endpoint": EndpointConfig}

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def resolve(self, path: str) -> Path:
        p = Path(path)
        if not p.is_absolute() and self.base_dir:
            p = Path(self.base_dir) / p
        return p

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "PipelineConfig":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError([f"unknown config key: {k}" for k in sorted(unknown)])
        kwargs = {}
        for key, value in data.items():
            if key in cls._NESTED:
                sub = cls._NESTED[key]
                sub_known = {f.name for f in fields(sub)}
                bad = set(value) - sub_known
                if bad:
                    raise ConfigError([f"unknown config key: {key}.{k}" for k in sorted(bad)])
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        return cls(**kwargs, base_dir=str(base_dir) if base_dir else None)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON: {exc}"]) from None
        return cls.from_dict(data, base_dir=path.parent)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def default_config() -> PipelineConfig:
    text = resources.files("rdpipe").joinpath("data", "default_config.json").read_text(encoding="utf-8")
    return PipelineConfig.from_dict(json.loads(text))


def _positive_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value > 0


def validate_config(config: PipelineConfig) -> list[str]:
    """Return human-readable diagnostics; an empty list means the config is usable."""
    diags = []
    if not config.model_id:
        diags.append("model_id must be set")
    if not isinstance(config.temperature, (int, float)) or not 0 <= config.temperature <= 2:
        diags.append(f"temperature {config.temperature!r} outside [0, 2]")
    elif config.temperature > 0 and not config.allow_nonzero_temperature:
        diags.append(
            f"temperature is pinned to 0 to minimise output variability; got {config.temperature} "
            "(set allow_nonzero_temperature to override)"
        )
    if config.mode not in MODES:
        diags.append(f"mode must be one of {MODES}, got {config.mode!r}")
    if not _positive_int(config.workers):
        diags.append("workers must be a positive integer")

    b = config.budget
    for name in ("max_input_tokens", "max_output_tokens", "per_record_output_tokens"):
        if not _positive_int(getattr(b, name)):
            diags.append(f"budget.{name} must be a positive integer, got {getattr(b, name)!r}")
    if b.instruction_tokens is not None and (
            not isinstance(b.instruction_tokens, int) or b.instruction_tokens < 0
            or (_positive_int(b.max_input_tokens) and b.instruction_tokens >= b.max_input_tokens)):
        diags.append("budget.instruction_tokens must be in [0, max_input_tokens)")
    if not isinstance(b.chars_per_token, (int, float)) or b.chars_per_token <= 0:
        diags.append("budget.chars_per_token must be positive")
    if not isinstance(b.safety_margin, (int, float)) or not 0 <= b.safety_margin < 1:
        diags.append("budget.safety_margin must be in [0, 1)")

    r = config.retry
    if not _positive_int(r.max_attempts):
        diags.append("retry.max_attempts must be a positive integer")
    if not isinstance(r.initial_backoff, (int, float)) or r.initial_backoff < 0:
        diags.append("retry.initial_backoff must be >= 0")
    if not isinstance(r.backoff_multiplier, (int, float)) or r.backoff_multiplier < 1:
        diags.append("retry.backoff_multiplier must be >= 1")

    for name in ("tokens_per_minute", "requests_per_minute"):
        if not _positive_int(getattr(config.rate, name)):
            diags.append(f"rate.{name} must be a positive integer")

    if (_positive_int(config.rate.tokens_per_minute) and _positive_int(b.max_input_tokens)
            and config.rate.tokens_per_minute < b.max_input_tokens):
        diags.append("rate.tokens_per_minute must be >= budget.max_input_tokens or full chunks are never admitted")

    for tname, tpath in config.templates.items():
        if not config.resolve(tpath).is_file():
            diags.append(f"template {tname!r} not found: {tpath}")
    return diags
