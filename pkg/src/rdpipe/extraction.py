"""Recover JSON from chatty completions and validate it against a task schema."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any

from .kernels import find_balanced_end

log = logging.getLogger(__name__)

STRING = "string"
STRING_OR_NULL = "string-or-null"


class ExtractionError(Exception):
    pass


class NoJsonFound(ExtractionError):
    pass


class MalformedJson(ExtractionError):
    def __init__(self, position: int, reason: str = ""):
        super().__init__(f"malformed JSON at position {position}" + (f": {reason}" if reason else ""))
        self.position = position


class MultipleCandidates(ExtractionError):
    """Raised only in strict mode when more than one JSON value is present."""


class ValidationError(ExtractionError):
    pass


class ShapeMismatch(ValidationError):
    pass


class MissingField(ValidationError):
    def __init__(self, name: str, record_index: int):
        super().__init__(f"record {record_index}: missing field {name!r}")
        self.name = name
        self.record_index = record_index


class UnknownField(ValidationError):
    def __init__(self, name: str, record_index: int = 0):
        super().__init__(f"record {record_index}: unknown field {name!r}")
        self.name = name
        self.record_index = record_index


class WrongKind(ValidationError):
    def __init__(self, name: str, record_index: int = 0, got: Any = None):
        super().__init__(f"record {record_index}: field {name!r} has wrong kind ({type(got).__name__})")
        self.name = name
        self.record_index = record_index


@dataclass(frozen=True)
class TaskSchema:
    name: str
    shape: str  # "array-of-objects" | "single-object"
    fields: tuple[tuple[str, str], ...]
    required: frozenset[str]

    def __post_init__(self):
        if self.shape not in ("array-of-objects", "single-object"):
            raise ValueError(f"unknown shape {self.shape!r}")
        names = self.field_names
        if len(set(names)) != len(names):
            raise ValueError("duplicate field names")
        if not set(self.required) <= set(names):
            raise ValueError("required fields must be declared fields")
        for _, kind in self.fields:
            if kind not in (STRING, STRING_OR_NULL):
                raise ValueError(f"unknown field kind {kind!r}")
        object.__setattr__(self, "required", frozenset(self.required))

    @property
    def field_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.fields)

    def to_json_schema(self) -> dict:
        props = {
            name: {"type": "string"} if kind == STRING else {"type": ["string", "null"]}
            for name, kind in self.fields
        }
        obj = {
            "type": "object",
            "properties": props,
            "required": [n for n in self.field_names if n in self.required],
            "additionalProperties": False,
        }
        if self.shape == "single-object":
            return {"title": self.name, **obj}
        return {"title": self.name, "type": "array", "items": obj}

    def prompt_description(self) -> str:
        """Compact key list used to fill the ``{schema}`` placeholder."""
        return json.dumps({name: kind for name, kind in self.fields}, indent=2)


def _candidates(raw_text: str):
    """Yield (start, end) spans of balanced bracket groups, left to right."""
    i = 0
    n = len(raw_text)
    while i < n:
        ch = raw_text[i]
        if ch == "{" or ch == "[":
            end = find_balanced_end(raw_text, i)
            if end == -1:
                yield i, -1
                i += 1
                continue
            yield i, end
            i = end
        else:
            i += 1


def extract_json_value(raw_text: str, strict: bool = False) -> Any:
    """Return the first balanced JSON object or array embedded in ``raw_text``.

    Brackets inside string literals are ignored while matching. A balanced
    group that fails strict JSON parsing is skipped; if no group parses,
    MalformedJson reports the first failure. Later candidates are logged
    (or raise MultipleCandidates when ``strict``).
    """
    first_error: MalformedJson | None = None
    found = None
    found_at = -1
    for start, end in _candidates(raw_text):
        if end == -1:
            if first_error is None:
                first_error = MalformedJson(start, "unbalanced or truncated")
            continue
        try:
            value = json.loads(raw_text[start:end])
        except json.JSONDecodeError as exc:
            if first_error is None:
                first_error = MalformedJson(start + exc.pos, exc.msg)
            continue
        if found_at == -1:
            found, found_at = value, start
            continue
        if strict:
            raise MultipleCandidates(f"JSON values at positions {found_at} and {start}")
        log.warning("ignoring additional JSON value at position %d; first at %d", start, found_at)
        break
    if found_at != -1:
        return found
    if first_error is not None:
        raise first_error
    raise NoJsonFound("no JSON object or array in completion")


def _check_record(obj: Any, schema: TaskSchema, index: int) -> dict:
    if not isinstance(obj, dict):
        raise ShapeMismatch(f"record {index} is {type(obj).__name__}, expected object")
    kinds = dict(schema.fields)
    for key in obj:
        if key not in kinds:
            raise UnknownField(key, index)
    for name in schema.field_names:
        if name not in obj:
            if name in schema.required:
                raise MissingField(name, index)
            continue
        value = obj[name]
        if value is None:
            if kinds[name] != STRING_OR_NULL:
                raise WrongKind(name, index, value)
        elif not isinstance(value, str):
            raise WrongKind(name, index, value)
    return {name: obj.get(name) for name in schema.field_names}


def validate_records(value: Any, schema: TaskSchema) -> list[dict]:
    """Check a parsed value against ``schema`` and return normalized records.

    Every returned record has all declared fields, with absent optional
    fields filled by None.
    """
    if schema.shape == "single-object":
        if not isinstance(value, dict):
            raise ShapeMismatch(f"expected a single object, got {type(value).__name__}")
        return [_check_record(value, schema, 0)]
    if not isinstance(value, list):
        raise ShapeMismatch(f"expected an array of objects, got {type(value).__name__}")
    return [_check_record(obj, schema, i) for i, obj in enumerate(value)]
