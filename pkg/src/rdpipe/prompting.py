"""Prompt templates: placeholder substitution and the translation second pass."""

from __future__ import annotations

import hashlib
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

PLACEHOLDERS = frozenset({"data", "schema", "target_language", "fields"})

# Free-text HTA fields that may come back in the source language.
DEFAULT_TRANSLATION_FIELDS = (
    "indication",
    "final_recommendation",
    "comparator",
    "relative_effectiveness_outcome",
    "cost_effectiveness_outcome",
    "budget_impact_outcome",
    "managed_entry_agreements",
    "clinical_restrictions",
)


class TemplateError(Exception):
    pass


class MissingBinding(TemplateError):
    def __init__(self, name: str):
        super().__init__(f"no binding for placeholder {{{name}}}")
        self.name = name


class UnknownPlaceholder(TemplateError):
    def __init__(self, name: str):
        super().__init__(f"unknown placeholder {{{name}}}; allowed: {sorted(PLACEHOLDERS)}")
        self.name = name


_formatter = string.Formatter()


def _parse(body: str):
    try:
        return list(_formatter.parse(body))
    except ValueError as exc:
        raise TemplateError(f"malformed template: {exc}") from None


@dataclass(frozen=True)
class PromptTemplate:
    """A prompt body with ``{name}`` placeholders; ``{{`` and ``}}`` are literal braces."""

    name: str
    body: str
    required_placeholders: frozenset[str] = frozenset({"data"})

    def __post_init__(self):
        object.__setattr__(self, "required_placeholders", frozenset(self.required_placeholders))
        found = self.placeholders()
        for name in found:
            if name not in PLACEHOLDERS:
                raise UnknownPlaceholder(name)
        for name in self.required_placeholders:
            if found.count(name) != 1:
                raise TemplateError(
                    f"template {self.name!r}: placeholder {{{name}}} must occur exactly once, "
                    f"found {found.count(name)}"
                )

    def placeholders(self) -> list[str]:
        names = []
        for _, field_name, spec, conversion in _parse(self.body):
            if field_name is None:
                continue
            if spec or conversion or not field_name.isidentifier():
                raise TemplateError(f"template {self.name!r}: only bare {{name}} placeholders allowed")
            names.append(field_name)
        return names

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()

    @classmethod
    def from_file(cls, path, required: Iterable[str] = ("data",)) -> "PromptTemplate":
        path = Path(path)
        return cls(name=path.stem, body=path.read_text(encoding="utf-8"),
                   required_placeholders=frozenset(required))


def builtin_template(name: str, required: Iterable[str] = ("data",)) -> PromptTemplate:
    """Load one of the templates shipped in ``rdpipe/templates``."""
    body = resources.files("rdpipe").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")
    return PromptTemplate(name=name, body=body, required_placeholders=frozenset(required))


def render_prompt(template: PromptTemplate, bindings: Mapping[str, Any]) -> str:
    """Substitute bindings into the template body verbatim.

    Values are inserted with ``str()``; no escaping or trimming is applied.
    Extra bindings are ignored.
    """
    out = []
    for literal, field_name, _, _ in _parse(template.body):
        out.append(literal)
        if field_name is None:
            continue
        if field_name not in bindings:
            raise MissingBinding(field_name)
        out.append(str(bindings[field_name]))
    return "".join(out)


def translation_bindings(record: Mapping[str, Any], doc_language: str,
                         field_policy: Iterable[str] = DEFAULT_TRANSLATION_FIELDS) -> dict:
    """Select the fields of ``record`` that need a translation pass.

    English documents get an empty selection. For any other language the
    policy's fields are returned with their current values, skipping nulls.
    """
    if doc_language.lower().split("-")[0] == "en":
        return {"fields": {}, "target_language": "en"}
    fields = {name: record[name] for name in field_policy if record.get(name) is not None}
    return {"fields": fields, "target_language": "en"}
