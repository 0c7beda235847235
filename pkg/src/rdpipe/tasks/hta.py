"""Health Technology Assessment document extraction task."""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass
from datetime import date
from enum import Enum
from itertools import combinations
from typing import Iterable, Sequence

from ..extraction import STRING_OR_NULL, TaskSchema, extract_json_value, validate_records
from ..ingest import HTA_FIELDS, SourceDocument
from ..prompting import DEFAULT_TRANSLATION_FIELDS, PromptTemplate, builtin_template, translation_bindings
from .base import FollowupCall, Task

log = logging.getLogger(__name__)


def hta_schema() -> TaskSchema:
    """Single-object schema with the 14 HTA data points, all string-or-null and required."""
    return TaskSchema(
        name="hta-record",
        shape="single-object",
        fields=tuple((name, STRING_OR_NULL) for name in HTA_FIELDS),
        required=frozenset(HTA_FIELDS),
    )


def needs_translation_pass(doc_language: str) -> bool:
    return doc_language.lower().split("-")[0] != "en"


_MONTHS = {
    # English
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6, "july": 7,
    "august": 8, "september": 9, "october": 10, "november": 11, "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8, "sep": 9,
    "sept": 9, "oct": 10, "nov": 11, "dec": 12,
    # French
    "janvier": 1, "février": 2, "fevrier": 2, "mars": 3, "avril": 4, "mai": 5, "juin": 6,
    "juillet": 7, "août": 8, "aout": 8, "septembre": 9, "octobre": 10, "novembre": 11,
    "décembre": 12, "decembre": 12,
    # Dutch
    "januari": 1, "februari": 2, "maart": 3, "mei": 5, "juni": 6, "juli": 7,
    "augustus": 8, "oktober": 10,
}

_ISO = re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})$")
_NUMERIC = re.compile(r"^(\d{1,2})[./-](\d{1,2})[./-](\d{4})$")
_DAY_MONTH_NAME = re.compile(r"^(\d{1,2})(?:er|st|nd|rd|th)?\s+([^\W\d_]+)\.?,?\s+(\d{4})$")
_MONTH_NAME_DAY = re.compile(r"^([^\W\d_]+)\.?\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4})$")


def normalize_date(text: str | None) -> tuple[str | None, bool]:
    """Normalize an assessment date to ISO-8601.

    Accepts ISO, day-month-year and month-day-year numerals and textual
    months (English, French, Dutch). Ambiguous numerals such as 03/04/2012
    are read day-first. Returns ``(value, ok)``; on failure the text is
    returned unchanged with ``ok`` False.
    """
    if text is None:
        return None, True
    s = " ".join(text.split())
    try:
        if m := _ISO.match(s):
            y, mo, d = map(int, m.groups())
        elif m := _NUMERIC.match(s):
            a, b, y = map(int, m.groups())
            d, mo = (b, a) if b > 12 else (a, b)
        elif m := _DAY_MONTH_NAME.match(s):
            d, mo, y = int(m.group(1)), _MONTHS[m.group(2).lower()], int(m.group(3))
        elif m := _MONTH_NAME_DAY.match(s):
            mo, d, y = _MONTHS[m.group(1).lower()], int(m.group(2)), int(m.group(3))
        else:
            return text, False
        return date(y, mo, d).isoformat(), True
    except (KeyError, ValueError):
        return text, False


class ConsistencyStatus(str, Enum):
    CONSISTENT = "consistent"
    NORMALIZED = "normalized-consistent"
    DIVERGENT = "divergent"


@dataclass(frozen=True)
class FieldConsistencyReport:
    field: str
    status: ConsistencyStatus
    similarity: float
    values: tuple


_TERMINAL_PUNCT = re.compile(r"[\s.,;:!?]+$")


def _normalize(value: str | None) -> str | None:
    if value is None:
        return None
    return _TERMINAL_PUNCT.sub("", " ".join(value.split()).casefold())


def _words(value: str | None) -> set[str]:
    return set(re.findall(r"\w+", value.casefold())) if value else set()


def jaccard(a: str | None, b: str | None) -> float:
    wa, wb = _words(a), _words(b)
    if not wa and not wb:
        return 1.0
    return len(wa & wb) / len(wa | wb)


def compare_runs(records: Sequence[dict], fields: Iterable[str] = HTA_FIELDS) -> list[FieldConsistencyReport]:
    """Per-field lexical consistency of the same record extracted in N runs.

    Byte-equal values are consistent; values equal after case folding,
    whitespace collapsing and stripping terminal punctuation are
    normalized-consistent; anything else is divergent and carries the
    minimum pairwise word-set Jaccard similarity. No semantic judgement.
    """
    if len(records) < 2:
        raise ValueError("compare_runs needs at least two runs")
    reports = []
    for name in fields:
        values = tuple(r.get(name) for r in records)
        if all(v == values[0] for v in values):
            status, sim = ConsistencyStatus.CONSISTENT, 1.0
        elif len({_normalize(v) for v in values}) == 1:
            status, sim = ConsistencyStatus.NORMALIZED, 1.0
        else:
            status = ConsistencyStatus.DIVERGENT
            sim = min(jaccard(a, b) for a, b in combinations(values, 2))
        reports.append(FieldConsistencyReport(name, status, sim, values))
    return reports


def consistency_csv(reports_by_doc: dict[str, list[FieldConsistencyReport]]) -> str:
    """CSV export: document id, field, status, similarity, run1..runN."""
    n = max((len(r.values) for reps in reports_by_doc.values() for r in reps), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["doc_id", "field", "status", "similarity"] + [f"run{i + 1}" for i in range(n)])
    for doc_id, reps in reports_by_doc.items():
        for r in reps:
            w.writerow([doc_id, r.field, r.status.value, f"{r.similarity:.4f}",
                        *["" if v is None else v for v in r.values]])
    return buf.getvalue()


class HtaTask(Task):
    name = "hta"
    boundary = "blank-line"

    def __init__(self, template: PromptTemplate | None = None,
                 translate_template: PromptTemplate | None = None,
                 translation_fields: Sequence[str] = DEFAULT_TRANSLATION_FIELDS):
        self.schema = hta_schema()
        self.template = template or builtin_template("hta", ("data", "schema"))
        self.translate_template = translate_template or builtin_template(
            "hta_translate", ("fields", "target_language"))
        self.translation_fields = tuple(translation_fields)

    def templates(self) -> list[PromptTemplate]:
        return [self.template, self.translate_template]

    def post_process(self, document: SourceDocument, records: list[dict],
                     call: FollowupCall) -> list[dict]:
        out = []
        for record in records:
            record = dict(record)
            value, ok = normalize_date(record.get("assessment_date"))
            if not ok:
                log.warning("%s: unparseable assessment date %r kept verbatim", document.id, value)
            record["assessment_date"] = value
            if needs_translation_pass(document.language):
                record = self._translate(record, document, call)
            out.append(record)
        return out

    def _translate(self, record: dict, document: SourceDocument, call: FollowupCall) -> dict:
        bindings = translation_bindings(record, document.language, self.translation_fields)
        if not bindings["fields"]:
            return record
        bindings = {**bindings, "fields": json.dumps(bindings["fields"], indent=2, ensure_ascii=False)}
        value = call(self.translate_template, bindings)
        if isinstance(value, str):
            value = extract_json_value(value)
        partial = TaskSchema(
            name="hta-translation",
            shape="single-object",
            fields=tuple((n, STRING_OR_NULL) for n in self.translation_fields),
            required=frozenset(),
        )
        translated = validate_records(value, partial)[0]
        for name in self.translation_fields:
            if name in value and record.get(name) is not None:
                record[name] = translated[name]
        return record
