"""Loading corpora: text documents, CSV record batches and ground-truth files."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

HTA_FIELDS = (
    "hta_id",
    "assessment_type",
    "internal_identifier",
    "inn",
    "brand_name",
    "assessment_date",
    "indication",
    "final_recommendation",
    "comparator",
    "relative_effectiveness_outcome",
    "cost_effectiveness_outcome",
    "budget_impact_outcome",
    "managed_entry_agreements",
    "clinical_restrictions",
)

KICKSTARTER_COLUMNS = ("name", "blurb", "category", "subcategory")


class IngestError(Exception):
    """Base class for corpus loading failures."""


class FileMissing(IngestError):
    pass


class EncodingError(IngestError):
    pass


class MissingColumn(IngestError):
    def __init__(self, name: str):
        super().__init__(f"missing required column: {name!r}")
        self.name = name


class RaggedRow(IngestError):
    def __init__(self, line: int, expected: int, got: int):
        super().__init__(f"line {line}: expected {expected} cells, got {got}")
        self.line = line


class ParseError(IngestError):
    pass


class KindMismatch(IngestError):
    pass


class DuplicateId(IngestError):
    pass


class Origin(str, Enum):
    DIGITAL = "digital-text"
    OCR = "ocr-text"


@dataclass(frozen=True)
class SourceDocument:
    id: str
    text: str
    language: str = "en"
    origin: Origin = Origin.DIGITAL
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be nonempty")
        if not self.language:
            raise ValueError("language tag must be nonempty")
        object.__setattr__(self, "origin", Origin(self.origin))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))


@dataclass(frozen=True)
class RecordBatch:
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    source: str = ""

    def column(self, name: str) -> list[str]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def records(self) -> list[dict[str, str]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()


class GroundTruthKind(str, Enum):
    SPECIES_SET = "species-set"
    HTA_RECORD = "hta-record"
    NAICS_LABEL = "naics-label"


@dataclass(frozen=True)
class GroundTruth:
    kind: GroundTruthKind
    payload: Mapping[str, Any]

    def check_keys(self, known_ids: Iterable[str]) -> None:
        """Raise KeyError if any ground-truth key is not a known document id."""
        missing = set(self.payload) - set(known_ids)
        if missing:
            raise KeyError(f"ground truth refers to unknown ids: {sorted(missing)}")


def _read_utf8(path: Path) -> str:
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise FileMissing(str(path)) from None
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path}: invalid UTF-8 at byte {exc.start}") from None


def load_text_document(path, id: str | None = None, language: str = "en",
                       origin: Origin | str = Origin.DIGITAL,
                       metadata: Mapping[str, str] | None = None) -> SourceDocument:
    """Load one UTF-8 text file verbatim. The id defaults to the file stem."""
    path = Path(path)
    text = _read_utf8(path)
    return SourceDocument(
        id=id or path.stem,
        text=text,
        language=language or "en",
        origin=Origin(origin),
        metadata=metadata or {},
    )


def load_corpus(directory) -> list[SourceDocument]:
    """Load a corpus directory.

    If ``corpus.json`` exists it lists entries with ``id``, ``path`` and
    optional ``language``/``origin``/``metadata``; otherwise every ``*.txt``
    file is loaded with default settings, in sorted order.
    """
    directory = Path(directory)
    index = directory / "corpus.json"
    docs = []
    if index.exists():
        for entry in json.loads(_read_utf8(index)):
            docs.append(load_text_document(
                directory / entry["path"],
                id=entry.get("id"),
                language=entry.get("language", "en"),
                origin=entry.get("origin", Origin.DIGITAL),
                metadata=entry.get("metadata"),
            ))
    else:
        docs = [load_text_document(p) for p in sorted(directory.glob("*.txt"))]
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise DuplicateId(doc.id)
        seen.add(doc.id)
    return docs


def load_csv_records(path, required_columns: Sequence[str] = ()) -> RecordBatch:
    path = Path(path)
    text = _read_utf8(path)
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=",", quotechar='"')
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty CSV, header row required") from None
    for name in required_columns:
        if name not in header:
            raise MissingColumn(name)
    rows = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise RaggedRow(reader.line_num, len(header), len(row))
        rows.append(tuple(row))
    return RecordBatch(columns=tuple(header), rows=tuple(rows), source=str(path))


def _validate_species(payload, path):
    from .tasks.species import UnparseableName, parse_species_name

    out = {}
    for doc_id, names in payload.items():
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ParseError(f"{path}: species-set entry {doc_id!r} must be a list of strings")
        try:
            out[doc_id] = tuple(parse_species_name(n) for n in names)
        except UnparseableName as exc:
            raise ParseError(f"{path}: {exc}") from None
    return out


def _validate_naics(payload, path):
    for record_id, code in payload.items():
        if not isinstance(code, str) or len(code) != 4 or not code.isdigit():
            raise ParseError(f"{path}: {record_id!r} has non 4-digit NAICS code {code!r}")
    return dict(payload)


def _validate_hta(payload, path):
    expected = set(HTA_FIELDS)
    for doc_id, record in payload.items():
        if not isinstance(record, dict):
            raise ParseError(f"{path}: hta-record entry {doc_id!r} must be an object")
        keys = set(record)
        if keys != expected:
            missing = sorted(expected - keys)
            extra = sorted(keys - expected)
            raise ParseError(f"{path}: {doc_id!r} fields mismatch (missing={missing}, extra={extra})")
        for name, value in record.items():
            if value is not None and not isinstance(value, str):
                raise ParseError(f"{path}: {doc_id!r}.{name} must be string or null")
    return {k: dict(v) for k, v in payload.items()}


_VALIDATORS = {
    GroundTruthKind.SPECIES_SET: _validate_species,
    GroundTruthKind.NAICS_LABEL: _validate_naics,
    GroundTruthKind.HTA_RECORD: _validate_hta,
}


def load_ground_truth(path, kind: GroundTruthKind | str) -> GroundTruth:
    """Load a JSON ground-truth file and validate it for ``kind``.

    Species names are parsed into :class:`SpeciesName`; NAICS labels must be
    4-digit strings; HTA records must carry exactly the 14 extraction fields.
    A top-level ``"kind"`` key, if present, must agree with ``kind``.
    """
    kind = GroundTruthKind(kind)
    path = Path(path)
    try:
        data = json.loads(_read_utf8(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    declared = data.pop("kind", None)
    if declared is not None and declared != kind.value:
        raise KindMismatch(f"{path}: declared {declared!r}, expected {kind.value!r}")
    return GroundTruth(kind=kind, payload=MappingProxyType(_VALIDATORS[kind](data, path)))
