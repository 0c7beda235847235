"""Kickstarter NAICS-2017 classification task and interrater agreement."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from itertools import combinations
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from ..extraction import STRING, TaskSchema
from ..ingest import KICKSTARTER_COLUMNS, MissingColumn, RecordBatch, SourceDocument, load_csv_records
from ..prompting import PromptTemplate, builtin_template
from .base import FollowupCall, Task

GENAI = "genai"


class NaicsError(ValueError):
    pass


class WrongGranularity(NaicsError):
    pass


class UnknownCode(NaicsError):
    pass


class TooFewRaters(ValueError):
    pass


@dataclass(frozen=True)
class NaicsTable:
    entries: Mapping[str, str]

    def __post_init__(self):
        for code in self.entries:
            if len(code) != 4 or not code.isdigit():
                raise NaicsError(f"table key {code!r} is not a 4-digit code")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, code) -> bool:
        return code in self.entries

    def title(self, code: str) -> str:
        return self.entries[code]

    @classmethod
    def from_csv(cls, path) -> "NaicsTable":
        batch = load_csv_records(path, ("code", "title"))
        return cls({r["code"]: r["title"] for r in batch.records()})


@lru_cache(maxsize=1)
def load_naics_2017() -> NaicsTable:
    """The shipped 2017 4-digit NAICS table (311 codes)."""
    ref = resources.files("rdpipe").joinpath("data", "naics_2017_4digit.csv")
    with resources.as_file(ref) as path:
        return NaicsTable.from_csv(path)


def validate_naics(code: str, table: NaicsTable | None = None) -> str:
    """Return ``code`` if it is a 4-digit code present in ``table``."""
    table = table or load_naics_2017()
    if not isinstance(code, str) or len(code) != 4 or not code.isdigit():
        raise WrongGranularity(f"{code!r} is not a 4-digit NAICS code")
    if code not in table:
        raise UnknownCode(f"{code} is not in the NAICS 2017 table")
    return code


@dataclass(frozen=True)
class Rating:
    project_id: str
    rater_id: str
    code: str

    @classmethod
    def checked(cls, project_id: str, rater_id: str, code: str,
                table: NaicsTable | None = None) -> "Rating":
        return cls(project_id, rater_id, validate_naics(code, table))


@dataclass(frozen=True)
class RaterAssignment:
    by_project: Mapping[str, tuple[str, str]]
    by_rater: Mapping[str, tuple[str, ...]]

    @property
    def total(self) -> int:
        return sum(len(v) for v in self.by_rater.values())


def assign_raters(project_ids: Iterable[str], rater_ids: Sequence[str],
                  categories: Mapping[str, str] | None = None) -> RaterAssignment:
    """Staggered two-rater assignment.

    Projects are sorted (by category first when ``categories`` is given, so
    each category spreads across all raters) and project ``i`` goes to the
    raters at positions ``i mod R`` and ``(i + 1) mod R``. Adjacent raters
    therefore share a subset of projects.
    """
    raters = list(rater_ids)
    if len(raters) < 2:
        raise TooFewRaters(f"need at least 2 raters, got {len(raters)}")
    if len(set(raters)) != len(raters):
        raise ValueError("rater ids must be distinct")
    projects = sorted(set(project_ids), key=lambda p: ((categories or {}).get(p, ""), p))
    if not projects:
        raise ValueError("no projects to assign")
    r = len(raters)
    by_project = {}
    by_rater: dict[str, list[str]] = {x: [] for x in raters}
    for i, pid in enumerate(projects):
        pair = (raters[i % r], raters[(i + 1) % r])
        by_project[pid] = pair
        for rater in pair:
            by_rater[rater].append(pid)
    return RaterAssignment(
        by_project=MappingProxyType(by_project),
        by_rater=MappingProxyType({k: tuple(v) for k, v in by_rater.items()}),
    )


@dataclass(frozen=True)
class PairAgreement:
    rater_a: str
    rater_b: str
    shared: int
    matched: int
    sector_matched: int

    @property
    def fraction(self) -> float:
        return self.matched / self.shared

    @property
    def sector_fraction(self) -> float:
        """Secondary diagnostic: matches on the 2-digit sector only."""
        return self.sector_matched / self.shared


def pairwise_agreement(ratings: Iterable[Rating]) -> dict[tuple[str, str], PairAgreement]:
    """Exact 4-digit match fractions for every rater pair with shared projects.

    Keys are sorted ``(rater_a, rater_b)`` tuples; pairs with no shared
    project are omitted.
    """
    codes: dict[str, dict[str, str]] = defaultdict(dict)
    for rating in ratings:
        per_project = codes[rating.rater_id]
        if rating.project_id in per_project:
            raise ValueError(f"duplicate rating of {rating.project_id} by {rating.rater_id}")
        per_project[rating.project_id] = rating.code
    out = {}
    for a, b in combinations(sorted(codes), 2):
        shared = codes[a].keys() & codes[b].keys()
        if not shared:
            continue
        matched = sum(codes[a][p] == codes[b][p] for p in shared)
        sector = sum(codes[a][p][:2] == codes[b][p][:2] for p in shared)
        out[(a, b)] = PairAgreement(a, b, len(shared), matched, sector)
    return out


def load_ratings(path, table: NaicsTable | None = None) -> list[Rating]:
    batch = load_csv_records(path, ("project_id", "rater_id", "code"))
    return [Rating.checked(r["project_id"], r["rater_id"], r["code"], table) for r in batch.records()]


def ratings_from_result(records: Iterable[dict]) -> list[Rating]:
    """GenAI ratings from pipeline output records."""
    return [Rating(r["project_id"], GENAI, r["naics_code"]) for r in records]


def agreement_csv(report: Mapping[tuple[str, str], PairAgreement], sector: bool = False) -> str:
    """One row per rater pair: rater_a,rater_b,shared,matched,fraction (3 decimals).

    ``sector`` appends the 2-digit sector match fraction as a diagnostic column.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rater_a", "rater_b", "shared", "matched", "fraction"] + (["sector_fraction"] if sector else []))
    for (a, b), agr in sorted(report.items()):
        row = [a, b, agr.shared, agr.matched, f"{agr.fraction:.3f}"]
        if sector:
            row.append(f"{agr.sector_fraction:.3f}")
        w.writerow(row)
    return buf.getvalue()


CLASSIFICATION_SCHEMA = TaskSchema(
    name="naics-assignment",
    shape="array-of-objects",
    fields=(("project_id", STRING), ("naics_code", STRING)),
    required=frozenset({"project_id", "naics_code"}),
)


def batch_to_document(batch: RecordBatch, doc_id: str | None = None,
                      id_column: str = "id") -> SourceDocument:
    """Render a Kickstarter batch as headerless CSV rows for chunking."""
    for name in KICKSTARTER_COLUMNS:
        if name not in batch.columns:
            raise MissingColumn(name)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for i, rec in enumerate(batch.records()):
        pid = rec.get(id_column) or str(i + 1)
        w.writerow([pid, *(rec[c] for c in KICKSTARTER_COLUMNS)])
    return SourceDocument(id=doc_id or Path(batch.source).stem or "projects", text=buf.getvalue())


class KickstarterTask(Task):
    name = "kickstarter"
    schema = CLASSIFICATION_SCHEMA
    boundary = "csv-row"

    def __init__(self, template: PromptTemplate | None = None, table: NaicsTable | None = None):
        self.template = template or builtin_template("kickstarter", ("data", "schema"))
        self.table = table or load_naics_2017()

    def post_process(self, document: SourceDocument, records: list[dict],
                     call: FollowupCall) -> list[dict]:
        for rec in records:
            validate_naics(rec["naics_code"], self.table)
        return records
