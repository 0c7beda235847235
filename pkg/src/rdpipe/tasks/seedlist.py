"""Seedlist species-name extraction task."""

from __future__ import annotations

from typing import Iterable

from ..evalcore import SetMetrics, set_metrics
from ..extraction import STRING, STRING_OR_NULL, TaskSchema
from ..prompting import PromptTemplate, builtin_template
from .base import Task
from .species import SpeciesName, format_species_name, names_match, parse_species_name

SPECIES_SCHEMA = TaskSchema(
    name="species-names",
    shape="array-of-objects",
    fields=(
        ("genus", STRING),
        ("epithet", STRING_OR_NULL),
        ("subspecies", STRING_OR_NULL),
        ("variety", STRING_OR_NULL),
        ("form", STRING_OR_NULL),
        ("cultivar", STRING_OR_NULL),
        ("basionym_authors", STRING_OR_NULL),
        ("authors", STRING_OR_NULL),
        ("synonym", STRING_OR_NULL),
    ),
    required=frozenset({"genus", "epithet"}),
)


def _as_names(items: Iterable) -> list[SpeciesName]:
    out = []
    for item in items:
        if isinstance(item, SpeciesName):
            out.append(item)
        elif isinstance(item, dict):
            out.append(SpeciesName.from_dict(item))
        else:
            out.append(parse_species_name(item))
    return out


def score_page(extracted: Iterable, truth: Iterable) -> SetMetrics:
    """Precision/recall/accuracy of extracted names against a page's ground truth.

    Items may be strings, dicts or SpeciesName. Matching is greedy and
    unique: name parts must agree exactly, author citations up to
    abbreviation.
    """
    return set_metrics(_as_names(extracted), _as_names(truth), names_match)


class SeedlistTask(Task):
    name = "seedlist"
    schema = SPECIES_SCHEMA
    boundary = "blank-line"

    def __init__(self, template: PromptTemplate | None = None):
        self.template = template or builtin_template("seedlist", ("data", "schema"))

    def record_label(self, record: dict) -> str:
        return format_species_name(SpeciesName.from_dict(record))
