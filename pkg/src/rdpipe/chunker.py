"""Token estimation and boundary-aware chunk planning."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterator

from .ingest import SourceDocument

BOUNDARIES = ("line", "blank-line", "csv-row")


class OversizedUnit(Exception):
    """A single boundary-delimited unit does not fit the input budget."""

    def __init__(self, doc_id: str, position: int, tokens: int, budget: int):
        super().__init__(
            f"{doc_id}: unit at char {position} needs ~{tokens} tokens, budget is {budget}"
        )
        self.doc_id = doc_id
        self.position = position


class OutputBudgetExceeded(Exception):
    def __init__(self, needed: int, allowed: int):
        super().__init__(f"expected output ~{needed} tokens exceeds limit {allowed}")
        self.needed = needed
        self.allowed = allowed


@dataclass(frozen=True)
class TokenEstimatorConfig:
    chars_per_token: float = 4.0
    safety_margin: float = 0.10

    def __post_init__(self):
        if not self.chars_per_token > 0:
            raise ValueError("chars_per_token must be positive")
        if not 0 <= self.safety_margin < 1:
            raise ValueError("safety_margin must be in [0, 1)")


@dataclass(frozen=True)
class Budget:
    max_input_tokens: int
    max_output_tokens: int
    instruction_tokens: int = 0
    per_record_output_tokens: int = 50

    def __post_init__(self):
        if self.max_input_tokens <= 0 or self.max_output_tokens <= 0:
            raise ValueError("token limits must be positive")
        if self.per_record_output_tokens <= 0:
            raise ValueError("per_record_output_tokens must be positive")
        if not 0 <= self.instruction_tokens < self.max_input_tokens:
            raise ValueError("instruction_tokens must be in [0, max_input_tokens)")

    def effective_input(self, config: TokenEstimatorConfig) -> int:
        return math.floor((self.max_input_tokens - self.instruction_tokens) * (1 - config.safety_margin))


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    index: int
    text: str
    start: int
    end: int
    estimated_tokens: int
    record_count_estimate: int


@dataclass(frozen=True)
class ChunkPlan:
    doc_id: str
    chunks: tuple[Chunk, ...] = field(default_factory=tuple)

    def __iter__(self) -> Iterator[Chunk]:
        return iter(self.chunks)

    def __len__(self) -> int:
        return len(self.chunks)

    def text(self) -> str:
        return "".join(c.text for c in self.chunks)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chunks": [
                {k: v for k, v in asdict(c).items() if k != "text"} for c in self.chunks
            ],
        }


def estimate_tokens(text: str, config: TokenEstimatorConfig = TokenEstimatorConfig()) -> int:
    return math.ceil(len(text) / config.chars_per_token)


def _line_units(text: str) -> list[str]:
    return text.splitlines(keepends=True)


def _blank_line_units(text: str) -> list[str]:
    # A unit is a paragraph plus the blank lines that follow it.
    units: list[str] = []
    current: list[str] = []
    in_gap = False
    for line in text.splitlines(keepends=True):
        blank = not line.strip()
        if in_gap and not blank:
            units.append("".join(current))
            current = []
            in_gap = False
        current.append(line)
        if blank and any(l.strip() for l in current):
            in_gap = True
    if current:
        units.append("".join(current))
    return units


def _csv_row_units(text: str) -> list[str]:
    # Row ends at a newline outside double quotes (RFC 4180 quoting).
    units = []
    in_quotes = False
    start = 0
    for i, ch in enumerate(text):
        if ch == '"':
            in_quotes = not in_quotes
        elif ch == "\n" and not in_quotes:
            units.append(text[start:i + 1])
            start = i + 1
    if start < len(text):
        units.append(text[start:])
    return units


_SPLITTERS = {
    "line": _line_units,
    "blank-line": _blank_line_units,
    "csv-row": _csv_row_units,
}


def split_units(text: str, boundary: str) -> list[str]:
    """Split ``text`` into boundary-delimited units whose concatenation is ``text``."""
    try:
        return _SPLITTERS[boundary](text)
    except KeyError:
        raise ValueError(f"unknown boundary {boundary!r}; expected one of {BOUNDARIES}") from None


def count_records(text: str, boundary: str) -> int:
    """Expected number of output records for a piece of text.

    CSV chunks count rows; text chunks count non-blank lines, since
    seedlist paragraphs usually hold one name per line.
    """
    if boundary == "csv-row":
        return sum(1 for u in _csv_row_units(text) if u.strip())
    return sum(1 for line in text.splitlines() if line.strip())


def plan_chunks(document: SourceDocument, budget: Budget,
                config: TokenEstimatorConfig = TokenEstimatorConfig(),
                boundary: str = "blank-line") -> ChunkPlan:
    """Greedily pack boundary units into chunks under the input and output budgets.

    Chunks never overlap and always concatenate back to ``document.text``.
    Raises OversizedUnit if one unit alone exceeds the effective input budget.
    """
    limit = budget.effective_input(config)
    max_records = budget.max_output_tokens // budget.per_record_output_tokens
    chunks: list[Chunk] = []
    parts: list[str] = []
    cur_len = cur_records = 0
    start = pos = 0

    def flush():
        nonlocal parts, start, cur_len, cur_records
        if not parts:
            return
        text = "".join(parts)
        chunks.append(Chunk(
            doc_id=document.id,
            index=len(chunks),
            text=text,
            start=start,
            end=start + len(text),
            estimated_tokens=estimate_tokens(text, config),
            record_count_estimate=cur_records,
        ))
        start += len(text)
        parts = []
        cur_len = cur_records = 0

    for unit in split_units(document.text, boundary):
        unit_tokens = estimate_tokens(unit, config)
        if unit_tokens > limit:
            raise OversizedUnit(document.id, pos, unit_tokens, limit)
        unit_records = count_records(unit, boundary)
        if parts and (
            math.ceil((cur_len + len(unit)) / config.chars_per_token) > limit
            or cur_records + unit_records > max_records
        ):
            flush()
        parts.append(unit)
        cur_len += len(unit)
        cur_records += unit_records
        pos += len(unit)
    flush()
    return ChunkPlan(doc_id=document.id, chunks=tuple(chunks))


def check_output_budget(chunk: Chunk, budget: Budget) -> None:
    """Raise OutputBudgetExceeded unless the chunk's expected output fits."""
    needed = chunk.record_count_estimate * budget.per_record_output_tokens
    if needed > budget.max_output_tokens:
        raise OutputBudgetExceeded(needed, budget.max_output_tokens)
