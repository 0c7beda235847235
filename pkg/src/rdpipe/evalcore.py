"""Task-agnostic reliability metrics: accuracy, multi-run consistency and CER."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Sequence

from .kernels import levenshtein


class EmptyReference(ValueError):
    pass


@dataclass(frozen=True)
class SetMetrics:
    precision: float
    recall: float
    accuracy: float
    matched: int
    predicted: int
    truth: int
    precision_undefined: bool = False
    recall_undefined: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _eq(a, b) -> bool:
    return a == b


def greedy_match(predicted: Sequence, truth: Sequence,
                 matcher: Callable[[Any, Any], bool] = _eq) -> list[tuple[int, int]]:
    """Pair each predicted item with the first unused truth item it matches."""
    used = [False] * len(truth)
    pairs = []
    for i, p in enumerate(predicted):
        for j, t in enumerate(truth):
            if not used[j] and matcher(p, t):
                used[j] = True
                pairs.append((i, j))
                break
    return pairs


def set_metrics(predicted: Sequence, truth: Sequence,
                matcher: Callable[[Any, Any], bool] = _eq) -> SetMetrics:
    """Precision, recall and Jaccard-style accuracy under a task matcher.

    accuracy = matched / (|predicted| + |truth| - matched). Empty inputs
    report 0 for the undefined ratio and set the matching flag; two empty
    sets score 1.0 throughout.
    """
    predicted, truth = list(predicted), list(truth)
    matched = len(greedy_match(predicted, truth, matcher))
    union = len(predicted) + len(truth) - matched
    if not predicted and not truth:
        return SetMetrics(1.0, 1.0, 1.0, 0, 0, 0)
    return SetMetrics(
        precision=matched / len(predicted) if predicted else 0.0,
        recall=matched / len(truth) if truth else 0.0,
        accuracy=matched / union,
        matched=matched,
        predicted=len(predicted),
        truth=len(truth),
        precision_undefined=not predicted,
        recall_undefined=not truth,
    )


def _sort_key(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True, ensure_ascii=False)


def _hashable(value: Any) -> Hashable:
    try:
        hash(value)
        return value
    except TypeError:
        return ("__json__", json.dumps(value, sort_keys=True, ensure_ascii=False))


@dataclass(frozen=True)
class ConsistencyReport:
    key: Any
    values: tuple
    agreement: float
    majority: Any
    tie: bool = False

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "values": list(self.values),
            "agreement": self.agreement,
            "majority": self.majority,
            "tie": self.tie,
        }


def consistency(values_across_runs: Sequence, key: Any = None) -> ConsistencyReport:
    """Modal agreement of one output across repeated runs.

    agreement is the fraction of runs equal to the modal value. Ties pick
    the lexicographically smallest candidate (by its JSON text for non
    strings) and set ``tie``.
    """
    values = tuple(values_across_runs)
    if len(values) < 2:
        raise ValueError("consistency needs at least two runs")
    hashed = [_hashable(v) for v in values]
    counts = Counter(hashed)
    top = max(counts.values())
    modal = [h for h, c in counts.items() if c == top]
    originals = {h: v for h, v in zip(hashed, values)}
    majority = min((originals[h] for h in modal), key=_sort_key)
    return ConsistencyReport(
        key=key,
        values=values,
        agreement=top / len(values),
        majority=majority,
        tie=len(modal) > 1,
    )


def edit_distance(candidate: str, reference: str) -> int:
    return levenshtein(candidate, reference)


def character_error_rate(candidate: str, reference: str) -> float:
    """Levenshtein distance divided by the reference length (can exceed 1)."""
    if not reference:
        raise EmptyReference("CER is undefined for an empty reference")
    return levenshtein(candidate, reference) / len(reference)
