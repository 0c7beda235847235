"""Run a task over a corpus: chunk, prompt, complete, retry, extract, merge."""

from __future__ import annotations

import hashlib
import json
import logging
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .chunker import (
    Budget,
    Chunk,
    ChunkPlan,
    OutputBudgetExceeded,
    OversizedUnit,
    TokenEstimatorConfig,
    check_output_budget,
    estimate_tokens,
    plan_chunks,
)
from .config import ConfigError, PipelineConfig, validate_config
from .extraction import ExtractionError, extract_json_value, validate_records
from .ingest import SourceDocument
from .prompting import PromptTemplate, render_prompt
from .provider import (
    AuthError,
    ModelRequest,
    ProviderError,
    RateBudget,
    RateLimiter,
    RetriesExhausted,
    RetryPolicy,
    cache_key,
    complete_with_retry,
)
from .provider.adapters import ReplayAdapter
from .tasks.base import Task

log = logging.getLogger(__name__)

OK = "ok"
MALFORMED = "malformed-output"
RETRIES_EXHAUSTED = "retries-exhausted"
OUTPUT_BUDGET = "output-budget-exceeded"
OUTCOMES = (OK, MALFORMED, RETRIES_EXHAUSTED, OUTPUT_BUDGET)


class CorpusFailure(RuntimeError):
    """Every chunk failed to reach a provider; the run is unusable."""


class Truncated(ExtractionError):
    pass


@dataclass
class RunResult:
    run_id: str
    records: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    def records_json(self) -> str:
        """Canonical serialization of the merged records (run-id independent)."""
        return json.dumps(self.records, sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "records": self.records, "failures": self.failures}

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        return cls(data["run_id"], list(data["records"]), list(data["failures"]))

    def records_for(self, doc_id: str) -> list[dict]:
        return [r["data"] for r in self.records if r["doc_id"] == doc_id]


@dataclass
class RunManifest:
    run_id: str
    task_name: str
    model_id: str
    temperature: float
    max_output_tokens: int
    template_hash: str
    config_hash: str
    started_at: str
    finished_at: str = ""
    documents: list[dict] = field(default_factory=list)
    plans: list[dict] = field(default_factory=list)
    entries: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(**data)


def new_run_id(task_name: str) -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    return f"{task_name}-{stamp}-{uuid.uuid4().hex[:8]}"


def templates_hash(templates: Iterable[PromptTemplate]) -> str:
    h = hashlib.sha256()
    for t in templates:
        h.update(t.name.encode() + b"\0" + t.sha256.encode() + b"\0")
    return h.hexdigest()


def merge_chunk_outputs(chunk_records: Iterable[tuple[str, int, Sequence[dict]]]) -> list[dict]:
    """Order (doc_id, chunk_index, records) triples canonically and flatten.

    Output entries carry ``doc_id``, ``chunk``, ``position`` (within the
    chunk) and ``data``. Duplicates are kept.
    """
    out = []
    for doc_id, index, records in sorted(chunk_records, key=lambda t: (t[0], t[1])):
        for pos, rec in enumerate(records):
            out.append({"doc_id": doc_id, "chunk": index, "position": pos, "data": rec})
    return out


@dataclass
class _ChunkOutcome:
    doc_id: str
    index: int
    outcome: str
    records: list[dict]
    calls: list[dict]
    detail: str = ""
    unreachable: bool = False


class Runner:
    """Executes one task run; shares the rate limiter across worker threads."""

    def __init__(self, task: Task, adapter, config: PipelineConfig, *,
                 sleep=time.sleep, limiter: RateLimiter | None = None):
        self.task = task
        self.adapter = adapter
        self.config = config
        self.sleep = sleep
        self.policy = RetryPolicy(
            max_attempts=config.retry.max_attempts,
            initial_backoff=config.retry.initial_backoff,
            backoff_multiplier=config.retry.backoff_multiplier,
            max_backoff=config.retry.max_backoff,
            jitter=config.retry.jitter,
        )
        self.limiter = limiter or RateLimiter(
            RateBudget(config.rate.tokens_per_minute, config.rate.requests_per_minute), sleep=sleep)
        self.estimator = TokenEstimatorConfig(config.budget.chars_per_token, config.budget.safety_margin)
        b = config.budget
        instruction = b.instruction_tokens
        if instruction is None:
            instruction = max(estimate_tokens(self._template_overhead(t), self.estimator)
                              for t in task.templates())
        self.budget = Budget(b.max_input_tokens, b.max_output_tokens, instruction, b.per_record_output_tokens)

    def _template_overhead(self, template: PromptTemplate) -> str:
        dummy = {name: "" for name in template.placeholders()}
        if "schema" in dummy:
            dummy["schema"] = self.task.schema.prompt_description()
        return render_prompt(template, dummy)

    def request(self, prompt: str) -> ModelRequest:
        return ModelRequest(
            model_id=self.config.model_id,
            prompt=prompt,
            max_output_tokens=self.config.budget.max_output_tokens,
            temperature=self.config.temperature,
        )

    def call(self, prompt: str, calls: list[dict], kind: str):
        """One logical completion: admit, retry, reject truncation, extract JSON."""
        request = self.request(prompt)
        key = cache_key(request)
        entry = {"kind": kind, "cache_key": key, "attempts": 0}
        calls.append(entry)
        self.limiter.acquire(estimate_tokens(prompt, self.estimator))
        stats: dict = {}
        try:
            response = complete_with_retry(self.adapter, request, self.policy, sleep=self.sleep, stats=stats)
        finally:
            entry["attempts"] = stats.get("attempts", 0)
        if response.truncated:
            raise Truncated("completion stopped at the output token limit")
        return extract_json_value(response.text, strict=self.config.strict_json)

    def run_chunk(self, document: SourceDocument, chunk: Chunk) -> _ChunkOutcome:
        calls: list[dict] = []

        def fail(outcome, exc, unreachable=False):
            log.warning("%s#%d: %s (%s)", document.id, chunk.index, outcome, exc)
            return _ChunkOutcome(document.id, chunk.index, outcome, [], calls, str(exc), unreachable)

        try:
            check_output_budget(chunk, self.budget)
        except OutputBudgetExceeded as exc:
            return fail(OUTPUT_BUDGET, exc)
        try:
            prompt = render_prompt(self.task.template, self.task.bindings(chunk, document))
            value = self.call(prompt, calls, "extract")
            records = validate_records(value, self.task.schema)

            def followup(template: PromptTemplate, bindings: dict):
                return self.call(render_prompt(template, bindings), calls, "followup")

            records = self.task.post_process(document, records, followup)
        except Truncated as exc:
            return fail(OUTPUT_BUDGET, exc)
        except (RetriesExhausted, AuthError) as exc:
            return fail(RETRIES_EXHAUSTED, exc, unreachable=True)
        except ProviderError as exc:
            # Other non-retryable provider errors (replay miss, HTTP 4xx) are
            # counted like exhausted retries: the chunk produced nothing.
            return fail(RETRIES_EXHAUSTED, exc)
        except (ExtractionError, ValueError) as exc:
            return fail(MALFORMED, exc)
        return _ChunkOutcome(document.id, chunk.index, OK, records, calls)


def run_task(corpus: Sequence[SourceDocument], task: Task, adapter, config: PipelineConfig, *,
             sleep=time.sleep, limiter: RateLimiter | None = None,
             run_id: str | None = None) -> tuple[RunResult, RunManifest]:
    """Run ``task`` over every document and return the merged result and manifest.

    Chunks are processed by up to ``config.workers`` threads; results are
    merged in (doc_id, chunk index) order, so concurrency never changes the
    output. Failed chunks are recorded, not raised.
    """
    diags = validate_config(config)
    if diags:
        raise ConfigError(diags)
    runner = Runner(task, adapter, config, sleep=sleep, limiter=limiter)
    run_id = run_id or new_run_id(task.name)
    manifest = RunManifest(
        run_id=run_id,
        task_name=task.name,
        model_id=config.model_id,
        temperature=config.temperature,
        max_output_tokens=config.budget.max_output_tokens,
        template_hash=templates_hash(task.templates()),
        config_hash=config.config_hash(),
        started_at=datetime.now(timezone.utc).isoformat(),
    )

    jobs: list[tuple[SourceDocument, Chunk]] = []
    outcomes: list[_ChunkOutcome] = []
    for doc in corpus:
        manifest.documents.append({
            "id": doc.id,
            "language": doc.language,
            "origin": doc.origin.value,
            "sha256": hashlib.sha256(doc.text.encode("utf-8")).hexdigest(),
        })
        try:
            plan = plan_chunks(doc, runner.budget, runner.estimator, task.boundary)
        except OversizedUnit as exc:
            # The whole document is unplannable; record it as one failed chunk.
            log.warning("%s", exc)
            plan = ChunkPlan(doc.id, (Chunk(doc.id, 0, doc.text, 0, len(doc.text),
                                            estimate_tokens(doc.text, runner.estimator), 0),))
            outcomes.append(_ChunkOutcome(doc.id, 0, OUTPUT_BUDGET, [], [], str(exc)))
            manifest.plans.append(plan.to_dict())
            continue
        manifest.plans.append(plan.to_dict())
        jobs.extend((doc, chunk) for chunk in plan)

    if jobs:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes.extend(pool.map(lambda job: runner.run_chunk(*job), jobs))

    outcomes.sort(key=lambda o: (o.doc_id, o.index))
    result = RunResult(run_id)
    result.records = merge_chunk_outputs(
        (o.doc_id, o.index, o.records) for o in outcomes if o.outcome == OK)
    for o in outcomes:
        manifest.entries.append({
            "doc_id": o.doc_id,
            "chunk": o.index,
            "outcome": o.outcome,
            "calls": o.calls,
            "cache_key": o.calls[0]["cache_key"] if o.calls else None,
            "attempts": sum(c["attempts"] for c in o.calls),
            "detail": o.detail,
        })
        if o.outcome != OK:
            result.failures.append({"doc_id": o.doc_id, "chunk": o.index,
                                    "outcome": o.outcome, "detail": o.detail})
    manifest.finished_at = datetime.now(timezone.utc).isoformat()

    if jobs and all(o.unreachable for o in outcomes):
        raise CorpusFailure(f"provider unreachable for all {len(outcomes)} chunks: {outcomes[0].detail}")
    return result, manifest


def run_repeated(corpus: Sequence[SourceDocument], task: Task, adapter, config: PipelineConfig,
                 n: int, **kwargs) -> list[RunResult]:
    """Run the same task ``n`` times with fresh run ids.

    ``adapter`` may be a single adapter or a sequence of ``n`` adapters, one
    per run (e.g. three separately recorded cassette sets).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    adapters = list(adapter) if isinstance(adapter, (list, tuple)) else [adapter] * n
    if len(adapters) != n:
        raise ValueError(f"got {len(adapters)} adapters for {n} runs")
    return [run_task(corpus, task, a, config, **kwargs)[0] for a in adapters]


def rerun_from_manifest(manifest: RunManifest, cassette_dir, task: Task,
                        documents: dict[str, SourceDocument] | None = None) -> RunResult:
    """Rebuild a RunResult from a manifest and its cassettes, without the corpus.

    Each entry's cassette keys are looked up directly. ``documents`` is only
    needed by tasks whose post-processing reads document metadata (the HTA
    task uses the language tag, which the manifest also records).
    """
    store = ReplayAdapter(cassette_dir)
    langs = {d["id"]: d["language"] for d in manifest.documents}
    outcomes = []
    failures = []
    for entry in manifest.entries:
        if entry["outcome"] != OK:
            failures.append({"doc_id": entry["doc_id"], "chunk": entry["chunk"],
                             "outcome": entry["outcome"], "detail": entry["detail"]})
            continue
        doc = (documents or {}).get(entry["doc_id"]) or SourceDocument(
            id=entry["doc_id"], text="", language=langs.get(entry["doc_id"], "en"))
        calls = iter(entry["calls"])

        def replay_next(_template=None, _bindings=None):
            cassette = store.load(next(calls)["cache_key"])
            return extract_json_value(cassette["response"]["text"])

        records = validate_records(replay_next(), task.schema)
        records = task.post_process(doc, records, replay_next)
        outcomes.append((entry["doc_id"], entry["chunk"], records))
    return RunResult(manifest.run_id, merge_chunk_outputs(outcomes), failures)


def write_run(result: RunResult, manifest: RunManifest, runs_dir) -> Path:
    """Write result.json and manifest.json under ``runs_dir/<run_id>/``."""
    out = Path(runs_dir) / result.run_id
    out.mkdir(parents=True, exist_ok=False)
    (out / "result.json").write_text(
        json.dumps(result.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return out


def read_run(run_dir) -> tuple[RunResult, RunManifest]:
    run_dir = Path(run_dir)
    result = RunResult.from_dict(json.loads((run_dir / "result.json").read_text(encoding="utf-8")))
    manifest = RunManifest.from_dict(json.loads((run_dir / "manifest.json").read_text(encoding="utf-8")))
    return result, manifest
