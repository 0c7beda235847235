"""Task plugin interface used by the pipeline."""

from __future__ import annotations

from typing import Callable

from ..chunker import Chunk
from ..extraction import TaskSchema
from ..ingest import SourceDocument
from ..prompting import PromptTemplate

# call(template, bindings) -> parsed JSON value; routed through the same
# rate limiting, retry and cassette machinery as the main completion.
FollowupCall = Callable[[PromptTemplate, dict], object]


class Task:
    """A stateless task plugin.

    Subclasses set ``name``, ``schema``, ``template`` and ``boundary`` and
    may override :meth:`bindings` and :meth:`post_process`. Instances are
    shared between worker threads and must not keep per-call state.
    """

    name: str = ""
    schema: TaskSchema
    template: PromptTemplate
    boundary: str = "blank-line"

    def templates(self) -> list[PromptTemplate]:
        return [self.template]

    def bindings(self, chunk: Chunk, document: SourceDocument) -> dict:
        return {"data": chunk.text, "schema": self.schema.prompt_description()}

    def post_process(self, document: SourceDocument, records: list[dict],
                     call: FollowupCall) -> list[dict]:
        return records
