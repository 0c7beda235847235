"""Task plugins: seedlist species extraction, HTA data points, Kickstarter NAICS codes."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from ..prompting import PromptTemplate
from .base import Task
from .hta import HtaTask
from .kickstarter import KickstarterTask
from .seedlist import SeedlistTask

TASKS = {
    "seedlist": SeedlistTask,
    "hta": HtaTask,
    "kickstarter": KickstarterTask,
}

_REQUIRED = {
    "seedlist": ("data", "schema"),
    "hta": ("data", "schema"),
    "hta_translate": ("fields", "target_language"),
    "kickstarter": ("data", "schema"),
}


def get_task(name: str, template_paths: Mapping[str, str] | None = None, base_dir=None) -> Task:
    """Instantiate a registered task, optionally overriding its template files.

    ``template_paths`` maps template names (``seedlist``, ``hta``,
    ``hta_translate``, ``kickstarter``) to files, relative to ``base_dir``.
    """
    if name not in TASKS:
        raise KeyError(f"unknown task {name!r}; registered: {sorted(TASKS)}")
    overrides = {}
    for tname, path in (template_paths or {}).items():
        p = Path(path)
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        overrides[tname] = PromptTemplate.from_file(p, _REQUIRED.get(tname, ("data",)))
    if name == "hta":
        return HtaTask(overrides.get("hta"), overrides.get("hta_translate"))
    return TASKS[name](overrides.get(name))


__all__ = ["Task", "TASKS", "get_task", "SeedlistTask", "HtaTask", "KickstarterTask"]
