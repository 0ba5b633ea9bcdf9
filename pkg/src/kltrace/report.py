"""Structured pass/fail reports shared by all checkers.

Witnesses are plain JSON-ready dicts of strings so reports serialise
deterministically; checkers sort their witness lists before wrapping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = ["Report", "witness_sort_key", "passed", "failed", "from_witnesses"]


def witness_sort_key(w: Mapping) -> str:
    return json.dumps(w, sort_keys=True)


@dataclass(frozen=True)
class Report:
    """Outcome of a check: ``pass``, ``fail`` or ``info`` plus witnesses."""

    status: str
    witnesses: tuple = ()
    stats: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.status not in ("pass", "fail", "info"):
            raise ValueError(f"bad report status {self.status!r}")
        if self.status == "fail" and not self.witnesses:
            raise ValueError("failing reports need at least one witness")

    @property
    def ok(self) -> bool:
        return self.status != "fail"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "witnesses": [dict(w) for w in self.witnesses],
            "stats": dict(self.stats),
        }


def passed(stats: Mapping | None = None) -> Report:
    return Report("pass", (), dict(stats or {}))


def failed(witnesses: Iterable[Mapping], stats: Mapping | None = None) -> Report:
    ordered = tuple(sorted((dict(w) for w in witnesses), key=witness_sort_key))
    return Report("fail", ordered, dict(stats or {}))


def from_witnesses(witnesses: Iterable[Mapping], stats: Mapping | None = None) -> Report:
    ordered = tuple(sorted((dict(w) for w in witnesses), key=witness_sort_key))
    if ordered:
        return Report("fail", ordered, dict(stats or {}))
    return Report("pass", (), dict(stats or {}))
