"""Ranked candidate lists and the TREC run interchange format.

A run file line is ``query_id Q0 doc_id rank score tag``. Scores are
written with six decimals so reruns are byte-identical. Within a list,
ranks are contiguous from 1 and doc ids are distinct; retrieval-stage
scores are additionally non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable


class RankingError(ValueError):
    """Raised for malformed ranked lists or run files."""


class Stage(str, Enum):
    """Provenance of a ranked list."""

    RETRIEVAL = "retrieval"
    RERANK_LISTWISE = "rerank-listwise"
    RERANK_PAIRWISE = "rerank-pairwise"
    RERANK_LEXICAL = "rerank-lexical"
    ORACLE = "oracle"


@dataclass(frozen=True)
class RankedItem:
    doc_id: str
    score: float
    rank: int


@dataclass
class RankedList:
    """Ordered candidates for one query, tagged with the producing stage.

    ``meta`` carries run-level diagnostics (fallback flags, comparison
    counts); it is not serialized to run files and is excluded from
    equality.
    """

    query_id: str
    items: list[RankedItem]
    stage: Stage
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        seen: set[str] = set()
        prev_score: float | None = None
        for pos, item in enumerate(self.items, 1):
            if item.rank != pos:
                raise RankingError(
                    f"query {self.query_id!r}: rank {item.rank} at position {pos}; ranks must be 1..n"
                )
            if item.doc_id in seen:
                raise RankingError(f"query {self.query_id!r}: duplicate doc id {item.doc_id!r}")
            seen.add(item.doc_id)
            if self.stage is Stage.RETRIEVAL and prev_score is not None and item.score > prev_score:
                raise RankingError(
                    f"query {self.query_id!r}: retrieval scores must be non-increasing "
                    f"(rank {item.rank} has {item.score} after {prev_score})"
                )
            prev_score = item.score

    @classmethod
    def from_ordered(
        cls,
        query_id: str,
        stage: Stage,
        scored: Iterable[tuple[str, float]],
        meta: dict | None = None,
    ) -> "RankedList":
        """Build a list from (doc_id, score) pairs already in rank order."""
        items = [RankedItem(doc_id, float(score), pos) for pos, (doc_id, score) in enumerate(scored, 1)]
        return cls(query_id=query_id, items=items, stage=stage, meta=meta or {})

    def doc_ids(self) -> list[str]:
        return [item.doc_id for item in self.items]

    def head(self, n: int) -> list[RankedItem]:
        return self.items[:n]

    def __len__(self) -> int:
        return len(self.items)


def write_run(path: str | Path, runs: Iterable[RankedList], tag: str | None = None) -> None:
    """Write ranked lists as a TREC run file.

    The tag column is the stage name, optionally suffixed with a run name
    (``retrieval.myrun``) so the stage stays recoverable on read.
    """
    with open(path, "w", encoding="utf-8") as handle:
        for run in runs:
            line_tag = run.stage.value if tag is None else f"{run.stage.value}.{tag}"
            for item in run.items:
                handle.write(f"{run.query_id} Q0 {item.doc_id} {item.rank} {item.score:.6f} {line_tag}\n")


def read_run(path: str | Path, stage: Stage | None = None) -> list[RankedList]:
    """Parse a TREC run file back into per-query ranked lists.

    The stage is recovered from the tag column when it names a known stage;
    pass ``stage`` to override. Lines for one query may appear in any order;
    they are sorted by the rank column and must form a contiguous 1..n
    sequence.
    """
    rows: dict[str, list[tuple[int, str, float]]] = {}
    tags: dict[str, str] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise RankingError(f"{path}, line {lineno}: expected 6 fields, got {len(parts)}")
            qid, _, did, rank_str, score_str, tag = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError:
                raise RankingError(f"{path}, line {lineno}: bad rank/score") from None
            if qid not in rows:
                rows[qid] = []
                order.append(qid)
                tags[qid] = tag
            rows[qid].append((rank, did, score))

    runs: list[RankedList] = []
    for qid in order:
        entries = sorted(rows[qid])
        run_stage = stage
        if run_stage is None:
            try:
                run_stage = Stage(tags[qid].split(".", 1)[0])
            except ValueError:
                run_stage = Stage.RETRIEVAL
        items = [RankedItem(did, score, rank) for rank, did, score in entries]
        runs.append(RankedList(query_id=qid, items=items, stage=run_stage, meta={"tag": tags[qid]}))
    return runs
