"""Ranking quality metrics: Precision@k, nDCG@k, and oracle precision.

Gains are binary, so DCG uses the linear form gain / log2(rank + 1) (the
exponential form is identical for binary gains). The ideal DCG is computed
from the query's full relevant count in the qrels, not just the retrieved
window: a reranker therefore cannot reach nDCG 1.0 when the first stage
missed relevant documents. A run shorter than the cutoff is an explicit
error, never a silent renormalization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from audiorank.corpus import Qrels
from audiorank.ranking import RankedList


class MetricsError(ValueError):
    """Raised for invalid cutoffs, short runs, or unjudged queries."""


def _gains(run: RankedList, qrels: Qrels, k: int) -> list[int]:
    if k < 1:
        raise MetricsError(f"cutoff must be >= 1, got {k}")
    if len(run.items) < k:
        raise MetricsError(
            f"run for query {run.query_id!r} has {len(run.items)} items; cutoff {k} needs at least {k}"
        )
    return [qrels.gain(run.query_id, item.doc_id) for item in run.items[:k]]


def precision_at_k(run: RankedList, qrels: Qrels, k: int) -> float:
    """Fraction of the top-k documents that are relevant."""
    gains = _gains(run, qrels, k)
    return sum(gains) / k


def dcg(gains: Sequence[int]) -> float:
    return sum(g / math.log2(i + 1) for i, g in enumerate(gains, 1))


def ndcg_at_k(run: RankedList, qrels: Qrels, k: int, idcg_pool: str = "corpus") -> float:
    """DCG@k normalized by the ideal DCG@k.

    ``idcg_pool`` picks where the ideal ranking draws its gains from:
    "corpus" (default) uses the query's full relevant count in the qrels,
    "window" only what the run itself retrieved. Queries with no relevant
    documents score 0.0 (the caller is expected to flag them).
    """
    gains = _gains(run, qrels, k)
    if idcg_pool == "corpus":
        relevant = qrels.relevant_count(run.query_id)
    elif idcg_pool == "window":
        relevant = sum(qrels.gain(run.query_id, item.doc_id) for item in run.items)
    else:
        raise MetricsError(f"unknown idcg_pool {idcg_pool!r}")
    if relevant == 0:
        return 0.0
    ideal = dcg([1] * min(k, relevant))
    return dcg(gains) / ideal


def oracle_precision(run: RankedList, qrels: Qrels, k: int, window: int = 10) -> float:
    """Precision@k of the best possible reordering of the top-``window`` items.

    With binary gains this is min(k, R) / k where R is the number of
    relevant documents inside the window.
    """
    if k < 1:
        raise MetricsError(f"cutoff must be >= 1, got {k}")
    if k > window:
        raise MetricsError(f"cutoff {k} exceeds the reranking window {window}")
    if len(run.items) < window:
        raise MetricsError(
            f"run for query {run.query_id!r} has {len(run.items)} items; window is {window}"
        )
    relevant_in_window = sum(qrels.gain(run.query_id, item.doc_id) for item in run.head(window))
    return min(k, relevant_in_window) / k


DEFAULT_NDCG_CUTOFFS = (3, 5, 10)
DEFAULT_PRECISION_CUTOFFS = (1, 3, 5)


@dataclass
class MetricReport:
    """Per-query metric values plus their macro-average."""

    metric_names: list[str]
    per_query: dict[str, dict[str, float]]
    mean: dict[str, float]
    flagged: list[str]

    def to_json(self) -> dict:
        return {
            "metrics": self.metric_names,
            "per_query": self.per_query,
            "mean": self.mean,
            "flagged_no_relevant": self.flagged,
        }


def evaluate_run(
    runs: Iterable[RankedList],
    qrels: Qrels,
    ndcg_cutoffs: Sequence[int] = DEFAULT_NDCG_CUTOFFS,
    precision_cutoffs: Sequence[int] = DEFAULT_PRECISION_CUTOFFS,
    idcg_pool: str = "corpus",
) -> MetricReport:
    """Compute the metric table for a run, macro-averaged over queries.

    Every run query must be judged in the qrels; unknown queries are
    reported together in one error. Queries without any relevant document
    are flagged in the report (their nDCG is 0 by convention).
    """
    runs = list(runs)
    seen: set[str] = set()
    for run in runs:
        if run.query_id in seen:
            raise MetricsError(f"duplicate run for query {run.query_id!r}")
        seen.add(run.query_id)
    missing = sorted(run.query_id for run in runs if run.query_id not in qrels)
    if missing:
        raise MetricsError(f"queries missing from qrels: {', '.join(missing)}")
    if not runs:
        raise MetricsError("no queries in run")

    names = [f"ndcg@{k}" for k in ndcg_cutoffs] + [f"precision@{k}" for k in precision_cutoffs]
    per_query: dict[str, dict[str, float]] = {}
    flagged: list[str] = []
    for run in runs:
        values: dict[str, float] = {}
        for k in ndcg_cutoffs:
            values[f"ndcg@{k}"] = ndcg_at_k(run, qrels, k, idcg_pool=idcg_pool)
        for k in precision_cutoffs:
            values[f"precision@{k}"] = precision_at_k(run, qrels, k)
        per_query[run.query_id] = values
        if qrels.relevant_count(run.query_id) == 0:
            flagged.append(run.query_id)

    mean = {
        name: sum(values[name] for values in per_query.values()) / len(per_query) for name in names
    }
    return MetricReport(metric_names=names, per_query=per_query, mean=mean, flagged=flagged)


def write_metrics_tsv(report: MetricReport, path: str | Path) -> None:
    """Write the metric table as TSV: one row per query plus a mean row."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("query\t" + "\t".join(report.metric_names) + "\n")
        for qid in sorted(report.per_query):
            values = report.per_query[qid]
            row = "\t".join(f"{values[name]:.4f}" for name in report.metric_names)
            handle.write(f"{qid}\t{row}\n")
        mean_row = "\t".join(f"{report.mean[name]:.4f}" for name in report.metric_names)
        handle.write(f"mean\t{mean_row}\n")


def write_metrics_json(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_json(), handle, indent=2, sort_keys=True)
        handle.write("\n")
