"""Information consistency between text sources via atomic facts.

A hypothesis text is decomposed into atomic facts (short statements, one
piece of information each) with a 1-shot prompt; each fact is then judged
against an evidence text in free generation mode, where the model may
answer beyond plain true/false (e.g. that it cannot decide). Raw responses
are kept for audit; the verdict mapping is a total function of the
response text.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from audiorank import templates
from audiorank.backend import Backend, BackendError, GenRequest
from audiorank.corpus import Corpus, SourceKind

log = logging.getLogger(__name__)


class DecompositionFailure(ValueError):
    """The decomposition output contained no separable facts."""


class Verdict(str, Enum):
    TRUE = "true"
    FALSE = "false"
    OTHER = "other"


@dataclass(frozen=True)
class AtomicFact:
    doc_id: str
    hypothesis_source: SourceKind
    text: str


@dataclass(frozen=True)
class FactVerdict:
    fact: AtomicFact
    evidence_source: SourceKind
    verdict: Verdict
    raw_response: str


def map_verdict(raw: str) -> Verdict:
    """Map a free-form judgment to a verdict; total over all strings.

    The leading token decides: "true..." is True, "false..." is False,
    anything else (hedges, refusals, noise) is Other.
    """
    lowered = raw.strip().lower()
    if lowered.startswith("true"):
        return Verdict.TRUE
    if lowered.startswith("false"):
        return Verdict.FALSE
    return Verdict.OTHER


_BULLET_PREFIXES = ("- ", "* ", "• ")


def _fact_lines(output: str) -> list[str]:
    """Split a decomposition answer into fact strings.

    A line counts as a fact when it carries a bullet or enumeration marker
    (the shipped prompt asks for "- " bullets), or when the output has
    several plain lines, one fact per line. A single unmarked prose blob
    yields nothing: the decomposition did not separate anything.
    """
    marked: list[str] = []
    plain: list[str] = []
    for line in output.splitlines():
        line = line.strip()
        if not line:
            continue
        for prefix in _BULLET_PREFIXES:
            if line.startswith(prefix):
                marked.append(line[len(prefix) :].strip())
                break
        else:
            stripped = line.lstrip("0123456789")
            if stripped != line and stripped[:1] in (".", ")"):
                marked.append(stripped[1:].strip())
            else:
                plain.append(line)
    facts = marked if marked else (plain if len(plain) >= 2 else [])
    return [fact for fact in facts if fact]


def decompose_facts(
    text: str,
    backend: Backend,
    doc_id: str,
    source: SourceKind,
    template: str | None = None,
    max_new_tokens: int = 512,
) -> list[AtomicFact]:
    """Break a text into atomic facts through the 1-shot decomposition prompt."""
    if not text or not text.strip():
        raise ValueError("text must be non-empty")
    if template is None:
        template = templates.load_template(templates.FACT_DECOMPOSE)
    output = backend.generate(
        GenRequest(templates.render(template, text=text), max_new_tokens=max_new_tokens)
    )
    lines = _fact_lines(output)
    if not lines:
        raise DecompositionFailure(
            f"no separable facts in decomposition output for document {doc_id!r}: {output!r}"
        )
    return [AtomicFact(doc_id=doc_id, hypothesis_source=source, text=line) for line in lines]


def verify_fact(
    fact: AtomicFact,
    evidence_text: str,
    backend: Backend,
    evidence_source: SourceKind,
    template: str | None = None,
    max_new_tokens: int = 64,
) -> FactVerdict:
    """Judge one fact against an evidence text in free generation mode."""
    if template is None:
        template = templates.load_template(templates.FACT_VERIFY)
    raw = backend.generate(
        GenRequest(
            templates.render(template, evidence=evidence_text, fact=fact.text),
            max_new_tokens=max_new_tokens,
        )
    )
    return FactVerdict(
        fact=fact, evidence_source=evidence_source, verdict=map_verdict(raw), raw_response=raw
    )


@dataclass
class ConsistencyReport:
    """Aggregated verdict shares for one hypothesis/evidence source pair."""

    hypothesis: SourceKind
    evidence: SourceKind
    sample_size: int
    n_docs: int
    n_failed: int
    n_facts: int
    pct_true: float | None
    pct_false: float | None
    pct_other: float | None
    seed: int
    failures: list[tuple[str, str]]

    @property
    def undefined(self) -> bool:
        return self.n_facts == 0


def consistency_report(
    corpus: Corpus,
    hypothesis: SourceKind,
    evidence: SourceKind,
    backend: Backend,
    sample_size: int = 500,
    seed: int = 0,
    jobs: int | None = None,
    decompose_template: str | None = None,
    verify_template: str | None = None,
) -> tuple[ConsistencyReport, list[FactVerdict]]:
    """Decompose sampled hypothesis texts and verify every fact against evidence.

    Documents are sampled with a seeded RNG from those carrying both
    sources, so runs are reproducible given the seed. Per-document failures
    (decomposition or backend errors) are logged, counted, and excluded;
    they are never silently dropped. Percentages are over all verified
    facts and sum to 100 whenever any fact exists.
    """
    if hypothesis is evidence:
        raise ValueError("hypothesis and evidence sources must differ")
    eligible = sorted(
        doc.id for doc in corpus if hypothesis in doc.texts and evidence in doc.texts
    )
    if not eligible:
        raise ValueError(
            f"no documents carry both {hypothesis.value} and {evidence.value} texts"
        )
    rng = random.Random(seed)
    take = min(sample_size, len(eligible))
    sampled = sorted(rng.sample(eligible, take))

    failures: list[tuple[str, str]] = []
    verdicts_by_doc: dict[str, list[FactVerdict]] = {}

    def run(doc_id: str) -> tuple[str, list[FactVerdict] | None, str | None]:
        doc = corpus.get(doc_id)
        try:
            facts = decompose_facts(
                doc.texts[hypothesis], backend, doc_id=doc_id, source=hypothesis,
                template=decompose_template,
            )
            judged = [
                verify_fact(
                    fact, doc.texts[evidence], backend,
                    evidence_source=evidence, template=verify_template,
                )
                for fact in facts
            ]
            return doc_id, judged, None
        except (DecompositionFailure, BackendError) as err:
            return doc_id, None, str(err)

    workers = max(1, jobs if jobs is not None else backend.max_concurrency)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for doc_id, judged, error in pool.map(run, sampled):
            if error is not None:
                log.warning("fact check failed for document %s: %s", doc_id, error)
                failures.append((doc_id, error))
            else:
                verdicts_by_doc[doc_id] = judged or []

    verdicts = [v for doc_id in sampled for v in verdicts_by_doc.get(doc_id, [])]
    counts = Counter(v.verdict for v in verdicts)
    total = len(verdicts)

    def pct(verdict: Verdict) -> float | None:
        return 100.0 * counts[verdict] / total if total else None

    report = ConsistencyReport(
        hypothesis=hypothesis,
        evidence=evidence,
        sample_size=sample_size,
        n_docs=len(sampled) - len(failures),
        n_failed=len(failures),
        n_facts=total,
        pct_true=pct(Verdict.TRUE),
        pct_false=pct(Verdict.FALSE),
        pct_other=pct(Verdict.OTHER),
        seed=seed,
        failures=failures,
    )
    return report, verdicts


def write_consistency_tsv(reports: Iterable[ConsistencyReport], path: str | Path) -> None:
    """One row per source pair: fact counts, verdict percentages, provenance."""
    columns = [
        "hypothesis", "evidence", "n_facts", "pct_true", "pct_false", "pct_other",
        "n_docs", "n_failed", "seed",
    ]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\t".join(columns) + "\n")
        for r in reports:
            def fmt(value: float | None) -> str:
                return "undefined" if value is None else f"{value:.2f}"

            handle.write(
                "\t".join(
                    [
                        r.hypothesis.value, r.evidence.value, str(r.n_facts),
                        fmt(r.pct_true), fmt(r.pct_false), fmt(r.pct_other),
                        str(r.n_docs), str(r.n_failed), str(r.seed),
                    ]
                )
                + "\n"
            )


def write_verdicts_jsonl(verdicts: Iterable[FactVerdict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for v in verdicts:
            record = {
                "doc_id": v.fact.doc_id,
                "hypothesis_source": v.fact.hypothesis_source.value,
                "evidence_source": v.evidence_source.value,
                "fact": v.fact.text,
                "verdict": v.verdict.value,
                "raw_response": v.raw_response,
            }
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")
