"""Automatic summaries of transcripts, the third text source.

A single prompt turns a transcript into a concise synopsis-like summary.
Transcripts that exceed the backend context window are summarized in
fixed-size chunks whose summaries are then merged with one final call;
such outputs are tagged as chunked.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from audiorank import templates
from audiorank.backend import Backend, ContextTooLong, GenRequest, estimate_tokens
from audiorank.corpus import Corpus, Document, SourceKind

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SummaryResult:
    text: str
    chunked: bool
    chunk_count: int


def _chunk_budget(template: str, limit: int) -> int:
    overhead = estimate_tokens(templates.render(template, transcript=""))
    budget = limit - overhead
    if budget < 1:
        raise ContextTooLong(
            f"context limit {limit} leaves no room for transcript text", limit=limit
        )
    return budget


def summarize_transcript(
    transcript: str,
    backend: Backend,
    max_new_tokens: int = 512,
    template: str | None = None,
) -> SummaryResult:
    """Summarize one transcript through the backend.

    The transcript is inserted verbatim, exactly once, into the summary
    prompt. If the prompt overflows the context window, the transcript is
    split into whole-token chunks sized to the window, each chunk is
    summarized, and the concatenated chunk summaries are summarized once
    more to produce the final text.
    """
    if not transcript or not transcript.strip():
        raise ValueError("transcript must be non-empty")
    if template is None:
        template = templates.load_template(templates.AUTOSUM).rstrip("\n")

    try:
        text = backend.generate(
            GenRequest(templates.render(template, transcript=transcript), max_new_tokens)
        )
        return SummaryResult(text=text, chunked=False, chunk_count=1)
    except ContextTooLong as err:
        budget = _chunk_budget(template, err.limit)

    tokens = transcript.split()
    chunks = [" ".join(tokens[i : i + budget]) for i in range(0, len(tokens), budget)]
    summaries = []
    for chunk in chunks:
        summaries.append(
            backend.generate(GenRequest(templates.render(template, transcript=chunk), max_new_tokens))
        )
    merged_input = " ".join(summaries)
    merged = backend.generate(
        GenRequest(templates.render(template, transcript=merged_input), max_new_tokens)
    )
    return SummaryResult(text=merged, chunked=True, chunk_count=len(chunks))


def summarize_corpus(
    corpus: Corpus,
    backend: Backend,
    source: SourceKind = SourceKind.ASR,
    overwrite: bool = False,
    max_new_tokens: int = 512,
    template: str | None = None,
    jobs: int | None = None,
) -> tuple[Corpus, dict]:
    """Fill the autosum text source for every document that has a transcript.

    Documents already carrying an autosum are kept unless ``overwrite``
    is set. Summarization runs in parallel, bounded by the backend
    concurrency limit; results are merged by document id so the output
    corpus does not depend on completion order.
    """
    todo: list[Document] = []
    skipped = 0
    missing = 0
    for doc in corpus:
        if SourceKind.AUTOSUM in doc.texts and not overwrite:
            skipped += 1
            continue
        if source not in doc.texts:
            missing += 1
            continue
        todo.append(doc)

    results: dict[str, SummaryResult] = {}
    workers = max(1, jobs if jobs is not None else backend.max_concurrency)

    def run(doc: Document) -> tuple[str, SummaryResult]:
        summary = summarize_transcript(
            doc.texts[source], backend, max_new_tokens=max_new_tokens, template=template
        )
        return doc.id, summary

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for doc_id, summary in pool.map(run, todo):
            results[doc_id] = summary

    documents = []
    chunked_ids = []
    for doc in corpus:
        summary = results.get(doc.id)
        if summary is not None:
            doc = doc.with_text(SourceKind.AUTOSUM, summary.text)
            if summary.chunked:
                chunked_ids.append(doc.id)
        documents.append(doc)

    stats = {
        "summarized": len(results),
        "skipped_existing": skipped,
        "missing_source": missing,
        "chunked": sorted(chunked_ids),
    }
    if missing:
        log.warning("%d documents lack a %s text and were not summarized", missing, source.value)
    return Corpus(documents), stats
