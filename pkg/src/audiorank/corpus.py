"""Document archive, query set, and derived relevance judgments.

The corpus interchange format is JSON-lines, one document per line:

    {"id": "d1", "topics": ["Health"], "duration_s": 42.0,
     "texts": {"asr": "...", "autosum": "...", "synopsis": "..."}}

Queries are JSON-lines with ``id`` (a document id) and ``topic``. Relevance
is binary: a document is relevant to a query iff the query topic appears in
the document's topic labels. A query document is never relevant to itself
unless self-matching is explicitly enabled.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator


class CorpusError(ValueError):
    """Raised for malformed corpus, query, or qrels data."""


class SourceKind(str, Enum):
    """The three text representations of an audio document."""

    ASR = "asr"
    AUTOSUM = "autosum"
    SYNOPSIS = "synopsis"

    @classmethod
    def parse(cls, token: str) -> "SourceKind":
        try:
            return cls(token)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise CorpusError(f"unknown source kind {token!r} (expected one of: {valid})") from None


@dataclass
class Document:
    """One archive item: an audio clip with topic labels and text sources."""

    id: str
    topics: frozenset[str]
    texts: dict[SourceKind, str] = field(default_factory=dict)
    duration_s: float | None = None

    def text(self, kind: SourceKind) -> str | None:
        return self.texts.get(kind)

    def with_text(self, kind: SourceKind, text: str) -> "Document":
        """Copy of this document with one text source replaced."""
        texts = dict(self.texts)
        texts[kind] = text
        return replace(self, texts=texts)


def _check_document(doc: Document) -> None:
    if not doc.id or not isinstance(doc.id, str):
        raise CorpusError("document id must be a non-empty string")
    if not doc.topics:
        raise CorpusError(f"document {doc.id!r} has no topics")
    for kind, text in doc.texts.items():
        if not isinstance(kind, SourceKind):
            raise CorpusError(f"document {doc.id!r}: text key {kind!r} is not a SourceKind")
        if not text or not text.strip():
            raise CorpusError(f"document {doc.id!r}: empty {kind.value} text")
    if doc.duration_s is not None and doc.duration_s < 0:
        raise CorpusError(f"document {doc.id!r}: negative duration")


class Corpus:
    """Immutable collection of documents, addressable by id.

    Construction validates every document and rejects duplicate ids; after
    that the corpus is read-only and safe to share across worker threads.
    """

    def __init__(self, documents: Iterable[Document]):
        self._docs: dict[str, Document] = {}
        for doc in documents:
            _check_document(doc)
            if doc.id in self._docs:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            self._docs[doc.id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def get(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise CorpusError(f"unknown document id {doc_id!r}") from None

    def ids(self) -> list[str]:
        return list(self._docs)

    def topic_histogram(self) -> Counter:
        """Document count per topic label (multi-topic documents count once per label)."""
        hist: Counter = Counter()
        for doc in self:
            hist.update(doc.topics)
        return hist

    def source_counts(self) -> Counter:
        """Document count per text source kind."""
        counts: Counter = Counter()
        for doc in self:
            counts.update(kind.value for kind in doc.texts)
        return counts


def _document_from_json(obj: dict) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError("document line must be a JSON object")
    doc_id = obj.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError("missing or invalid 'id' field")
    topics = obj.get("topics")
    if not isinstance(topics, list) or not all(isinstance(t, str) for t in topics):
        raise CorpusError(f"document {doc_id!r}: 'topics' must be a list of strings")
    texts_obj = obj.get("texts", {})
    if not isinstance(texts_obj, dict):
        raise CorpusError(f"document {doc_id!r}: 'texts' must be an object")
    texts = {SourceKind.parse(key): value for key, value in texts_obj.items()}
    duration = obj.get("duration_s")
    if duration is not None and not isinstance(duration, (int, float)):
        raise CorpusError(f"document {doc_id!r}: 'duration_s' must be a number")
    return Document(
        id=doc_id,
        topics=frozenset(topics),
        texts=texts,
        duration_s=None if duration is None else float(duration),
    )


def load_corpus(path: str | Path) -> Corpus:
    """Load a JSON-lines corpus file, validating every document.

    Errors carry the offending line number; a duplicate id names both the id
    and the line of the second occurrence.
    """
    docs: dict[str, Document] = {}
    first_line: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"{path}, line {lineno}: invalid JSON ({err})") from None
            try:
                doc = _document_from_json(obj)
                _check_document(doc)
            except CorpusError as err:
                raise CorpusError(f"{path}, line {lineno}: {err}") from None
            if doc.id in docs:
                raise CorpusError(
                    f"{path}, line {lineno}: duplicate document id {doc.id!r} "
                    f"(first seen on line {first_line[doc.id]})"
                )
            docs[doc.id] = doc
            first_line[doc.id] = lineno
    return Corpus(docs.values())


def document_to_json(doc: Document) -> dict:
    obj: dict = {"id": doc.id, "topics": sorted(doc.topics)}
    if doc.duration_s is not None:
        obj["duration_s"] = doc.duration_s
    obj["texts"] = {kind.value: text for kind, text in sorted(doc.texts.items(), key=lambda kv: kv[0].value)}
    return obj


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSON-lines, one document per line."""
    with open(path, "w", encoding="utf-8") as handle:
        for doc in corpus:
            handle.write(json.dumps(document_to_json(doc), ensure_ascii=False))
            handle.write("\n")


@dataclass(frozen=True)
class Query:
    """One query: an example clip (by document id) and its single topic."""

    id: str
    topic: str


def load_queries(path: str | Path, corpus: Corpus | None = None) -> list[Query]:
    """Load a JSON-lines query file; with a corpus, check ids exist in it."""
    queries: list[Query] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"{path}, line {lineno}: invalid JSON ({err})") from None
            qid = obj.get("id")
            topic = obj.get("topic")
            if not isinstance(qid, str) or not qid:
                raise CorpusError(f"{path}, line {lineno}: missing or invalid 'id'")
            if not isinstance(topic, str) or not topic:
                raise CorpusError(f"{path}, line {lineno}: query {qid!r} needs exactly one topic string")
            if qid in seen:
                raise CorpusError(f"{path}, line {lineno}: duplicate query id {qid!r}")
            if corpus is not None and qid not in corpus:
                raise CorpusError(f"{path}, line {lineno}: query id {qid!r} not in corpus")
            seen.add(qid)
            queries.append(Query(id=qid, topic=topic))
    return queries


def save_queries(queries: Iterable[Query], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for query in queries:
            handle.write(json.dumps({"id": query.id, "topic": query.topic}, ensure_ascii=False))
            handle.write("\n")


class Qrels:
    """Binary relevance judgments: (query id, doc id) -> gain in {0, 1}.

    Pairs absent from the map have gain 0. A query is "judged" once it has
    any entry, even if no document is relevant to it.
    """

    def __init__(self) -> None:
        self._by_query: dict[str, dict[str, int]] = {}

    def add(self, query_id: str, doc_id: str, gain: int) -> None:
        if gain not in (0, 1):
            raise CorpusError(f"gain must be 0 or 1, got {gain!r}")
        self._by_query.setdefault(query_id, {})[doc_id] = gain

    def gain(self, query_id: str, doc_id: str) -> int:
        return self._by_query.get(query_id, {}).get(doc_id, 0)

    def relevant(self, query_id: str) -> set[str]:
        return {d for d, g in self._by_query.get(query_id, {}).items() if g == 1}

    def relevant_count(self, query_id: str) -> int:
        return sum(1 for g in self._by_query.get(query_id, {}).values() if g == 1)

    def query_ids(self) -> list[str]:
        return list(self._by_query)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._by_query

    def entries(self) -> Iterator[tuple[str, str, int]]:
        for qid, judged in self._by_query.items():
            for did, gain in judged.items():
                yield qid, did, gain


def derive_qrels(corpus: Corpus, queries: Iterable[Query], include_self: bool = False) -> Qrels:
    """Judge every (query, document) pair by topic-label overlap.

    gain = 1 iff the query topic is among the document's topics. The query
    document itself is excluded unless include_self is set.
    """
    qrels = Qrels()
    for query in queries:
        if query.id not in corpus:
            raise CorpusError(f"unknown query id {query.id!r}")
        for doc in corpus:
            if doc.id == query.id and not include_self:
                continue
            qrels.add(query.id, doc.id, 1 if query.topic in doc.topics else 0)
    return qrels


def load_qrels(path: str | Path) -> Qrels:
    """Read TREC-style qrels lines: ``query_id 0 doc_id gain``."""
    qrels = Qrels()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise CorpusError(f"{path}, line {lineno}: expected 4 fields, got {len(parts)}")
            qid, _, did, gain_str = parts
            try:
                gain = int(gain_str)
            except ValueError:
                raise CorpusError(f"{path}, line {lineno}: non-integer gain {gain_str!r}") from None
            qrels.add(qid, did, gain)
    return qrels


def save_qrels(qrels: Qrels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for qid, did, gain in qrels.entries():
            handle.write(f"{qid} 0 {did} {gain}\n")
