"""Synthetic topic-clustered corpus for exercising the whole pipeline.

Every topic gets a unit centroid direction; each document's embedding is
its primary topic's centroid plus angular noise, with per-source noise
levels mimicking the quality ladder of the real text sources (transcripts
noisiest, synopses cleanest). Document texts embed the topic vocabulary
and the document's own id, so lexical reranking and scripted relevance
mocks both have signal to work with. Everything is driven by one seed and
is fully reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from audiorank.corpus import (
    Corpus,
    Document,
    Query,
    SourceKind,
    save_corpus,
    save_queries,
)
from audiorank.index import EmbeddingStore, save_embeddings

DEFAULT_TOPICS = (
    "agriculture",
    "business",
    "education",
    "entertainment",
    "health",
    "politics",
    "religion",
    "science",
    "sport",
    "travel",
    "weather",
)

_FILLER = (
    "report", "interview", "speaker", "studio", "archive", "recording", "segment",
    "discussion", "local", "national", "programme", "evening", "morning", "news",
    "people", "community", "year", "today", "story", "series", "special", "live",
)

# Per-source angular noise: higher noise degrades retrieval quality, so the
# source ladder (asr worst, synopsis best) carries over to the synthetic data.
DEFAULT_NOISE = {
    SourceKind.ASR: 1.6,
    SourceKind.AUTOSUM: 1.3,
    SourceKind.SYNOPSIS: 1.0,
}


@dataclass
class SynthConfig:
    n_docs: int = 200
    n_queries: int = 20
    dim: int = 32
    seed: int = 13
    topics: tuple[str, ...] = DEFAULT_TOPICS
    multi_topic_fraction: float = 0.25
    noise: dict = field(default_factory=lambda: dict(DEFAULT_NOISE))

    def __post_init__(self) -> None:
        if self.n_docs < len(self.topics):
            raise ValueError("need at least one document per topic")
        if self.n_queries > self.n_docs:
            raise ValueError("cannot have more queries than documents")


def _topic_words(topic: str) -> list[str]:
    return [topic, f"{topic}s", f"{topic}1", f"{topic}2"]


def _make_text(rng, doc_id: str, topics: list[str], all_topics, length: int) -> str:
    own = [w for t in topics for w in _topic_words(t)]
    words = [f"clip {doc_id}"]
    for _ in range(length):
        roll = rng.random()
        if roll < 0.45:
            words.append(own[rng.integers(len(own))])
        elif roll < 0.9:
            words.append(_FILLER[rng.integers(len(_FILLER))])
        else:
            other = all_topics[rng.integers(len(all_topics))]
            words.append(other)
    return " ".join(words)


def generate_dataset(config: SynthConfig) -> tuple[Corpus, EmbeddingStore, list[Query]]:
    """Build a corpus, its embedding store, and a query set from one seed."""
    rng = np.random.default_rng(config.seed)
    topics = list(config.topics)
    n_topics = len(topics)

    centroids = rng.standard_normal((n_topics, config.dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)

    documents: list[Document] = []
    store = EmbeddingStore(config.dim)
    single_topic_ids: list[str] = []

    for i in range(config.n_docs):
        doc_id = f"d{i:04d}"
        primary = i % n_topics  # round-robin keeps every topic populated
        doc_topics = [topics[primary]]
        if rng.random() < config.multi_topic_fraction:
            secondary = int(rng.integers(n_topics - 1))
            if secondary >= primary:
                secondary += 1
            doc_topics.append(topics[secondary])
        else:
            single_topic_ids.append(doc_id)

        texts = {
            SourceKind.ASR: _make_text(rng, doc_id, doc_topics, topics, int(rng.integers(40, 80))),
            SourceKind.AUTOSUM: _make_text(rng, doc_id, doc_topics, topics, int(rng.integers(15, 30))),
            SourceKind.SYNOPSIS: _make_text(rng, doc_id, doc_topics, topics, int(rng.integers(8, 16))),
        }
        documents.append(
            Document(
                id=doc_id,
                topics=frozenset(doc_topics),
                texts=texts,
                duration_s=float(np.round(rng.uniform(3.0, 1800.0), 1)),
            )
        )

        for source, sigma in config.noise.items():
            noise = rng.standard_normal(config.dim) / np.sqrt(config.dim)
            store.add(doc_id, source, centroids[primary] + sigma * noise)

    corpus = Corpus(documents)

    # Queries are single-topic clips, per the evaluation setup.
    if len(single_topic_ids) < config.n_queries:
        raise ValueError(
            f"only {len(single_topic_ids)} single-topic documents; "
            f"cannot draw {config.n_queries} queries"
        )
    picks = rng.choice(len(single_topic_ids), size=config.n_queries, replace=False)
    queries = []
    for pick in sorted(int(p) for p in picks):
        doc = corpus.get(single_topic_ids[pick])
        (topic,) = doc.topics
        queries.append(Query(id=doc.id, topic=topic))

    return corpus, store, queries


def write_dataset(
    out_dir: str | Path, config: SynthConfig | None = None
) -> tuple[Path, Path, Path]:
    """Generate and write corpus.jsonl, embeddings.jsonl, and queries.jsonl."""
    config = config or SynthConfig()
    corpus, store, queries = generate_dataset(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.jsonl"
    embeddings_path = out / "embeddings.jsonl"
    queries_path = out / "queries.jsonl"
    save_corpus(corpus, corpus_path)
    save_embeddings(store, embeddings_path)
    save_queries(queries, queries_path)
    return corpus_path, embeddings_path, queries_path
