"""First-stage retrieval: exact cosine similarity over topic embeddings.

Embeddings live in a sidecar JSON-lines file whose first line is a header
``{"dim": d}``; every following line is ``{"doc_id", "source", "vector"}``.
Vectors are unit-normalized on ingest. Retrieval is an exact brute-force
scan (no approximate structure): at archive scale exactness is cheap and
determinism matters more than sub-millisecond latency.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from audiorank import kernels
from audiorank.corpus import SourceKind
from audiorank.ranking import RankedList, Stage


class EmbeddingError(ValueError):
    """Raised for malformed embeddings or mismatched dimensions."""


NORM_TOLERANCE = 1e-6


def normalize(vector) -> np.ndarray:
    """Scale a vector to unit L2 norm, preserving direction."""
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1:
        raise EmbeddingError(f"expected a 1-d vector, got shape {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise EmbeddingError("cannot normalize a zero vector")
    return arr / norm


def cosine(a, b) -> float:
    """Cosine similarity of two unit vectors (their dot product)."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise EmbeddingError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    return float(va @ vb)


class EmbeddingStore:
    """Unit-normalized vectors keyed by (doc_id, source kind), fixed dimension."""

    def __init__(self, dim: int):
        if dim < 1:
            raise EmbeddingError(f"dimension must be positive, got {dim}")
        self.dim = int(dim)
        self._vectors: dict[tuple[str, SourceKind], np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._vectors)

    def add(self, doc_id: str, source: SourceKind, vector) -> None:
        """Normalize and store one vector; rejects duplicates and bad shapes."""
        arr = np.asarray(vector, dtype=np.float64)
        if arr.shape != (self.dim,):
            raise EmbeddingError(
                f"vector for ({doc_id!r}, {source.value}) has dimension {arr.shape}, expected ({self.dim},)"
            )
        key = (doc_id, source)
        if key in self._vectors:
            raise EmbeddingError(f"duplicate embedding for ({doc_id!r}, {source.value})")
        self._vectors[key] = normalize(arr)

    def has(self, doc_id: str, source: SourceKind) -> bool:
        return (doc_id, source) in self._vectors

    def pairs(self) -> list[tuple[str, SourceKind]]:
        """All stored (doc_id, source) keys, sorted for stable iteration."""
        return sorted(self._vectors, key=lambda key: (key[0], key[1].value))

    def get(self, doc_id: str, source: SourceKind) -> np.ndarray:
        try:
            return self._vectors[(doc_id, source)]
        except KeyError:
            raise EmbeddingError(f"no embedding for ({doc_id!r}, {source.value})") from None

    def doc_ids(self, source: SourceKind) -> list[str]:
        return sorted(did for did, kind in self._vectors if kind is source)

    def index_for(self, source: SourceKind, doc_ids: Iterable[str] | None = None) -> "EmbeddingIndex":
        """Build a retrieval index over one source kind.

        Rows are ordered by ascending doc id, which makes the kernel's
        index-ascending tie-break equal a doc-id-ascending tie-break.
        """
        ids = sorted(doc_ids) if doc_ids is not None else self.doc_ids(source)
        if not ids:
            raise EmbeddingError(f"no embeddings stored for source {source.value!r}")
        matrix = np.empty((len(ids), self.dim), dtype=np.float64)
        for row, did in enumerate(ids):
            matrix[row] = self.get(did, source)
        return EmbeddingIndex(source=source, ids=tuple(ids), matrix=matrix)


class EmbeddingIndex:
    """Immutable dense index answering exact top-k cosine queries."""

    def __init__(self, source: SourceKind, ids: tuple[str, ...], matrix: np.ndarray):
        if matrix.shape[0] != len(ids):
            raise EmbeddingError("row count does not match id count")
        self.source = source
        self.ids = ids
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        self.dim = self.matrix.shape[1]
        self._row: Mapping[str, int] = {did: i for i, did in enumerate(ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def retrieve(
        self,
        query_id: str,
        query_vec,
        k: int,
        exclude_ids: Iterable[str] = (),
    ) -> RankedList:
        """Top-min(k, size) documents by descending cosine similarity.

        Ties break by ascending doc id so runs are reproducible. Documents
        in ``exclude_ids`` (typically the query clip itself) never appear.
        """
        if len(self.ids) == 0:
            raise EmbeddingError("index is empty")
        if k < 1:
            raise EmbeddingError(f"k must be >= 1, got {k}")
        q = np.asarray(query_vec, dtype=np.float64)
        if q.shape != (self.dim,):
            raise EmbeddingError(f"query has dimension {q.shape}, index expects ({self.dim},)")

        scores = self.matrix @ q
        excluded_rows = sorted({self._row[did] for did in exclude_ids if did in self._row})
        if excluded_rows:
            scores = scores.copy()
            scores[excluded_rows] = -np.inf
        depth = min(k, len(self.ids) - len(excluded_rows))
        order = kernels.topk_from_scores(scores, depth)
        return RankedList.from_ordered(
            query_id,
            Stage.RETRIEVAL,
            [(self.ids[row], scores[row]) for row in order],
        )


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write the store as JSON-lines with a leading dimension header."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps({"dim": store.dim}))
        handle.write("\n")
        for doc_id, source in store.pairs():
            vec = store.get(doc_id, source)
            record = {"doc_id": doc_id, "source": source.value, "vector": vec.tolist()}
            handle.write(json.dumps(record))
            handle.write("\n")


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Read an embedding sidecar file, validating the header and every record."""
    store: EmbeddingStore | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise EmbeddingError(f"{path}, line {lineno}: invalid JSON ({err})") from None
            if store is None:
                dim = obj.get("dim")
                if not isinstance(dim, int) or dim < 1:
                    raise EmbeddingError(f"{path}, line {lineno}: first line must be a header with a positive 'dim'")
                store = EmbeddingStore(dim)
                continue
            doc_id = obj.get("doc_id")
            source_token = obj.get("source")
            vector = obj.get("vector")
            if not isinstance(doc_id, str) or not doc_id:
                raise EmbeddingError(f"{path}, line {lineno}: missing 'doc_id'")
            if not isinstance(source_token, str):
                raise EmbeddingError(f"{path}, line {lineno}: missing 'source'")
            try:
                source = SourceKind(source_token)
            except ValueError:
                raise EmbeddingError(f"{path}, line {lineno}: unknown source kind {source_token!r}") from None
            if not isinstance(vector, list) or len(vector) != store.dim:
                raise EmbeddingError(
                    f"{path}, line {lineno}: vector must be a list of {store.dim} numbers"
                )
            try:
                store.add(doc_id, source, vector)
            except EmbeddingError as err:
                raise EmbeddingError(f"{path}, line {lineno}: {err}") from None
    if store is None:
        raise EmbeddingError(f"{path}: empty embedding file (missing header)")
    return store
