"""Two-stage topic retrieval over audio archives.

Stage one ranks the whole archive by exact cosine similarity between topic
embeddings; stage two reranks the head of that list with zero-shot LLM
strategies (listwise, pairwise tournament) or a lexical baseline. An
evaluation harness (nDCG@k, Precision@k, oracle precision) and an
atomic-fact consistency analyzer round out the toolkit.
"""

__version__ = "0.1.0"

from audiorank.backend import (
    Backend,
    BackendConfig,
    GenRequest,
    MockBackend,
    OptionScoreRequest,
    RemoteCompletionBackend,
)
from audiorank.corpus import (
    Corpus,
    Document,
    Qrels,
    Query,
    SourceKind,
    derive_qrels,
    load_corpus,
    load_queries,
)
from audiorank.index import EmbeddingIndex, EmbeddingStore, cosine, normalize
from audiorank.metrics import evaluate_run, ndcg_at_k, oracle_precision, precision_at_k
from audiorank.ranking import RankedItem, RankedList, Stage
from audiorank.rerank import (
    ComparisonOutcome,
    lexical_rerank,
    listwise_rerank,
    pairwise_rerank,
    parse_listwise_output,
)

__all__ = [
    "__version__",
    "Backend",
    "BackendConfig",
    "ComparisonOutcome",
    "Corpus",
    "Document",
    "EmbeddingIndex",
    "EmbeddingStore",
    "GenRequest",
    "MockBackend",
    "OptionScoreRequest",
    "Qrels",
    "Query",
    "RankedItem",
    "RankedList",
    "RemoteCompletionBackend",
    "SourceKind",
    "Stage",
    "cosine",
    "derive_qrels",
    "evaluate_run",
    "lexical_rerank",
    "listwise_rerank",
    "load_corpus",
    "load_queries",
    "ndcg_at_k",
    "normalize",
    "oracle_precision",
    "pairwise_rerank",
    "parse_listwise_output",
    "precision_at_k",
]
