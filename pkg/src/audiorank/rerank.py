"""Second-stage reranking of the top-N first-stage candidates.

Three strategies reorder the head of a first-stage ranked list:

* listwise — one prompt holds all N candidate texts (in first-stage order)
  and the model emits a reordered identifier list;
* pairwise — every ordered pair of candidates is judged independently by
  comparing the likelihoods of the continuations "A" and "B"; candidates
  are ranked by win ratio over their 2*(N-1) comparisons;
* lexical — a ROUGE-style unigram or longest-common-subsequence overlap
  between query text and candidate text, no model involved.

All strategies leave candidates beyond the window untouched: they keep
their first-stage relative order below the reranked head. Reranked lists
carry stage-native scores on the head (listwise: descending position
scores; pairwise: win ratio; lexical: overlap F-measure) and descending
negative integers on the tail, so scores stay non-increasing.
"""

from __future__ import annotations

import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from audiorank import kernels, templates
from audiorank.backend import Backend, ContextTooLong, GenRequest, OptionScoreRequest
from audiorank.corpus import SourceKind
from audiorank.ranking import RankedItem, RankedList, Stage


class ParseFailure(ValueError):
    """The model output contained no usable passage identifiers."""


class Strategy(str, Enum):
    LISTWISE = "listwise"
    PAIRWISE = "pairwise"
    LEXICAL = "lexical"


@dataclass
class RerankConfig:
    """Settings shared by the reranking strategies."""

    n: int = 10
    strategy: Strategy = Strategy.PAIRWISE
    query_source: SourceKind = SourceKind.ASR
    doc_source: SourceKind = SourceKind.ASR
    passage_tokens: int = 256
    lexical_variant: str = "rouge1"
    pairwise_mode: str = "options"
    max_new_tokens: int = 128

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"window size must be >= 1, got {self.n}")
        if self.lexical_variant not in ("rouge1", "rougeL"):
            raise ValueError(f"unknown lexical variant {self.lexical_variant!r}")
        if self.pairwise_mode not in ("options", "generate"):
            raise ValueError(f"unknown pairwise mode {self.pairwise_mode!r}")


@dataclass(frozen=True)
class ComparisonOutcome:
    """One ordered pairwise judgment; winner A means the first passage won."""

    query_id: str
    a: str
    b: str
    winner: str
    margin: float

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError("cannot compare a document with itself")
        if self.winner not in ("A", "B"):
            raise ValueError(f"winner must be 'A' or 'B', got {self.winner!r}")
        if self.margin > 0 and self.winner != "A":
            raise ValueError("positive margin requires winner A")
        if self.margin < 0 and self.winner != "B":
            raise ValueError("negative margin requires winner B")


def truncate_tokens(text: str, budget: int | None) -> str:
    """Keep at most ``budget`` whitespace tokens of a text."""
    if budget is None:
        return text
    if budget < 1:
        raise ValueError(f"token budget must be >= 1, got {budget}")
    tokens = text.split()
    if len(tokens) <= budget:
        return text
    return " ".join(tokens[:budget])


def _window(candidates: RankedList, n: int) -> tuple[list[RankedItem], list[RankedItem]]:
    if n < 1:
        raise ValueError(f"window size must be >= 1, got {n}")
    return candidates.items[:n], candidates.items[n:]


def _candidate_text(doc_texts: Mapping[str, str], doc_id: str) -> str:
    try:
        text = doc_texts[doc_id]
    except KeyError:
        raise ValueError(f"no candidate text for document {doc_id!r}") from None
    if not text or not text.strip():
        raise ValueError(f"empty candidate text for document {doc_id!r}")
    return text


def _compose(
    query_id: str,
    stage: Stage,
    head: list[RankedItem],
    head_order: list[int],
    head_scores: list[float],
    tail: list[RankedItem],
    meta: dict,
) -> RankedList:
    """Assemble the final list: reordered head, then the untouched tail.

    ``head_order`` holds window positions (0-based) in output order;
    ``head_scores`` aligns with it. Tail items get descending negative
    scores below any head score.
    """
    scored: list[tuple[str, float]] = [
        (head[pos].doc_id, head_scores[out]) for out, pos in enumerate(head_order)
    ]
    scored.extend((item.doc_id, float(-(i + 1))) for i, item in enumerate(tail))
    return RankedList.from_ordered(query_id, stage, scored, meta=meta)


def parse_listwise_output(text: str, n: int) -> list[int]:
    """Extract a permutation of 1..n from a model's reordering answer.

    The text is scanned left to right for integers; the first mention of
    each in-range index wins, duplicates and out-of-range values are
    dropped, and missing indices are appended in first-stage order. Raises
    ParseFailure when no in-range index occurs at all.
    """
    if n < 1:
        raise ValueError(f"window size must be >= 1, got {n}")
    found: list[int] = []
    seen: set[int] = set()
    for match in re.finditer(r"\d+", text):
        idx = int(match.group())
        if 1 <= idx <= n and idx not in seen:
            seen.add(idx)
            found.append(idx)
    if not found:
        raise ParseFailure(f"no passage identifiers in range 1..{n} found in output: {text!r}")
    for idx in range(1, n + 1):
        if idx not in seen:
            found.append(idx)
    return found


def listwise_rerank(
    query_id: str,
    query_text: str,
    candidates: RankedList,
    doc_texts: Mapping[str, str],
    backend: Backend,
    n: int = 10,
    passage_tokens: int | None = 256,
    max_new_tokens: int = 128,
    template: str | None = None,
) -> RankedList:
    """Rerank the window with a single all-candidates prompt.

    Passages appear in the prompt in first-stage order. If the model output
    yields no parseable identifiers, the first-stage order is kept and the
    list is flagged (one bad generation must not kill a batch run); a
    prompt that exceeds the context window is an error, with pairwise
    suggested as the fallback strategy.
    """
    head, tail = _window(candidates, n)
    if template is None:
        template = templates.load_template(templates.LISTWISE)
    meta: dict = {"window": len(head)}

    if len(head) <= 1:
        order = list(range(len(head)))
        scores = [1.0] * len(head)
        return _compose(query_id, Stage.RERANK_LISTWISE, head, order, scores, tail, meta)

    passages = "\n".join(
        f"Passage {pos}: {truncate_tokens(_candidate_text(doc_texts, item.doc_id), passage_tokens)}"
        for pos, item in enumerate(head, 1)
    )
    prompt = templates.render(
        template, query=truncate_tokens(query_text, passage_tokens), passages=passages
    )
    try:
        output = backend.generate(GenRequest(prompt, max_new_tokens=max_new_tokens))
    except ContextTooLong as err:
        raise ContextTooLong(
            f"{err} — the listwise window does not fit; use the pairwise strategy "
            "or reduce the window size",
            limit=err.limit,
            used=err.used,
        ) from None

    try:
        permutation = parse_listwise_output(output, len(head))
        order = [idx - 1 for idx in permutation]
    except ParseFailure:
        order = list(range(len(head)))
        meta["fallback"] = "parse-failure"
        meta["raw_output"] = output

    scores = [float(len(head) - out) for out in range(len(head))]
    return _compose(query_id, Stage.RERANK_LISTWISE, head, order, scores, tail, meta)


def _map_choice(text: str) -> str | None:
    """Map a free-generation answer to 'A'/'B' by its leading token."""
    match = re.match(r"\W*(?:passage\s+)?([ab])\b", text.strip().lower())
    return match.group(1).upper() if match else None


def pairwise_rerank(
    query_id: str,
    query_text: str,
    candidates: RankedList,
    doc_texts: Mapping[str, str],
    backend: Backend,
    n: int = 10,
    passage_tokens: int | None = 256,
    mode: str = "options",
    template: str | None = None,
    jobs: int | None = None,
) -> tuple[RankedList, list[ComparisonOutcome]]:
    """Round-robin tournament over the window: N*(N-1) ordered comparisons.

    Each ordered pair (i, j) is judged once with i as Passage A and j as
    Passage B, so both orderings of every unordered pair are evaluated and
    positional bias averages out. With mode="options" the decision compares
    the likelihoods of the continuations "A" and "B"; mode="generate"
    decodes freely and maps the answer by prefix. Candidates are ranked by
    descending win ratio (wins / (2*(N-1))), ties broken by first-stage
    rank. Comparisons for one query are independent and run concurrently up
    to the backend limit; wins are summed, so aggregation does not depend
    on completion order.
    """
    head, tail = _window(candidates, n)
    if template is None:
        template = templates.load_template(templates.PAIRWISE)
    meta: dict = {"window": len(head), "comparisons": 0}

    if len(head) <= 1:
        order = list(range(len(head)))
        scores = [1.0] * len(head)
        return (
            _compose(query_id, Stage.RERANK_PAIRWISE, head, order, scores, tail, meta),
            [],
        )

    texts = [
        truncate_tokens(_candidate_text(doc_texts, item.doc_id), passage_tokens) for item in head
    ]
    query = truncate_tokens(query_text, passage_tokens)
    pairs = [(i, j) for i in range(len(head)) for j in range(len(head)) if i != j]

    def judge(pair: tuple[int, int]) -> ComparisonOutcome:
        i, j = pair
        prompt = templates.render(template, query=query, passage_A=texts[i], passage_B=texts[j])
        if mode == "options":
            score_a, score_b = backend.score_options(OptionScoreRequest(prompt, ("A", "B")))
            margin = score_a - score_b
        else:
            choice = _map_choice(backend.generate(GenRequest(prompt, max_new_tokens=8)))
            margin = {"A": 1.0, "B": -1.0, None: 0.0}[choice]
        if margin > 0:
            winner = "A"
        elif margin < 0:
            winner = "B"
        else:
            # Dead tie: keep the first-stage evidence. Position i < j means
            # passage A ranked higher in stage one.
            winner = "A" if i < j else "B"
        return ComparisonOutcome(
            query_id=query_id,
            a=head[i].doc_id,
            b=head[j].doc_id,
            winner=winner,
            margin=float(margin),
        )

    workers = max(1, min(jobs if jobs is not None else backend.max_concurrency, len(pairs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(judge, pairs))

    wins: Counter = Counter()
    for outcome in outcomes:
        wins[outcome.a if outcome.winner == "A" else outcome.b] += 1

    denom = 2 * (len(head) - 1)
    ratios = [wins[item.doc_id] / denom for item in head]
    order = sorted(range(len(head)), key=lambda pos: (-ratios[pos], pos))
    scores = [ratios[pos] for pos in order]

    meta["comparisons"] = len(outcomes)
    meta["positional_disagreement"] = _disagreement_rate(head, outcomes)
    ranked = _compose(query_id, Stage.RERANK_PAIRWISE, head, order, scores, tail, meta)
    return ranked, outcomes


def _disagreement_rate(head: list[RankedItem], outcomes: list[ComparisonOutcome]) -> float:
    """Fraction of unordered pairs whose two orderings preferred different docs."""
    preferred: dict[tuple[str, str], str] = {}
    for outcome in outcomes:
        preferred[(outcome.a, outcome.b)] = outcome.a if outcome.winner == "A" else outcome.b
    disagreements = 0
    total = 0
    for i in range(len(head)):
        for j in range(i + 1, len(head)):
            a, b = head[i].doc_id, head[j].doc_id
            total += 1
            if preferred[(a, b)] != preferred[(b, a)]:
                disagreements += 1
    return disagreements / total if total else 0.0


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def rouge_f(query_tokens: list[str], cand_tokens: list[str], variant: str = "rouge1") -> float:
    """ROUGE F-measure between two token lists.

    rouge1 counts clipped unigram overlap; rougeL uses the longest common
    subsequence. Both return 0.0 when either side has no tokens.
    """
    if not query_tokens or not cand_tokens:
        return 0.0
    if variant == "rouge1":
        overlap_counts = Counter(query_tokens) & Counter(cand_tokens)
        overlap = sum(overlap_counts.values())
    elif variant == "rougeL":
        vocab: dict[str, int] = {}
        qs = [vocab.setdefault(tok, len(vocab)) for tok in query_tokens]
        cs = [vocab.setdefault(tok, len(vocab)) for tok in cand_tokens]
        overlap = kernels.lcs_length(qs, cs)
    else:
        raise ValueError(f"unknown lexical variant {variant!r}")
    if overlap == 0:
        return 0.0
    precision = overlap / len(cand_tokens)
    recall = overlap / len(query_tokens)
    return 2 * precision * recall / (precision + recall)


def lexical_rerank(
    query_id: str,
    query_text: str,
    candidates: RankedList,
    doc_texts: Mapping[str, str],
    n: int = 10,
    variant: str = "rouge1",
) -> RankedList:
    """Rerank the window by text overlap with the query, no model involved."""
    if not query_text or not query_text.strip():
        raise ValueError("query text must be non-empty")
    head, tail = _window(candidates, n)
    meta: dict = {"window": len(head), "variant": variant}

    query_tokens = tokenize(query_text)
    fscores = [
        rouge_f(query_tokens, tokenize(_candidate_text(doc_texts, item.doc_id)), variant)
        for item in head
    ]
    order = sorted(range(len(head)), key=lambda pos: (-fscores[pos], pos))
    scores = [fscores[pos] for pos in order]
    return _compose(query_id, Stage.RERANK_LEXICAL, head, order, scores, tail, meta)
