"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute. Every tolerance and runtime budget is pinned here; the
reference implementations are deliberately naive and independent of the
package code paths they check.
"""

import json
import math
import random
import re
import time

import numpy as np
import pytest

from audiorank.backend import MockBackend
from audiorank.cli import EXIT_OK, main
from audiorank.corpus import Qrels, SourceKind
from audiorank.index import EmbeddingIndex
from audiorank.metrics import ndcg_at_k, oracle_precision, precision_at_k
from audiorank.factcheck import Verdict, consistency_report, map_verdict
from audiorank.ranking import RankedList, Stage
from audiorank.rerank import ParseFailure, pairwise_rerank, parse_listwise_output

from conftest import make_doc, oracle_backend


def report(criterion: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] {criterion}{suffix}")
    assert ok, f"{criterion}{suffix}"


def run_of(gains, query_id="q", stage=Stage.RETRIEVAL):
    scored = [(f"d{i}", 1.0 - i / 1000) for i in range(len(gains))]
    return RankedList.from_ordered(query_id, stage, scored)


def qrels_of(gains, extra_relevant=0, query_id="q"):
    qrels = Qrels()
    for i, gain in enumerate(gains):
        qrels.add(query_id, f"d{i}", gain)
    for j in range(extra_relevant):
        qrels.add(query_id, f"x{j}", 1)
    return qrels


# Naive references: direct formula transliterations, no package code.

def ref_precision(gains, k):
    return sum(gains[:k]) / k


def ref_ndcg(gains, total_relevant, k):
    dcg = sum(gains[i] / math.log2(i + 2) for i in range(k))
    if total_relevant == 0:
        return 0.0
    idcg = sum(1.0 / math.log2(i + 2) for i in range(min(k, total_relevant)))
    return dcg / idcg


def test_c1_metric_oracle_equivalence():
    start = time.monotonic()
    rng = random.Random(20240101)
    worst = 0.0
    for _ in range(1000):
        n = rng.randint(1, 40)
        gains = [rng.randint(0, 1) for _ in range(n)]
        extra = rng.randint(0, 6)
        run = run_of(gains)
        qrels = qrels_of(gains, extra)
        k = rng.randint(1, n)
        total_relevant = sum(gains) + extra
        worst = max(worst, abs(ndcg_at_k(run, qrels, k) - ref_ndcg(gains, total_relevant, k)))
        worst = max(worst, abs(precision_at_k(run, qrels, k) - ref_precision(gains, k)))
    hand = ndcg_at_k(run_of([0, 1, 1]), qrels_of([0, 1, 1]), 3)
    elapsed = time.monotonic() - start
    report(
        "C1 metric oracle equivalence",
        worst <= 1e-12 and abs(hand - 0.6934) <= 1e-4 and elapsed < 5.0,
        f"max|delta|={worst:.2e}, hand case={hand:.4f}, {elapsed:.2f}s",
    )


def test_c2_ndcg1_equals_precision1():
    start = time.monotonic()
    rng = random.Random(7)
    worst = 0.0
    for _ in range(10_000):
        n = rng.randint(1, 8)
        gains = [rng.randint(0, 1) for _ in range(n)]
        extra = rng.randint(0, 3)
        run = run_of(gains)
        qrels = qrels_of(gains, extra)
        worst = max(worst, abs(ndcg_at_k(run, qrels, 1) - precision_at_k(run, qrels, 1)))
    elapsed = time.monotonic() - start
    report(
        "C2 nDCG@1 == Precision@1 on 10,000 cases",
        worst == 0.0 and elapsed < 5.0,
        f"max|delta|={worst:.2e}, {elapsed:.2f}s",
    )


def test_c3_retrieval_exactness():
    start = time.monotonic()
    rng = np.random.default_rng(33)
    checked = 0
    for _ in range(500):
        n = int(rng.integers(1, 5001))
        d = int(rng.integers(2, 65))
        matrix = rng.standard_normal((n, d))
        if n >= 6:
            # Exact ties: duplicated rows plus one duplicated query direction.
            matrix[1] = matrix[0]
            matrix[5] = matrix[4]
        matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
        ids = tuple(f"d{i:04d}" for i in range(n))
        index = EmbeddingIndex(SourceKind.ASR, ids, matrix)
        query = matrix[0] if n >= 2 else matrix[0]
        k = int(rng.integers(1, n + 1))
        scores = index.matrix @ query
        expected = sorted(range(n), key=lambda i: (-scores[i], ids[i]))[:k]
        got = index.retrieve("q", query, k)
        assert got.doc_ids() == [ids[i] for i in expected]
        checked += 1
    elapsed = time.monotonic() - start
    report(
        "C3 retrieval equals brute force on 500 random indexes",
        checked == 500 and elapsed < 30.0,
        f"{checked} instances incl. ties, {elapsed:.2f}s",
    )


def _transitive_backend(order):
    position = {doc_id: i for i, doc_id in enumerate(order)}
    pattern = re.compile(r"Passage A: .*?clip (\S+).*?Passage B: .*?clip (\S+)", re.S)

    def score_fn(prompt, options):
        match = pattern.search(prompt)
        return [float(-position[match.group(1)]), float(-position[match.group(2)])]

    return MockBackend(score_fn=score_fn)


def test_c4_pairwise_tournament_correctness():
    start = time.monotonic()
    rng = random.Random(44)
    for _ in range(200):
        n = rng.randint(1, 8)
        run = run_of([0] * n)
        texts = {f"d{i}": f"clip d{i} body" for i in range(n)}
        order = run.doc_ids()
        rng.shuffle(order)
        ranked, outcomes = pairwise_rerank(
            "q", "query", run, texts, _transitive_backend(order), n=n
        )
        assert ranked.doc_ids() == order
        assert len(outcomes) == n * (n - 1)
    # The headline window size: N=10 must cost exactly 90 comparisons.
    run10 = run_of([0] * 10)
    texts10 = {f"d{i}": f"clip d{i} body" for i in range(10)}
    backend10 = MockBackend()
    _, outcomes10 = pairwise_rerank("q", "query", run10, texts10, backend10, n=10)
    elapsed = time.monotonic() - start
    report(
        "C4 pairwise tournament reproduces transitive comparators",
        len(outcomes10) == 90 and backend10.score_calls == 90 and elapsed < 10.0,
        f"200 instances (N<=8), N=10 gives {len(outcomes10)} comparisons, {elapsed:.2f}s",
    )


def test_c5_oracle_reranker_reaches_oracle_precision(synth_dataset):
    start = time.monotonic()
    corpus, store, queries, qrels = synth_dataset
    index = store.index_for(SourceKind.ASR)
    window = 10
    mismatches = []
    for query in queries:
        run = index.retrieve(
            query.id, store.get(query.id, SourceKind.ASR), k=50, exclude_ids=(query.id,)
        )
        texts = {
            item.doc_id: corpus.get(item.doc_id).texts[SourceKind.ASR]
            for item in run.head(window)
        }
        ranked, _ = pairwise_rerank(
            query.id, corpus.get(query.id).texts[SourceKind.ASR], run, texts,
            oracle_backend(qrels, query.id), n=window,
        )
        for k in (1, 3, 5):
            achieved = precision_at_k(ranked, qrels, k)
            bound = oracle_precision(run, qrels, k, window=window)
            if achieved != bound:
                mismatches.append((query.id, k, achieved, bound))
    elapsed = time.monotonic() - start
    report(
        "C5 oracle reranker attains oracle precision on every query",
        not mismatches and elapsed < 30.0,
        f"{len(queries)} queries x k in {{1,3,5}}, {elapsed:.2f}s",
    )


HAND_PARSE_CASES = [
    ("2 > 1 > 3", 3, [2, 1, 3]),
    ("Passage 3 > Passage 3 > Passage 1", 3, [3, 1, 2]),
    ("no passages here", 3, None),
    ("", 3, None),
    ("Passage 2", 5, [2, 1, 3, 4, 5]),
    ("9 > 2 > 1", 3, [2, 1, 3]),
    ("1 > 1 > 1", 3, [1, 2, 3]),
    ("The ranking is: Passage 4, Passage 2, Passage 1, Passage 3.", 4, [4, 2, 1, 3]),
    ("Sure! 3 then 1 then 2", 3, [3, 1, 2]),
    ("10 > 1", 10, [10, 1, 2, 3, 4, 5, 6, 7, 8, 9]),
    ("0 > 1", 3, [1, 2, 3]),
    ("Passage 2 is best. Passage 5 next? But Passage 2 again.", 5, [2, 5, 1, 3, 4]),
    ("42", 3, None),
    ("passages 1-3 equal", 3, [1, 3, 2]),
    ("2>2>3>3>1>1", 3, [2, 3, 1]),
]

_DECORATIONS = ("{m}", "Passage {m}", "passage {m}", "[{m}]", "({m})")
_SEPARATORS = (" > ", ", ", " then ", "\n")
_PROSE = ("best match", "weaker topic", "clearly about the query", "less relevant here")


def _generated_parse_cases(count=35):
    """Inverse construction: pick the mention sequence first, then render it.

    Expected output follows from the mention list alone (first in-range
    mention wins, missing appended ascending), independent of text
    scanning.
    """
    rng = random.Random(606)
    cases = []
    for _ in range(count):
        n = rng.randint(2, 10)
        mentions = [rng.randint(0, n + 4) for _ in range(rng.randint(1, 2 * n))]
        seen, kept = set(), []
        for m in mentions:
            if 1 <= m <= n and m not in seen:
                seen.add(m)
                kept.append(m)
        expected = kept + [i for i in range(1, n + 1) if i not in seen] if kept else None
        sep = rng.choice(_SEPARATORS)
        rendered = sep.join(rng.choice(_DECORATIONS).format(m=m) for m in mentions)
        if rng.random() < 0.5:
            rendered = rng.choice(_PROSE) + ": " + rendered
        if rng.random() < 0.3:
            rendered = rendered + ". " + rng.choice(_PROSE)
        cases.append((rendered, n, expected))
    return cases


def test_c6_listwise_parser_robustness(synth_dataset):
    from audiorank.rerank import listwise_rerank

    cases = HAND_PARSE_CASES + _generated_parse_cases(35)
    assert len(cases) == 50
    failures = []
    for text, n, expected in cases:
        try:
            got = parse_listwise_output(text, n)
        except ParseFailure:
            got = None
        if got != expected:
            failures.append((text, n, expected, got))

    # Fallback path: an unparseable generation must leave metrics at the
    # first-stage baseline.
    corpus, store, queries, qrels = synth_dataset
    index = store.index_for(SourceKind.ASR)
    query = queries[0]
    run = index.retrieve(query.id, store.get(query.id, SourceKind.ASR), 20, exclude_ids=(query.id,))
    texts = {i.doc_id: corpus.get(i.doc_id).texts[SourceKind.ASR] for i in run.head(10)}
    fallback = listwise_rerank(
        query.id, corpus.get(query.id).texts[SourceKind.ASR], run, texts,
        MockBackend(generate_fn=lambda p: "unable to comply"), n=10,
    )
    metrics_equal = all(
        precision_at_k(fallback, qrels, k) == precision_at_k(run, qrels, k) for k in (1, 3, 5)
    ) and all(
        ndcg_at_k(fallback, qrels, k) == ndcg_at_k(run, qrels, k) for k in (3, 5, 10)
    )
    report(
        "C6 listwise parser robust on 50-case fixture",
        not failures and fallback.meta.get("fallback") == "parse-failure" and metrics_equal,
        f"{len(cases)} cases, fallback keeps baseline metrics",
    )


def test_c7_factcheck_aggregation_and_total_mapper():
    start = time.monotonic()

    def generate(prompt):
        if "Facts:" in prompt:
            return "- f1\n- f2\n- f3\n- f4"
        for token, reply in (("f1", "True"), ("f2", "TRUE!"), ("f3", "false"), ("f4", "unsure")):
            if f"Statement: {token}" in prompt:
                return reply
        raise AssertionError("unexpected prompt")

    from audiorank.corpus import Corpus

    corpus = Corpus(
        [make_doc(f"d{i}", {"t"}, asr=f"evidence {i}", synopsis=f"claims {i}") for i in range(3)]
    )
    rep, verdicts = consistency_report(
        corpus, SourceKind.SYNOPSIS, SourceKind.ASR, MockBackend(generate_fn=generate),
        sample_size=3, seed=0,
    )
    # Hand count: 3 docs x (T, T, F, Other) = 12 facts, 50% / 25% / 25%.
    hand_ok = (
        rep.n_facts == 12
        and rep.pct_true == pytest.approx(50.0)
        and rep.pct_false == pytest.approx(25.0)
        and rep.pct_other == pytest.approx(25.0)
        and abs(rep.pct_true + rep.pct_false + rep.pct_other - 100.0) <= 0.01
    )

    rng = random.Random(123)
    alphabet = [chr(cp) for cp in range(32, 0x2FF)] + ["\n", "\t", "真", "假"]
    fuzz_ok = True
    for _ in range(10_000):
        raw = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        if map_verdict(raw) not in (Verdict.TRUE, Verdict.FALSE, Verdict.OTHER):
            fuzz_ok = False
            break
    elapsed = time.monotonic() - start
    report(
        "C7 fact-check aggregation and total verdict mapper",
        hand_ok and fuzz_ok,
        f"12-fact hand fixture, 10,000-string fuzz, {elapsed:.2f}s",
    )


def test_c8_pipeline_determinism(tmp_path):
    data = tmp_path / "data"
    assert main(["synth", "--out", str(data), "--write-config", "--seed", "13"]) == EXIT_OK

    def run_once(name):
        out = tmp_path / name
        base = (data / "config.toml").read_text()
        config_path = tmp_path / f"{name}.toml"
        config_path.write_text(base.replace(json.dumps(str(data / "out")), json.dumps(str(out))))
        assert main(["pipeline", "--config", str(config_path)]) == EXIT_OK
        return out

    first = run_once("a")
    second = run_once("b")
    artifacts = (
        "run_retrieval.trec",
        "run_rerank_pairwise.trec",
        "comparisons.jsonl",
        "metrics.tsv",
        "metrics.json",
    )
    diffs = [
        name for name in artifacts
        if (first / name).read_bytes() != (second / name).read_bytes()
    ]
    report(
        "C8 pipeline reruns are byte-identical",
        not diffs,
        f"{len(artifacts)} artifacts compared",
    )


def test_c9_noisy_oracle_still_improves_ndcg(synth_dataset):
    start = time.monotonic()
    corpus, store, queries, qrels = synth_dataset
    index = store.index_for(SourceKind.ASR)
    window = 10

    baselines = []
    runs = []
    for query in queries:
        run = index.retrieve(
            query.id, store.get(query.id, SourceKind.ASR), k=window, exclude_ids=(query.id,)
        )
        runs.append((query, run))
        baselines.append(ndcg_at_k(run, qrels, 3))
    baseline_mean = sum(baselines) / len(baselines)

    wins = losses = 0
    reranked_means = []
    for seed in range(100):
        rng = random.Random(seed)
        values = []
        for query, run in runs:
            texts = {
                item.doc_id: corpus.get(item.doc_id).texts[SourceKind.ASR]
                for item in run.head(window)
            }
            ranked, _ = pairwise_rerank(
                query.id, corpus.get(query.id).texts[SourceKind.ASR], run, texts,
                oracle_backend(qrels, query.id, flip_prob=0.2, rng=rng),
                n=window, jobs=1,
            )
            values.append(ndcg_at_k(ranked, qrels, 3))
        mean = sum(values) / len(values)
        reranked_means.append(mean)
        if mean > baseline_mean:
            wins += 1
        elif mean < baseline_mean:
            losses += 1

    trials = wins + losses
    p_value = sum(math.comb(trials, i) for i in range(wins, trials + 1)) / 2**trials if trials else 1.0
    elapsed = time.monotonic() - start
    overall = sum(reranked_means) / len(reranked_means)
    report(
        "C9 noisy-oracle reranking beats stage 1 (sign test)",
        wins > losses and p_value < 0.05 and overall >= baseline_mean and elapsed < 120.0,
        f"wins={wins}/100, p={p_value:.2e}, ndcg@3 {baseline_mean:.3f}->{overall:.3f}, {elapsed:.1f}s",
    )
