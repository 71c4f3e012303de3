"""Shared fixtures: a tiny hand-built corpus, the seeded synthetic dataset,
and scripted relevance-oracle backends for reranking tests."""

import re

import pytest

from audiorank.backend import MockBackend
from audiorank.corpus import Corpus, Document, SourceKind, derive_qrels
from audiorank.ranking import RankedList, Stage
from audiorank.synth import SynthConfig, generate_dataset


def make_doc(doc_id, topics, asr="spoken words", synopsis=None, autosum=None):
    texts = {SourceKind.ASR: asr}
    if synopsis is not None:
        texts[SourceKind.SYNOPSIS] = synopsis
    if autosum is not None:
        texts[SourceKind.AUTOSUM] = autosum
    return Document(id=doc_id, topics=frozenset(topics), texts=texts)


def make_run(query_id, doc_scores, stage=Stage.RETRIEVAL):
    """Build a RankedList from (doc_id, score) pairs in rank order."""
    return RankedList.from_ordered(query_id, stage, doc_scores)


@pytest.fixture
def tiny_corpus():
    return Corpus(
        [
            make_doc("d1", {"health"}, asr="health talk clip d1", synopsis="health report d1"),
            make_doc("d2", {"health", "education"}, asr="school clinic clip d2", synopsis="clinic d2"),
            make_doc("d3", {"sport"}, asr="match commentary clip d3", synopsis="match d3"),
            make_doc("d4", {"education"}, asr="lecture recording clip d4", synopsis="lecture d4"),
        ]
    )


@pytest.fixture(scope="session")
def synth_dataset():
    corpus, store, queries = generate_dataset(SynthConfig())
    qrels = derive_qrels(corpus, queries)
    return corpus, store, queries, qrels


# The shipped pairwise template lays passages out as "Passage A: ...";
# synthetic texts start with "clip <doc_id>", so a scripted judge can
# recover both candidate identities from the prompt alone.
PASSAGE_IDS_RE = re.compile(r"Passage A: .*?clip (\S+).*?Passage B: .*?clip (\S+)", re.S)


def relevance_oracle(qrels, query_id, flip_prob=0.0, rng=None):
    """score_fn preferring the relevant passage; optionally flipped at random.

    Equal gains score equal, which hands the decision to the tie rule
    (first-stage order), making the noiseless judge a transitive total
    order: gain descending, then first-stage rank.
    """

    def score_fn(prompt, options):
        assert options == ("A", "B")
        match = PASSAGE_IDS_RE.search(prompt)
        assert match is not None, "pairwise prompt lost the passage markers"
        gain_a = float(qrels.gain(query_id, match.group(1)))
        gain_b = float(qrels.gain(query_id, match.group(2)))
        if flip_prob and rng.random() < flip_prob:
            gain_a, gain_b = gain_b, gain_a
        return [gain_a, gain_b]

    return score_fn


def oracle_backend(qrels, query_id, flip_prob=0.0, rng=None):
    return MockBackend(score_fn=relevance_oracle(qrels, query_id, flip_prob, rng))
