"""Corpus loading, validation, and qrels derivation."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from audiorank.corpus import (
    Corpus,
    CorpusError,
    Document,
    Query,
    SourceKind,
    derive_qrels,
    load_corpus,
    load_qrels,
    load_queries,
    save_corpus,
    save_qrels,
    save_queries,
)

from conftest import make_doc


def write_jsonl(path, objs):
    with open(path, "w", encoding="utf-8") as handle:
        for obj in objs:
            handle.write(json.dumps(obj) + "\n")


def doc_line(doc_id, topics=("health",), texts=None, **extra):
    obj = {"id": doc_id, "topics": list(topics), "texts": texts or {"asr": "some speech"}}
    obj.update(extra)
    return obj


class TestLoadCorpus:
    def test_three_valid_lines(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_jsonl(path, [doc_line(f"d{i}") for i in range(3)])
        corpus = load_corpus(path)
        assert len(corpus) == 3
        assert corpus.get("d1").topics == frozenset({"health"})

    def test_duplicate_id_cites_id_and_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_jsonl(
            path,
            [
                doc_line("d0"),
                doc_line("d1"),
                doc_line("d2"),
                doc_line("d3"),
                doc_line("d1"),
            ],
        )
        with pytest.raises(CorpusError) as err:
            load_corpus(path)
        assert "'d1'" in str(err.value)
        assert "line 5" in str(err.value)
        assert "line 2" in str(err.value)

    def test_empty_topics_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_jsonl(path, [doc_line("d0", topics=())])
        with pytest.raises(CorpusError, match="no topics"):
            load_corpus(path)

    def test_unknown_source_kind_names_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_jsonl(path, [doc_line("d0"), doc_line("d1", texts={"subtitles": "x"})])
        with pytest.raises(CorpusError) as err:
            load_corpus(path)
        assert "subtitles" in str(err.value)
        assert "line 2" in str(err.value)

    def test_blank_text_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_jsonl(path, [doc_line("d0", texts={"asr": "   "})])
        with pytest.raises(CorpusError, match="empty asr text"):
            load_corpus(path)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "d0", "topics": ["a"], "texts": {}}\nnot json\n')
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_archive_scale_shape(self, tmp_path):
        # Same shape as the target archive: 7855 documents over 11 topics.
        path = tmp_path / "big.jsonl"
        topics = [f"t{i}" for i in range(11)]
        write_jsonl(
            path,
            [doc_line(f"d{i:05d}", topics=(topics[i % 11],)) for i in range(7855)],
        )
        corpus = load_corpus(path)
        assert len(corpus) == 7855
        histogram = corpus.topic_histogram()
        assert len(histogram) == 11
        assert sum(histogram.values()) == 7855


class TestCorpusAccess:
    def test_counts(self, tiny_corpus):
        assert tiny_corpus.topic_histogram() == {"health": 2, "education": 2, "sport": 1}
        assert tiny_corpus.source_counts() == {"asr": 4, "synopsis": 4}

    def test_unknown_id(self, tiny_corpus):
        with pytest.raises(CorpusError, match="unknown document"):
            tiny_corpus.get("nope")

    def test_duplicate_in_memory(self):
        with pytest.raises(CorpusError, match="duplicate"):
            Corpus([make_doc("a", {"x"}), make_doc("a", {"y"})])


class TestRoundTrip:
    ids = st.text(alphabet="abcdefghij0123456789", min_size=1, max_size=6)
    topics = st.sets(st.text(alphabet="xyz", min_size=1, max_size=3), min_size=1, max_size=3)
    texts = st.text(min_size=1, max_size=40).filter(lambda s: s.strip())

    @given(
        st.dictionaries(
            ids,
            st.tuples(
                topics,
                st.dictionaries(st.sampled_from(list(SourceKind)), texts, max_size=3),
                st.one_of(st.none(), st.floats(0, 1e6, allow_nan=False)),
            ),
            min_size=1,
            max_size=10,
        )
    )
    @settings(max_examples=50)
    def test_save_load_identity(self, tmp_path_factory, table):
        docs = [
            Document(id=doc_id, topics=frozenset(tops), texts=dict(texts), duration_s=dur)
            for doc_id, (tops, texts, dur) in table.items()
        ]
        corpus = Corpus(docs)
        path = tmp_path_factory.mktemp("rt") / "corpus.jsonl"
        save_corpus(corpus, path)
        reloaded = load_corpus(path)
        assert len(reloaded) == len(corpus)
        for doc in corpus:
            other = reloaded.get(doc.id)
            assert other.topics == doc.topics
            assert other.texts == doc.texts
            assert other.duration_s == doc.duration_s


class TestQueries:
    def test_load_and_validate(self, tmp_path, tiny_corpus):
        path = tmp_path / "queries.jsonl"
        write_jsonl(path, [{"id": "d1", "topic": "health"}, {"id": "d3", "topic": "sport"}])
        queries = load_queries(path, tiny_corpus)
        assert queries == [Query("d1", "health"), Query("d3", "sport")]

    def test_unknown_query_id(self, tmp_path, tiny_corpus):
        path = tmp_path / "queries.jsonl"
        write_jsonl(path, [{"id": "zz", "topic": "health"}])
        with pytest.raises(CorpusError, match="'zz'"):
            load_queries(path, tiny_corpus)

    def test_topic_must_be_single_string(self, tmp_path):
        path = tmp_path / "queries.jsonl"
        write_jsonl(path, [{"id": "d1", "topic": ["health", "sport"]}])
        with pytest.raises(CorpusError, match="exactly one topic"):
            load_queries(path)

    def test_round_trip(self, tmp_path):
        queries = [Query("d1", "health"), Query("d2", "sport")]
        path = tmp_path / "q.jsonl"
        save_queries(queries, path)
        assert load_queries(path) == queries


class TestDeriveQrels:
    def test_topic_overlap_gains(self, tiny_corpus):
        qrels = derive_qrels(tiny_corpus, [Query("d1", "health")])
        # d2 carries {health, education}: any overlapping label counts.
        assert qrels.gain("d1", "d2") == 1
        assert qrels.gain("d1", "d3") == 0
        assert qrels.gain("d1", "d4") == 0

    def test_self_pair_absent(self, tiny_corpus):
        qrels = derive_qrels(tiny_corpus, [Query("d1", "health")])
        assert qrels.gain("d1", "d1") == 0
        assert all(did != "d1" for _, did, _ in qrels.entries())

    def test_include_self_flag(self, tiny_corpus):
        qrels = derive_qrels(tiny_corpus, [Query("d1", "health")], include_self=True)
        assert qrels.gain("d1", "d1") == 1

    def test_unknown_query(self, tiny_corpus):
        with pytest.raises(CorpusError, match="'zz'"):
            derive_qrels(tiny_corpus, [Query("zz", "health")])

    @given(st.data())
    @settings(max_examples=30)
    def test_relevant_count_matches_brute_force(self, data):
        topics = ["a", "b", "c", "d"]
        n = data.draw(st.integers(2, 12))
        docs = [
            make_doc(
                f"d{i}",
                data.draw(st.sets(st.sampled_from(topics), min_size=1, max_size=3)),
            )
            for i in range(n)
        ]
        corpus = Corpus(docs)
        query = Query(docs[0].id, sorted(docs[0].topics)[0])
        qrels = derive_qrels(corpus, [query])
        brute = sum(
            1 for doc in docs if doc.id != query.id and query.topic in doc.topics
        )
        assert qrels.relevant_count(query.id) == brute


class TestQrelsIO:
    def test_round_trip(self, tmp_path, tiny_corpus):
        qrels = derive_qrels(tiny_corpus, [Query("d1", "health"), Query("d3", "sport")])
        path = tmp_path / "qrels.txt"
        save_qrels(qrels, path)
        reloaded = load_qrels(path)
        assert sorted(reloaded.entries()) == sorted(qrels.entries())
        assert reloaded.relevant("d1") == {"d2"}

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "qrels.txt"
        path.write_text("q1 0 d1\n")
        with pytest.raises(CorpusError, match="line 1"):
            load_qrels(path)

    def test_non_binary_gain(self, tmp_path):
        path = tmp_path / "qrels.txt"
        path.write_text("q1 0 d1 2\n")
        with pytest.raises(CorpusError, match="0 or 1"):
            load_qrels(path)
