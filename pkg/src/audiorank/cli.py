"""Command-line front end: every pipeline stage is a subcommand.

Stages communicate through files in the output directory, so ``pipeline``
is exactly the composition of the individual subcommands and any stage can
be re-run or resumed in isolation. Every artifact gets a ``.manifest.json``
sidecar recording the config hash, seed, and backend identity; nothing in
an artifact depends on wall-clock time, so identical configs reproduce
byte-identical outputs.

Exit codes: 0 success, 2 validation failure (config, flags, malformed
inputs), 3 runtime failure, 4 backend failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from audiorank import __version__, autosum, factcheck, kernels, metrics, rerank, synth
from audiorank.backend import Backend, BackendError, make_backend
from audiorank.config import (
    Config,
    ConfigError,
    config_hash,
    load_config,
    validate_config,
)
from audiorank.corpus import (
    CorpusError,
    SourceKind,
    derive_qrels,
    load_corpus,
    load_qrels,
    load_queries,
    save_corpus,
    save_qrels,
)
from audiorank.index import EmbeddingError, load_embeddings
from audiorank.metrics import MetricsError
from audiorank.ranking import RankedList, RankingError, read_run, write_run

log = logging.getLogger("audiorank")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_BACKEND = 4

_VALIDATION_ERRORS = (
    ConfigError,
    CorpusError,
    EmbeddingError,
    RankingError,
    MetricsError,
    FileNotFoundError,
)


def _write_manifest(artifact: Path, config: Config, stage: str, inputs: dict) -> None:
    manifest = {
        "artifact": artifact.name,
        "stage": stage,
        "config_hash": config_hash(config),
        "seed": config.seed,
        "backend": config.backend.kind if config.backend.kind != "remote"
        else f"remote:{config.backend.model}@{config.backend.base_url}",
        "inputs": {key: str(value) for key, value in inputs.items()},
        "package_version": __version__,
        "kernels": kernels.KERNEL_BACKEND,
    }
    path = artifact.with_name(artifact.name + ".manifest.json")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _out_dir(config: Config) -> Path:
    out = Path(config.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _make_backend(config: Config) -> Backend:
    script = dict(config.backend.script)
    script_path = script.pop("file", None)
    if script_path:
        with open(script_path, encoding="utf-8") as handle:
            loaded = json.load(handle)
        for key in ("responses", "option_scores"):
            script.setdefault(key, loaded.get(key))
    return make_backend(replace(config.backend, script=script))


# --- stage implementations -------------------------------------------------

def stage_ingest(config: Config) -> None:
    """Load and validate corpus, embeddings, queries; derive and write qrels."""
    out = _out_dir(config)
    corpus = load_corpus(config.paths.corpus)
    store = load_embeddings(config.paths.embeddings)
    queries = load_queries(config.paths.queries, corpus)

    unknown = sorted({did for did, _kind in store.pairs() if did not in corpus})
    if unknown:
        raise CorpusError(f"embeddings reference unknown documents: {', '.join(unknown[:10])}")

    qrels = derive_qrels(corpus, queries, include_self=config.retrieve.include_self)
    qrels_path = out / "qrels.txt"
    save_qrels(qrels, qrels_path)
    _write_manifest(qrels_path, config, "ingest", {"corpus": config.paths.corpus, "queries": config.paths.queries})

    stats = {
        "documents": len(corpus),
        "queries": len(queries),
        "embeddings": len(store),
        "embedding_dim": store.dim,
        "topics": dict(sorted(corpus.topic_histogram().items())),
        "sources": dict(sorted(corpus.source_counts().items())),
    }
    stats_path = out / "corpus_stats.json"
    with open(stats_path, "w", encoding="utf-8") as handle:
        json.dump(stats, handle, indent=2, sort_keys=True)
        handle.write("\n")
    _write_manifest(stats_path, config, "ingest", {"corpus": config.paths.corpus})
    log.info("ingested %d documents, %d queries, %d embeddings", len(corpus), len(queries), len(store))


def stage_autosum(config: Config, corpus_path: str | Path, out_path: str | Path) -> None:
    """Summarize transcripts and write the corpus with autosum texts filled in."""
    corpus = load_corpus(corpus_path)
    backend = _make_backend(config)
    updated, stats = autosum.summarize_corpus(
        corpus,
        backend,
        source=SourceKind(config.autosum.source),
        overwrite=config.autosum.overwrite,
        max_new_tokens=config.autosum.max_new_tokens,
    )
    out_path = Path(out_path)
    tmp = out_path.with_name(out_path.name + ".tmp")
    save_corpus(updated, tmp)
    tmp.replace(out_path)
    _write_manifest(out_path, config, "autosum", {"corpus": str(corpus_path)})
    log.info("autosum: %s", stats)


def stage_retrieve(config: Config, run_path: Path) -> None:
    """First-stage retrieval for every query; writes a TREC run file."""
    store = load_embeddings(config.paths.embeddings)
    queries = load_queries(config.paths.queries)
    query_source = SourceKind(config.retrieve.query_source)
    doc_source = SourceKind(config.retrieve.doc_source)
    index = store.index_for(doc_source)

    runs: list[RankedList] = []
    for query in queries:
        qvec = store.get(query.id, query_source)
        exclude = () if config.retrieve.include_self else (query.id,)
        runs.append(index.retrieve(query.id, qvec, config.retrieve.k, exclude_ids=exclude))
    write_run(run_path, runs, tag=config.tag)
    _write_manifest(
        run_path, config, "retrieve",
        {"embeddings": config.paths.embeddings, "queries": config.paths.queries},
    )
    log.info("retrieved %d queries at k=%d from %d documents", len(runs), config.retrieve.k, len(index))


def stage_rerank(config: Config, run_in: Path, corpus_path: str | Path, out: Path) -> None:
    """Rerank the head of each first-stage list; writes run + audit artifacts."""
    corpus = load_corpus(corpus_path)
    first_stage = read_run(run_in)
    settings = rerank.RerankConfig(
        n=config.rerank.n,
        strategy=rerank.Strategy(config.rerank.strategy),
        query_source=SourceKind(config.rerank.query_source),
        doc_source=SourceKind(config.rerank.doc_source),
        passage_tokens=config.rerank.passage_tokens,
        lexical_variant=config.rerank.lexical_variant,
        pairwise_mode=config.rerank.pairwise_mode,
        max_new_tokens=config.rerank.max_new_tokens,
    )
    strategy = settings.strategy
    query_source = settings.query_source
    doc_source = settings.doc_source
    backend = _make_backend(config) if strategy is not rerank.Strategy.LEXICAL else None

    run_path = out / f"run_rerank_{strategy.value}.trec"
    comparisons_path = out / "comparisons.jsonl"
    stats_path = out / "rerank_stats.json"

    reranked: list[RankedList] = []
    per_query_stats: dict[str, dict] = {}
    n_comparisons = 0

    with open(comparisons_path, "w", encoding="utf-8") as comp_handle:
        for run in first_stage:
            query_doc = corpus.get(run.query_id)
            query_text = query_doc.text(query_source)
            if query_text is None:
                raise CorpusError(
                    f"query document {run.query_id!r} has no {query_source.value} text"
                )
            doc_texts = {}
            for item in run.head(settings.n):
                text = corpus.get(item.doc_id).text(doc_source)
                if text is None:
                    raise CorpusError(f"document {item.doc_id!r} has no {doc_source.value} text")
                doc_texts[item.doc_id] = text

            if strategy is rerank.Strategy.LISTWISE:
                result = rerank.listwise_rerank(
                    run.query_id, query_text, run, doc_texts, backend,
                    n=settings.n,
                    passage_tokens=settings.passage_tokens,
                    max_new_tokens=settings.max_new_tokens,
                )
            elif strategy is rerank.Strategy.PAIRWISE:
                result, outcomes = rerank.pairwise_rerank(
                    run.query_id, query_text, run, doc_texts, backend,
                    n=settings.n,
                    passage_tokens=settings.passage_tokens,
                    mode=settings.pairwise_mode,
                )
                for outcome in outcomes:
                    comp_handle.write(json.dumps({
                        "query_id": outcome.query_id, "a": outcome.a, "b": outcome.b,
                        "winner": outcome.winner, "margin": outcome.margin,
                    }))
                    comp_handle.write("\n")
                n_comparisons += len(outcomes)
            else:
                result = rerank.lexical_rerank(
                    run.query_id, query_text, run, doc_texts,
                    n=settings.n, variant=settings.lexical_variant,
                )
            reranked.append(result)
            stats = {k: v for k, v in result.meta.items() if k != "raw_output"}
            if "fallback" in result.meta:
                log.warning("listwise parse failure for query %s; kept first-stage order", run.query_id)
            per_query_stats[run.query_id] = stats

    write_run(run_path, reranked, tag=config.tag)
    with open(stats_path, "w", encoding="utf-8") as handle:
        json.dump(
            {"strategy": strategy.value, "comparisons_total": n_comparisons, "per_query": per_query_stats},
            handle, indent=2, sort_keys=True,
        )
        handle.write("\n")
    _write_manifest(run_path, config, "rerank", {"run": str(run_in), "corpus": str(corpus_path)})
    _write_manifest(comparisons_path, config, "rerank", {"run": str(run_in)})
    _write_manifest(stats_path, config, "rerank", {"run": str(run_in)})
    log.info("reranked %d queries with %s", len(reranked), strategy.value)


def stage_evaluate(config: Config, run_path: Path, qrels_path: Path) -> metrics.MetricReport:
    """Score a run against qrels; writes the metric table as TSV and JSON."""
    out = _out_dir(config)
    runs = read_run(run_path)
    qrels = load_qrels(qrels_path)
    report = metrics.evaluate_run(
        runs, qrels,
        ndcg_cutoffs=tuple(config.evaluate.ndcg),
        precision_cutoffs=tuple(config.evaluate.precision),
        idcg_pool=config.evaluate.idcg_pool,
    )
    tsv_path = out / "metrics.tsv"
    json_path = out / "metrics.json"
    metrics.write_metrics_tsv(report, tsv_path)
    metrics.write_metrics_json(report, json_path)
    _write_manifest(tsv_path, config, "evaluate", {"run": str(run_path), "qrels": str(qrels_path)})
    _write_manifest(json_path, config, "evaluate", {"run": str(run_path), "qrels": str(qrels_path)})
    for name in report.metric_names:
        print(f"{name}\t{report.mean[name]:.4f}")
    if report.flagged:
        log.warning("queries with no relevant documents: %s", ", ".join(report.flagged))
    return report


def stage_factcheck(config: Config, corpus_path: str | Path) -> None:
    """Run the information-consistency analysis; writes TSV report + verdict log."""
    out = _out_dir(config)
    corpus = load_corpus(corpus_path)
    backend = _make_backend(config)
    report, verdicts = factcheck.consistency_report(
        corpus,
        hypothesis=SourceKind(config.factcheck.hypothesis),
        evidence=SourceKind(config.factcheck.evidence),
        backend=backend,
        sample_size=config.factcheck.sample,
        seed=config.seed,
    )
    tsv_path = out / "factcheck.tsv"
    verdicts_path = out / "verdicts.jsonl"
    factcheck.write_consistency_tsv([report], tsv_path)
    factcheck.write_verdicts_jsonl(verdicts, verdicts_path)
    _write_manifest(tsv_path, config, "factcheck", {"corpus": str(corpus_path)})
    _write_manifest(verdicts_path, config, "factcheck", {"corpus": str(corpus_path)})
    print(
        f"{report.hypothesis.value} vs {report.evidence.value}: {report.n_facts} facts"
        + (
            ""
            if report.undefined
            else f", {report.pct_true:.2f}% true / {report.pct_false:.2f}% false / {report.pct_other:.2f}% other"
        )
    )


def run_pipeline(config: Config, resume: bool = False) -> None:
    """Run all configured stages in order, reusing existing artifacts on resume."""
    out = _out_dir(config)
    qrels_path = out / "qrels.txt"
    retrieval_run = out / "run_retrieval.trec"
    rerank_run = out / f"run_rerank_{config.rerank.strategy}.trec"
    corpus_path: str | Path = config.paths.corpus

    def todo(path: Path) -> bool:
        return not (resume and path.exists())

    if todo(qrels_path):
        stage_ingest(config)
    if config.autosum.enabled:
        autosum_corpus = out / "corpus_autosum.jsonl"
        if todo(autosum_corpus):
            stage_autosum(config, corpus_path, autosum_corpus)
        corpus_path = autosum_corpus
    if todo(retrieval_run):
        stage_retrieve(config, retrieval_run)
    if todo(rerank_run):
        stage_rerank(config, retrieval_run, corpus_path, out)
    stage_evaluate(config, rerank_run, qrels_path)
    if config.factcheck.enabled:
        stage_factcheck(config, corpus_path)


# --- argument handling -------------------------------------------------------

def _effective_config(args: argparse.Namespace) -> Config:
    config = load_config(args.config) if args.config else Config()

    overrides = {
        "seed": ("seed",),
        "out": ("paths", "out_dir"),
        "corpus": ("paths", "corpus"),
        "embeddings": ("paths", "embeddings"),
        "queries": ("paths", "queries"),
        "k": ("retrieve", "k"),
        "include_self": ("retrieve", "include_self"),
        "strategy": ("rerank", "strategy"),
        "n": ("rerank", "n"),
        "query_source": None,  # applied to the stage the subcommand runs
        "doc_source": None,
        "hypothesis": ("factcheck", "hypothesis"),
        "evidence": ("factcheck", "evidence"),
        "sample": ("factcheck", "sample"),
        "backend_kind": ("backend", "kind"),
    }
    for name, target in overrides.items():
        value = getattr(args, name, None)
        if value is None or target is None:
            continue
        node = config
        for part in target[:-1]:
            node = getattr(node, part)
        setattr(node, target[-1], value)

    # Source-kind flags apply to whichever stage this subcommand drives.
    command = getattr(args, "command", None)
    if getattr(args, "query_source", None) is not None:
        section = config.retrieve if command == "retrieve" else config.rerank
        section.query_source = args.query_source
    if getattr(args, "doc_source", None) is not None:
        section = config.retrieve if command == "retrieve" else config.rerank
        section.doc_source = args.doc_source

    validate_config(config)
    return config


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file; flags override its values")
    parser.add_argument("--out", help="output directory for artifacts")
    parser.add_argument("--seed", type=int, help="global random seed")
    parser.add_argument("--backend-kind", choices=["mock", "remote"], dest="backend_kind",
                        help="override the configured backend kind")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


_SOURCE_CHOICES = [kind.value for kind in SourceKind]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="audiorank",
        description="Two-stage topic retrieval: exact embedding search plus zero-shot LLM reranking.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic topic-clustered dataset")
    _add_common(p)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--write-config", action="store_true",
                   help="also write a ready-to-run config.toml next to the data")

    p = sub.add_parser("ingest", help="validate corpus/embeddings/queries and derive qrels")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--embeddings")
    p.add_argument("--queries")
    p.add_argument("--include-self", action=argparse.BooleanOptionalAction, default=None,
                   help="keep the query clip in its own candidate pool and qrels")

    p = sub.add_parser("autosum", help="summarize transcripts into the autosum text source")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--out-corpus", help="write here instead of rewriting the corpus in place")

    p = sub.add_parser("retrieve", help="first-stage exact cosine retrieval")
    _add_common(p)
    p.add_argument("--embeddings")
    p.add_argument("--queries")
    p.add_argument("--k", type=int, help="candidate depth (default 1000)")
    p.add_argument("--query-source", choices=_SOURCE_CHOICES, dest="query_source")
    p.add_argument("--doc-source", choices=_SOURCE_CHOICES, dest="doc_source")
    p.add_argument("--include-self", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("rerank", help="second-stage reranking of the top-N candidates")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--run", help="first-stage run file (default: <out>/run_retrieval.trec)")
    p.add_argument("--strategy", choices=["listwise", "pairwise", "lexical"])
    p.add_argument("--n", type=int, help="rerank window size (default 10)")
    p.add_argument("--query-source", choices=_SOURCE_CHOICES, dest="query_source")
    p.add_argument("--doc-source", choices=_SOURCE_CHOICES, dest="doc_source")

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    _add_common(p)
    p.add_argument("--run", help="run file (default: the configured rerank output)")
    p.add_argument("--qrels", help="qrels file (default: <out>/qrels.txt)")

    p = sub.add_parser("factcheck", help="atomic-fact consistency between two text sources")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--hypothesis", choices=_SOURCE_CHOICES)
    p.add_argument("--evidence", choices=_SOURCE_CHOICES)
    p.add_argument("--sample", type=int)

    p = sub.add_parser("pipeline", help="run every configured stage in order")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--embeddings")
    p.add_argument("--queries")
    p.add_argument("--strategy", choices=["listwise", "pairwise", "lexical"])
    p.add_argument("--resume", action="store_true", help="skip stages whose artifacts already exist")

    return parser


def _write_starter_config(out: Path, config: Config) -> Path:
    def q(value: str) -> str:
        return json.dumps(value)

    text = f"""seed = {config.seed}
tag = "synthetic"

[paths]
corpus = {q(str(out / 'corpus.jsonl'))}
embeddings = {q(str(out / 'embeddings.jsonl'))}
queries = {q(str(out / 'queries.jsonl'))}
out_dir = {q(str(out / 'out'))}

[backend]
kind = "mock"

[retrieve]
k = 100

[rerank]
strategy = "pairwise"
n = 10
"""
    path = out / "config.toml"
    path.write_text(text, encoding="utf-8")
    return path


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "synth":
        out = Path(args.out or "data")
        seed = args.seed if args.seed is not None else 13
        synth_config = synth.SynthConfig(
            n_docs=args.docs, n_queries=args.queries, dim=args.dim, seed=seed
        )
        paths = synth.write_dataset(out, synth_config)
        print("\n".join(str(p) for p in paths))
        if args.write_config:
            config = Config()
            config.seed = seed
            print(_write_starter_config(out, config))
        return

    config = _effective_config(args)
    out = _out_dir(config)

    if args.command == "ingest":
        stage_ingest(config)
    elif args.command == "autosum":
        target = args.out_corpus or config.paths.corpus
        stage_autosum(config, config.paths.corpus, target)
    elif args.command == "retrieve":
        stage_retrieve(config, out / "run_retrieval.trec")
    elif args.command == "rerank":
        run_in = Path(args.run) if args.run else out / "run_retrieval.trec"
        stage_rerank(config, run_in, config.paths.corpus, out)
    elif args.command == "evaluate":
        run_path = Path(args.run) if args.run else out / f"run_rerank_{config.rerank.strategy}.trec"
        qrels_path = Path(args.qrels) if args.qrels else out / "qrels.txt"
        stage_evaluate(config, run_path, qrels_path)
    elif args.command == "factcheck":
        stage_factcheck(config, config.paths.corpus)
    elif args.command == "pipeline":
        run_pipeline(config, resume=args.resume)
    else:  # pragma: no cover - argparse enforces the choices
        raise ValueError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        _dispatch(args)
    except _VALIDATION_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except BackendError as err:
        print(f"backend error: {err}", file=sys.stderr)
        return EXIT_BACKEND
    except Exception as err:  # noqa: BLE001 - the CLI boundary maps everything to exit codes
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
