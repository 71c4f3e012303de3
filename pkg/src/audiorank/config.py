"""Experiment configuration: a TOML tree, with CLI flags layered on top.

The file mirrors the pipeline stages; every field has a default, so a
config file (and any flag) only needs to state what differs. Validation
collects all violations and reports them together.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from audiorank.backend import BackendConfig
from audiorank.corpus import SourceKind


class ConfigError(ValueError):
    """Invalid configuration; the message lists every violation found."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in violations))
        self.violations = violations


@dataclass
class PathsConfig:
    corpus: str = "corpus.jsonl"
    embeddings: str = "embeddings.jsonl"
    queries: str = "queries.jsonl"
    out_dir: str = "out"


@dataclass
class RetrieveConfig:
    k: int = 1000
    query_source: str = "asr"
    doc_source: str = "asr"
    include_self: bool = False


@dataclass
class RerankSection:
    strategy: str = "pairwise"
    n: int = 10
    query_source: str = "asr"
    doc_source: str = "asr"
    passage_tokens: int = 256
    lexical_variant: str = "rouge1"
    pairwise_mode: str = "options"
    max_new_tokens: int = 128


@dataclass
class EvaluateConfig:
    ndcg: list = field(default_factory=lambda: [3, 5, 10])
    precision: list = field(default_factory=lambda: [1, 3, 5])
    idcg_pool: str = "corpus"


@dataclass
class AutosumConfig:
    enabled: bool = False
    source: str = "asr"
    overwrite: bool = False
    max_new_tokens: int = 512


@dataclass
class FactcheckConfig:
    enabled: bool = False
    hypothesis: str = "synopsis"
    evidence: str = "asr"
    sample: int = 500


@dataclass
class Config:
    seed: int = 13
    tag: str = "run"
    paths: PathsConfig = field(default_factory=PathsConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    retrieve: RetrieveConfig = field(default_factory=RetrieveConfig)
    rerank: RerankSection = field(default_factory=RerankSection)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)
    autosum: AutosumConfig = field(default_factory=AutosumConfig)
    factcheck: FactcheckConfig = field(default_factory=FactcheckConfig)


_SECTIONS = {
    "paths": PathsConfig,
    "backend": BackendConfig,
    "retrieve": RetrieveConfig,
    "rerank": RerankSection,
    "evaluate": EvaluateConfig,
    "autosum": AutosumConfig,
    "factcheck": FactcheckConfig,
}

_SOURCE_TOKENS = tuple(kind.value for kind in SourceKind)


def config_from_dict(tree: dict) -> Config:
    """Build a Config from a parsed TOML tree, rejecting unknown keys."""
    violations: list[str] = []
    kwargs: dict = {}
    for key, value in tree.items():
        if key in ("seed", "tag"):
            kwargs[key] = value
        elif key in _SECTIONS:
            section_cls = _SECTIONS[key]
            known = {f.name for f in section_cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
            unknown = set(value) - known
            if unknown:
                violations.append(f"[{key}]: unknown keys {sorted(unknown)}")
                value = {k: v for k, v in value.items() if k in known}
            try:
                kwargs[key] = section_cls(**value)
            except TypeError as err:
                violations.append(f"[{key}]: {err}")
        else:
            violations.append(f"unknown section or key {key!r}")
    if violations:
        raise ConfigError(violations)
    return Config(**kwargs)


def load_config(path: str | Path) -> Config:
    with open(path, "rb") as handle:
        try:
            tree = tomllib.load(handle)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError([f"{path}: {err}"]) from None
    config = config_from_dict(tree)
    validate_config(config)
    return config


def validate_config(config: Config) -> None:
    """Check every field; raise one ConfigError naming all problems."""
    violations: list[str] = []

    def check_source(value: str, where: str) -> None:
        if value not in _SOURCE_TOKENS:
            violations.append(f"{where}: unknown source kind {value!r} (expected one of {_SOURCE_TOKENS})")

    if config.retrieve.k < 1:
        violations.append(f"retrieve.k must be >= 1, got {config.retrieve.k}")
    check_source(config.retrieve.query_source, "retrieve.query_source")
    check_source(config.retrieve.doc_source, "retrieve.doc_source")

    if config.rerank.n < 1:
        violations.append(f"rerank.n must be >= 1, got {config.rerank.n}")
    if config.rerank.strategy not in ("listwise", "pairwise", "lexical"):
        violations.append(f"rerank.strategy must be listwise|pairwise|lexical, got {config.rerank.strategy!r}")
    if config.rerank.passage_tokens < 1:
        violations.append(f"rerank.passage_tokens must be >= 1, got {config.rerank.passage_tokens}")
    if config.rerank.lexical_variant not in ("rouge1", "rougeL"):
        violations.append(f"rerank.lexical_variant must be rouge1|rougeL, got {config.rerank.lexical_variant!r}")
    if config.rerank.pairwise_mode not in ("options", "generate"):
        violations.append(f"rerank.pairwise_mode must be options|generate, got {config.rerank.pairwise_mode!r}")
    check_source(config.rerank.query_source, "rerank.query_source")
    check_source(config.rerank.doc_source, "rerank.doc_source")

    for k in list(config.evaluate.ndcg) + list(config.evaluate.precision):
        if not isinstance(k, int) or k < 1:
            violations.append(f"evaluate cutoffs must be positive integers, got {k!r}")
    if config.evaluate.idcg_pool not in ("corpus", "window"):
        violations.append(f"evaluate.idcg_pool must be corpus|window, got {config.evaluate.idcg_pool!r}")

    if config.backend.kind not in ("mock", "remote"):
        violations.append(f"backend.kind must be mock|remote, got {config.backend.kind!r}")
    if config.backend.max_retries < 1:
        violations.append(f"backend.max_retries must be >= 1, got {config.backend.max_retries}")
    if config.backend.max_concurrency < 1:
        violations.append(f"backend.max_concurrency must be >= 1, got {config.backend.max_concurrency}")
    if config.backend.timeout_s <= 0:
        violations.append(f"backend.timeout_s must be positive, got {config.backend.timeout_s}")
    if config.backend.context_limit_tokens is not None and config.backend.context_limit_tokens < 1:
        violations.append("backend.context_limit_tokens must be >= 1 when set")

    check_source(config.autosum.source, "autosum.source")
    check_source(config.factcheck.hypothesis, "factcheck.hypothesis")
    check_source(config.factcheck.evidence, "factcheck.evidence")
    if config.factcheck.hypothesis == config.factcheck.evidence:
        violations.append("factcheck.hypothesis and factcheck.evidence must differ")
    if config.factcheck.sample < 1:
        violations.append(f"factcheck.sample must be >= 1, got {config.factcheck.sample}")

    if violations:
        raise ConfigError(violations)


def config_to_dict(config: Config) -> dict:
    return asdict(config)


def config_hash(config: Config) -> str:
    """Stable digest of the effective configuration, for provenance manifests."""
    canonical = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
