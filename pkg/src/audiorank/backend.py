"""Text-generation backends: a deterministic mock and a remote HTTP client.

Every LLM-dependent stage (summarization, listwise/pairwise reranking,
fact checking) talks to the two-method Backend interface, so the choice of
model family is configuration, not code. The remote client speaks the
OpenAI-style completion protocol with optional per-token logprobs, which
covers every hosted or self-served model family we care about.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
import uuid
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import httpx


class BackendError(Exception):
    """Base class for backend failures."""


class TransportError(BackendError):
    """Transport-level failure that persisted through all retry attempts."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class ContextTooLong(BackendError):
    """The prompt does not fit the configured context window."""

    def __init__(self, message: str, limit: int, used: int | None = None):
        super().__init__(message)
        self.limit = limit
        self.used = used


class CapabilityUnsupported(BackendError):
    """The backend cannot serve the requested capability (e.g. likelihoods)."""


def estimate_tokens(text: str) -> int:
    """Crude whitespace token count, used only for context-limit guards."""
    return len(text.split())


@dataclass(frozen=True)
class GenRequest:
    """One free-generation request; temperature 0 means greedy decoding."""

    prompt: str
    max_new_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class OptionScoreRequest:
    """Score candidate continuations of a prompt; argmax is the decision."""

    prompt: str
    options: tuple[str, ...]

    def __init__(self, prompt: str, options: Sequence[str]):
        object.__setattr__(self, "prompt", prompt)
        object.__setattr__(self, "options", tuple(options))
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if len(self.options) < 2:
            raise ValueError("need at least two options")
        if any(not opt for opt in self.options):
            raise ValueError("options must be non-empty")
        if len(set(self.options)) != len(self.options):
            raise ValueError("options must be distinct")


class Backend(ABC):
    """Shared interface for text generation and option scoring."""

    name: str = "backend"
    max_concurrency: int = 4

    @abstractmethod
    def generate(self, req: GenRequest) -> str:
        """Return decoded text for the prompt."""

    @abstractmethod
    def score_options(self, req: OptionScoreRequest) -> list[float]:
        """Return one finite log-score per option, aligned with the input order."""


def _stable_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class MockBackend(Backend):
    """Deterministic in-process backend for tests and offline runs.

    Responses are a pure function of the request: scripted tables are
    consulted first (exact prompt match, then the longest scripted key
    contained in the prompt), and unscripted prompts fall back to a stable
    hash-derived reply. Option scores are keyed by option string so that
    permuting the options permutes the scores identically. ``generate_fn``
    and ``score_fn`` override the table lookup wholesale.
    """

    def __init__(
        self,
        responses: Mapping[str, str] | None = None,
        option_scores: Mapping[str, float] | None = None,
        generate_fn: Callable[[str], str] | None = None,
        score_fn: Callable[[str, tuple[str, ...]], Sequence[float]] | None = None,
        context_limit_tokens: int | None = None,
        max_concurrency: int = 8,
    ):
        self.name = "mock"
        self.max_concurrency = max_concurrency
        self.context_limit_tokens = context_limit_tokens
        self._responses = dict(responses or {})
        self._option_scores = dict(option_scores or {})
        self._generate_fn = generate_fn
        self._score_fn = score_fn
        self._lock = threading.Lock()
        self.generate_calls = 0
        self.score_calls = 0

    def _check_context(self, prompt: str) -> None:
        if self.context_limit_tokens is None:
            return
        used = estimate_tokens(prompt)
        if used > self.context_limit_tokens:
            raise ContextTooLong(
                f"prompt is {used} tokens; backend context limit is {self.context_limit_tokens}",
                limit=self.context_limit_tokens,
                used=used,
            )

    def _lookup(self, prompt: str) -> str | None:
        if prompt in self._responses:
            return self._responses[prompt]
        hits = [key for key in self._responses if key in prompt]
        if not hits:
            return None
        # Longest key wins; lexicographic order settles equal lengths.
        best = sorted(hits, key=lambda key: (-len(key), key))[0]
        return self._responses[best]

    def generate(self, req: GenRequest) -> str:
        self._check_context(req.prompt)
        with self._lock:
            self.generate_calls += 1
        if self._generate_fn is not None:
            return self._generate_fn(req.prompt)
        scripted = self._lookup(req.prompt)
        if scripted is not None:
            return scripted
        return f"mock:{_stable_digest(req.prompt)[:12]}"

    def score_options(self, req: OptionScoreRequest) -> list[float]:
        self._check_context(req.prompt)
        with self._lock:
            self.score_calls += 1
        if self._score_fn is not None:
            scores = list(self._score_fn(req.prompt, req.options))
            if len(scores) != len(req.options):
                raise BackendError("score_fn returned a misaligned score list")
            return [float(s) for s in scores]
        out = []
        for option in req.options:
            if option in self._option_scores:
                out.append(float(self._option_scores[option]))
            else:
                # Stable pseudo log-score in [-10, 0).
                digest = _stable_digest(req.prompt + "\x00" + option)
                out.append(-10.0 * int(digest[:12], 16) / 16**12)
        return out


@dataclass
class BackendConfig:
    """Connection and policy settings for a backend."""

    kind: str = "mock"
    base_url: str = "http://localhost:8000/v1"
    model: str = ""
    timeout_s: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4
    context_limit_tokens: int | None = None
    api_key_env: str = "LLM_API_KEY"
    backoff_s: float = 0.5
    script: dict = field(default_factory=dict)


class RemoteCompletionBackend(Backend):
    """Client for an OpenAI-compatible ``/completions`` endpoint.

    Likelihood scoring sends ``prompt + option`` with ``echo`` and
    ``logprobs`` enabled and zero new tokens, then sums the logprobs of the
    tokens that lie inside the option suffix. Transport failures are retried
    with exponential backoff for exactly ``max_retries`` attempts. Requests
    carry a correlation id header; each response is paired to its request by
    that id, never by arrival order.
    """

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self.name = f"remote:{config.model or 'default'}@{config.base_url}"
        self.max_concurrency = config.max_concurrency
        api_key = os.environ.get(config.api_key_env, "")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout_s,
            headers=headers,
            transport=transport,
        )
        self._slots = threading.BoundedSemaphore(max(1, config.max_concurrency))

    def close(self) -> None:
        self._client.close()

    def _check_context(self, prompt: str) -> None:
        limit = self.config.context_limit_tokens
        if limit is None:
            return
        used = estimate_tokens(prompt)
        if used > limit:
            raise ContextTooLong(
                f"prompt is {used} tokens; configured context limit is {limit}",
                limit=limit,
                used=used,
            )

    def _post_completion(self, payload: dict) -> dict:
        attempts = self.config.max_retries
        if attempts < 1:
            raise ValueError(f"max_retries must be >= 1, got {attempts}")
        last_error: Exception | None = None
        for attempt in range(1, attempts + 1):
            try:
                with self._slots:
                    response = self._client.post(
                        "/completions",
                        json=payload,
                        headers={"X-Request-Id": str(uuid.uuid4())},
                    )
            except httpx.TransportError as err:
                last_error = err
                if attempt < attempts:
                    time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
                continue
            if response.status_code >= 500:
                last_error = BackendError(f"server error {response.status_code}: {response.text[:200]}")
                if attempt < attempts:
                    time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
                continue
            if response.status_code >= 400:
                body = response.text
                if "context" in body.lower() and self.config.context_limit_tokens is not None:
                    raise ContextTooLong(
                        f"server rejected prompt as too long: {body[:200]}",
                        limit=self.config.context_limit_tokens,
                    )
                raise BackendError(f"request failed with status {response.status_code}: {body[:200]}")
            return response.json()
        raise TransportError(
            f"request failed after {attempts} attempts: {last_error}", attempts=attempts
        ) from last_error

    def generate(self, req: GenRequest) -> str:
        self._check_context(req.prompt)
        payload = {
            "model": self.config.model,
            "prompt": req.prompt,
            "max_tokens": req.max_new_tokens,
            "temperature": req.temperature,
        }
        body = self._post_completion(payload)
        try:
            return body["choices"][0]["text"]
        except (KeyError, IndexError, TypeError):
            raise BackendError(f"malformed completion response: {body!r}") from None

    def score_options(self, req: OptionScoreRequest) -> list[float]:
        self._check_context(req.prompt)
        scores = []
        for option in req.options:
            payload = {
                "model": self.config.model,
                "prompt": req.prompt + option,
                "max_tokens": 0,
                "echo": True,
                "logprobs": 0,
                "temperature": 0.0,
            }
            body = self._post_completion(payload)
            scores.append(self._option_logprob(body, len(req.prompt)))
        return scores

    @staticmethod
    def _option_logprob(body: dict, prompt_chars: int) -> float:
        try:
            logprobs = body["choices"][0]["logprobs"]
            token_logprobs = logprobs["token_logprobs"]
            offsets = logprobs["text_offset"]
        except (KeyError, IndexError, TypeError):
            raise CapabilityUnsupported(
                "backend response carries no token logprobs; option scoring needs "
                "a completion endpoint with echo+logprobs support"
            ) from None
        total = 0.0
        counted = 0
        for offset, lp in zip(offsets, token_logprobs):
            if offset >= prompt_chars and lp is not None:
                total += float(lp)
                counted += 1
        if counted == 0:
            raise CapabilityUnsupported("no scored tokens fell inside the option suffix")
        return total


def make_backend(config: BackendConfig) -> Backend:
    """Instantiate a backend from configuration."""
    if config.kind == "mock":
        script = config.script or {}
        return MockBackend(
            responses=script.get("responses"),
            option_scores=script.get("option_scores"),
            context_limit_tokens=config.context_limit_tokens,
            max_concurrency=config.max_concurrency,
        )
    if config.kind == "remote":
        return RemoteCompletionBackend(config)
    raise ValueError(f"unknown backend kind {config.kind!r} (expected 'mock' or 'remote')")
