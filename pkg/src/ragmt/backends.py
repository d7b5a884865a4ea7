"""OpenAI-compatible chat-completion and embedding clients.

Requests are plain JSON over HTTP(S).  Every client call goes through the
same gate: a client-side token bucket (optional), a semaphore bounding the
number of requests in flight, and a retry loop with exponential backoff for
transport errors, 429 and 5xx.  Authentication failures are never retried.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import httpx
import numpy as np

from .errors import AuthError, BackendError, ConfigError, EmptyTranslationError, VectorError
from .languages import language_name
from .prompting import render_zero_shot

logger = logging.getLogger(__name__)

# Named temperature presets: greedy decoding, or the provider's own default.
TEMPERATURE_PROFILES = {"greedy": 0.0, "provider_default": 0.7}


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str
    model_name: str
    api_key_env_var: str | None = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    backoff_initial: float = 1.0
    backoff_multiplier: float = 2.0
    backoff_max: float = 60.0
    max_in_flight: int = 4
    request_timeout: float = 120.0
    requests_per_second: float | None = None
    embed_batch_size: int = 64

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.backoff_initial < 0 or self.backoff_multiplier < 1:
            raise ConfigError("backoff needs initial >= 0 and multiplier >= 1")
        if self.embed_batch_size < 1:
            raise ConfigError("embed_batch_size must be >= 1")
        if self.requests_per_second is not None and self.requests_per_second <= 0:
            raise ConfigError("requests_per_second must be positive")

    @classmethod
    def with_profile(cls, profile: str, **kwargs: Any) -> BackendConfig:
        try:
            temperature = TEMPERATURE_PROFILES[profile]
        except KeyError:
            raise ConfigError(f"unknown temperature profile {profile!r}") from None
        return cls(temperature=temperature, **kwargs)

    def backoff_delays(self) -> list[float]:
        return [
            min(self.backoff_max, self.backoff_initial * self.backoff_multiplier**i)
            for i in range(self.max_retries)
        ]


REPLACE_WITH_DASH = "replace_with_dash"
RETRY_GENERATION = "retry_generation"


@dataclass(frozen=True)
class EmptyPolicy:
    mode: str = REPLACE_WITH_DASH
    retry_limit: int = 5

    def __post_init__(self) -> None:
        if self.mode not in (REPLACE_WITH_DASH, RETRY_GENERATION):
            raise ConfigError(f"unknown empty-output policy {self.mode!r}")
        if self.mode == RETRY_GENERATION and self.retry_limit < 1:
            raise ConfigError("retry_limit must be >= 1 for retry_generation")


def apply_empty_policy(output: str, regenerate: Callable[[], str], policy: EmptyPolicy) -> str:
    """Never returns an empty string: dash substitution or regeneration."""
    if output.strip():
        return output
    if policy.mode == REPLACE_WITH_DASH:
        return "-"
    for _ in range(policy.retry_limit):
        out = regenerate().strip()
        if out:
            return out
    raise EmptyTranslationError(policy.retry_limit)


class TokenBucket:
    """Thread-safe client-side rate limiter."""

    def __init__(
        self,
        rate: float,
        capacity: float | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock, self._sleep = clock, sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


@dataclass
class CallStats:
    requests: int = 0
    retries: int = 0
    delays: list[float] = field(default_factory=list)


class OpenAICompatClient:
    """Shareable client for ``/chat/completions`` and ``/embeddings``.

    ``transport`` and ``sleep`` are injectable so tests can script responses
    and observe the backoff schedule without a network or a real clock.
    """

    name = "openai-compat"

    def __init__(
        self,
        config: BackendConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        transcript_path: str | os.PathLike[str] | None = None,
        rate_limiter: TokenBucket | None = None,
    ) -> None:
        self.config = config
        self._key = None
        if config.api_key_env_var:
            self._key = os.environ.get(config.api_key_env_var)
            if not self._key:
                raise ConfigError(f"environment variable {config.api_key_env_var} is not set")
        headers = {"Content-Type": "application/json"}
        if self._key:
            headers["Authorization"] = f"Bearer {self._key}"
        self._http = httpx.Client(
            base_url=config.endpoint_url.rstrip("/"),
            headers=headers,
            timeout=config.request_timeout,
            transport=transport,
        )
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(config.max_in_flight)
        if rate_limiter is None and config.requests_per_second:
            rate_limiter = TokenBucket(config.requests_per_second, sleep=sleep)
        self._bucket = rate_limiter
        self._transcript_lock = threading.Lock()
        self._transcript = open(transcript_path, "a", encoding="utf-8") if transcript_path else None
        self.stats = CallStats()
        self._stats_lock = threading.Lock()

    def close(self) -> None:
        self._http.close()
        if self._transcript:
            self._transcript.close()

    def __enter__(self) -> OpenAICompatClient:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    # ------------------------------------------------------------ transport

    def _log(self, record: dict[str, Any]) -> None:
        if self._transcript is None:
            return
        line = json.dumps(record, ensure_ascii=False)
        if self._key:
            line = line.replace(self._key, "***")
        with self._transcript_lock:
            self._transcript.write(line + "\n")
            self._transcript.flush()

    def post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        """POST with retries; returns the decoded JSON body."""
        delays = self.config.backoff_delays()
        attempts = 0
        status: int | None = None
        while True:
            attempts += 1
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                with self._gate:
                    with self._stats_lock:
                        self.stats.requests += 1
                    resp = self._http.post(path, json=payload)
                status = resp.status_code
                detail = resp.text[:500]
            except httpx.TransportError as exc:
                status, detail = None, f"{type(exc).__name__}: {exc}"
            self._log({"path": path, "request": payload, "status": status, "attempt": attempts,
                       "response": detail if status != 200 else None})
            if status == 200:
                try:
                    return resp.json()
                except ValueError:
                    raise BackendError(f"{path}: response is not JSON", status, attempts) from None
            if status in (401, 403):
                raise AuthError(f"{path}: authentication failed ({status})", status, attempts)
            retryable = status is None or status == 429 or status >= 500
            if not retryable:
                raise BackendError(f"{path}: request rejected ({status}): {detail}", status, attempts)
            if attempts > len(delays):
                raise BackendError(
                    f"{path}: giving up after {attempts} attempts (last status {status}): {detail}",
                    status,
                    attempts,
                )
            delay = delays[attempts - 1]
            with self._stats_lock:
                self.stats.retries += 1
                self.stats.delays.append(delay)
            logger.info("%s: attempt %d failed (%s), retrying in %.2fs", path, attempts, status, delay)
            self._sleep(delay)

    # ------------------------------------------------------------ chat

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        body = self.post("/chat/completions", payload)
        try:
            message = body["choices"][0]["message"]
        except (KeyError, IndexError, TypeError):
            raise BackendError("chat response has no choices[0].message") from None
        # reasoning fields (reasoning, reasoning_content, ...) are ignored
        content = message.get("content") or ""
        if isinstance(content, list):
            content = "".join(part.get("text", "") for part in content if isinstance(part, dict))
        return content.strip()

    def complete_many(self, prompts: Sequence[str]) -> list[str]:
        """Order-preserving fan-out, at most ``max_in_flight`` requests outstanding."""
        with ThreadPoolExecutor(self.config.max_in_flight) as pool:
            return list(pool.map(self.complete, prompts))

    # ------------------------------------------------------------ embeddings

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("no texts to embed")
        size = self.config.embed_batch_size
        batches = [list(texts[i : i + size]) for i in range(0, len(texts), size)]
        with ThreadPoolExecutor(min(self.config.max_in_flight, len(batches))) as pool:
            results = list(pool.map(self._embed_batch, batches))
        out = [v for batch in results for v in batch]
        dims = {v.size for v in out}
        if len(dims) != 1:
            raise VectorError(f"embedding service returned inconsistent dims {sorted(dims)}")
        return out

    def _embed_batch(self, batch: list[str]) -> list[np.ndarray]:
        body = self.post("/embeddings", {"model": self.config.model_name, "input": batch})
        data = body.get("data")
        if not isinstance(data, list) or len(data) != len(batch):
            got = len(data) if isinstance(data, list) else 0
            raise VectorError(f"embedding service returned {got} vectors for {len(batch)} inputs")
        if all(isinstance(d, dict) and "index" in d for d in data):
            data = sorted(data, key=lambda d: d["index"])
        vecs = [np.asarray(d["embedding"], dtype=np.float32) for d in data]
        if len({v.size for v in vecs}) != 1:
            raise VectorError("embedding service returned inconsistent dims within a batch")
        return vecs


def chat_translate(prompt: str, config: BackendConfig, client: OpenAICompatClient | None = None) -> str:
    if client is not None:
        return client.complete(prompt)
    with OpenAICompatClient(config) as own:
        return own.complete(prompt)


def embed(texts: Sequence[str], config: BackendConfig, client: OpenAICompatClient | None = None) -> list[np.ndarray]:
    if client is not None:
        return client.embed(texts)
    with OpenAICompatClient(config) as own:
        return own.embed(texts)


class LLMTranslator:
    """Zero-shot prompting of a chat backend; pluggable into pseudolabeling."""

    def __init__(self, client: OpenAICompatClient, policy: EmptyPolicy | None = None) -> None:
        self.client = client
        self.policy = policy or EmptyPolicy(RETRY_GENERATION, 3)
        self.name = f"llm:{client.config.model_name}"

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        prompt = render_zero_shot(text, language_name(target_lang))
        out = self.client.complete(prompt)
        return apply_empty_policy(out, lambda: self.client.complete(prompt), self.policy)
