"""Deterministic offline stand-ins for remote services.

``ScriptedService`` is an ``httpx`` transport that replays a fixed schedule
of responses and records how many requests were in flight at once.  The
other classes back the CLI's ``--mock`` mode.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import httpx
import numpy as np


def chat_body(content: str, reasoning: str | None = None) -> dict[str, Any]:
    message: dict[str, Any] = {"role": "assistant", "content": content}
    if reasoning is not None:
        message["reasoning_content"] = reasoning
    return {"choices": [{"index": 0, "message": message, "finish_reason": "stop"}]}


@dataclass
class Step:
    """One scripted reply: an HTTP status with a JSON body, or a transport failure."""

    status: int = 200
    body: Any = None
    transport_error: bool = False
    delay: float = 0.0


class ScriptedService(httpx.BaseTransport):
    """Replays ``steps`` in order; ``fallback`` builds replies once the script runs out."""

    def __init__(
        self,
        steps: Iterable[Step] = (),
        fallback: Callable[[dict[str, Any]], Step] | None = None,
    ) -> None:
        self.steps = list(steps)
        self.fallback = fallback
        self.requests: list[dict[str, Any]] = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content or b"{}")
        with self._lock:
            self.requests.append({"path": request.url.path, "json": payload, "headers": dict(request.headers)})
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            step = self.steps.pop(0) if self.steps else None
        try:
            if step is None:
                if self.fallback is None:
                    raise AssertionError("scripted service ran out of steps")
                step = self.fallback(payload)
            if step.delay:
                time.sleep(step.delay)
            if step.transport_error:
                raise httpx.ConnectError("scripted connection failure", request=request)
            return httpx.Response(step.status, json=step.body if step.body is not None else {}, request=request)
        finally:
            with self._lock:
                self.in_flight -= 1


class MockTranslator:
    """Appends ``|<target_lang>`` to its input; optionally replays a schedule first."""

    name = "mock-translator"

    def __init__(self, schedule: Sequence[str | Exception] = ()) -> None:
        self.schedule = list(schedule)
        self.calls = 0

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        self.calls += 1
        if self.schedule:
            item = self.schedule.pop(0)
            if isinstance(item, Exception):
                raise item
            if item is not None:
                return item
        return f"{text}|{target_lang}"


_QUERY_RE = re.compile(r"Phrase to translate: (.*?) \n\n", re.S)
_EXAMPLE_RE = re.compile(r"^ (.*?)->(.*)$", re.M)


class EchoChatModel:
    """Answers with the target side of the first in-context example, or echoes the query.

    Returns an empty string for queries containing ``empty_marker``, so the
    empty-output policies can be exercised end to end.
    """

    name = "mock-chat"

    def __init__(self, empty_marker: str | None = None) -> None:
        self.empty_marker = empty_marker
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        m = _QUERY_RE.search(prompt)
        query = m.group(1) if m else prompt
        if self.empty_marker and self.empty_marker in query:
            return ""
        block = prompt[m.end():] if m else ""
        ex = _EXAMPLE_RE.search(block)
        return (ex.group(2) if ex else query).strip()


@dataclass
class HashEmbedder:
    """Character n-gram feature hashing into a dense unit vector.

    Deterministic across processes; texts sharing many n-grams land close
    under cosine, which is all retrieval tests need.
    """

    dim: int = 384
    orders: tuple[int, ...] = (2, 3, 4)
    name: str = field(default="hash-embedder", init=False)

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        padded = f" {' '.join(text.casefold().split())} "
        for n in self.orders:
            for i in range(len(padded) - n + 1):
                digest = hashlib.blake2b(padded[i : i + n].encode("utf-8"), digest_size=8).digest()
                h = int.from_bytes(digest, "little")
                vec[h % self.dim] += 1.0 if (h >> 63) & 1 else -1.0
        n = np.linalg.norm(vec)
        if n == 0:
            vec[0] = 1.0
            n = 1.0
        return (vec / n).astype(np.float32)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed_one(t) for t in texts]
