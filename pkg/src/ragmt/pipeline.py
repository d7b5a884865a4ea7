"""End-to-end pieces shared by the CLI: retrieval, translation runs, manifests."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol

import numpy as np

from . import __version__
from .ann import AnnForest, QueryParams
from .backends import EmptyPolicy, apply_empty_policy
from .corpus import ParallelPair, ingest
from .errors import BackendError, BudgetError, CorpusError, EmptyTranslationError
from .prompting import PromptConfig, RetrievedExample, TokenCounter, assemble

logger = logging.getLogger(__name__)


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class ChatModel(Protocol):
    def complete(self, prompt: str) -> str: ...


def load_corpus_map(path: str | os.PathLike[str]) -> dict[str, ParallelPair]:
    out: dict[str, ParallelPair] = {}
    for pair in ingest(path, "jsonl", pairs=None):
        if pair.id in out:
            raise CorpusError(f"{path}: duplicate record id {pair.id!r}")
        out[pair.id] = pair
    return out


def read_queries(path: str | os.PathLike[str]) -> list[tuple[str, str]]:
    """``(id, text)`` pairs from JSONL (``id`` + ``source``) or plain lines."""
    path = Path(path)
    rows: list[tuple[str, str]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if path.suffix == ".jsonl":
                obj = json.loads(line)
                rows.append((str(obj.get("id", lineno)), obj["source"]))
            else:
                rows.append((str(lineno), line))
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise CorpusError(f"{path}: duplicate query ids")
    return rows


class Retriever:
    """Nearest source-side neighbours of a query, joined back to their pairs."""

    def __init__(
        self,
        forest: AnnForest,
        corpus: dict[str, ParallelPair],
        embedder: Embedder | None,
        params: QueryParams,
    ) -> None:
        self.forest = forest
        self.corpus = corpus
        self.embedder = embedder
        self.params = params

    def neighbours(self, vector: np.ndarray) -> list[tuple[ParallelPair, float]]:
        out = []
        for rid, sim in self.forest.query(vector, self.params):
            pair = self.corpus.get(rid)
            if pair is None:
                raise CorpusError(f"index item {rid!r} is missing from the corpus")
            out.append((pair, sim))
        return out

    def examples(self, vector: np.ndarray) -> list[RetrievedExample]:
        return [
            RetrievedExample(p.source_text, p.target_text, sim, rank)
            for rank, (p, sim) in enumerate(self.neighbours(vector), start=1)
        ]

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if self.embedder is None:
            raise CorpusError("no embedding source configured for queries")
        return self.embedder.embed(texts)


# --------------------------------------------------------------------------- translation runs


@dataclass
class TranslateSettings:
    prompt: PromptConfig
    policy: EmptyPolicy
    workers: int = 1
    counter: TokenCounter | None = None
    dump_prompts: Path | None = None


def translate_one(
    qid: str,
    text: str,
    vector: np.ndarray | None,
    retriever: Retriever | None,
    model: ChatModel,
    settings: TranslateSettings,
) -> dict[str, Any]:
    examples = retriever.examples(vector) if retriever is not None and vector is not None else []
    try:
        spec = assemble(text, examples, settings.prompt, settings.counter)
    except BudgetError as exc:
        logger.error("prompt for %s does not fit: %s", qid, exc)
        return {"id": qid, "source": text, "prompt_chars": None, "examples_used": 0,
                "translation": None, "status": "failed", "error": str(exc)}
    if settings.dump_prompts is not None:
        (settings.dump_prompts / f"{_safe_name(qid)}.txt").write_text(spec.text, encoding="utf-8")
    row: dict[str, Any] = {
        "id": qid,
        "source": text,
        "prompt_chars": spec.chars,
        "examples_used": spec.examples_used,
    }
    try:
        out = model.complete(spec.text)
        row["translation"] = apply_empty_policy(out, lambda: model.complete(spec.text), settings.policy)
        row["status"] = "ok"
    except (BackendError, EmptyTranslationError) as exc:
        logger.error("translation of %s failed: %s", qid, exc)
        row["translation"] = None
        row["status"] = "failed"
        row["error"] = str(exc)
    return row


def _safe_name(qid: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in qid)


class Checkpoint:
    """Append-only JSONL of finished rows, tagged with the run's config hash."""

    def __init__(self, path: Path, config_hash: str) -> None:
        self.path = path
        self.config_hash = config_hash
        self.rows: dict[str, dict[str, Any]] = {}
        if path.exists():
            self._load()
        if not self.rows:
            with path.open("w", encoding="utf-8") as fh:
                fh.write(json.dumps({"config_hash": config_hash}) + "\n")
        self._fh = path.open("a", encoding="utf-8")

    def _load(self) -> None:
        with self.path.open("r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or json.loads(lines[0]).get("config_hash") != self.config_hash:
            logger.warning("checkpoint %s belongs to a different configuration; starting over", self.path)
            return
        for line in lines[1:]:
            try:
                row = json.loads(line)
            except json.JSONDecodeError:
                break  # torn final write from an interrupted run
            self.rows[row["id"]] = row

    def add(self, row: dict[str, Any]) -> None:
        self.rows[row["id"]] = row
        self._fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def run_translate(
    queries: Sequence[tuple[str, str]],
    model: ChatModel,
    settings: TranslateSettings,
    retriever: Retriever | None,
    vectors: dict[str, np.ndarray] | None,
    checkpoint: Checkpoint | None = None,
    on_row: Callable[[dict[str, Any]], None] | None = None,
) -> list[dict[str, Any]]:
    """Translate every query, skipping ids already in ``checkpoint``; rows in input order."""
    done = checkpoint.rows if checkpoint is not None else {}
    todo = [(qid, text) for qid, text in queries if qid not in done]
    if done:
        logger.info("resuming: %d of %d rows already complete", len(queries) - len(todo), len(queries))

    def work(item: tuple[str, str]) -> dict[str, Any]:
        qid, text = item
        vec = vectors.get(qid) if vectors is not None else None
        return translate_one(qid, text, vec, retriever, model, settings)

    fresh: dict[str, dict[str, Any]] = {}
    with ThreadPoolExecutor(max(1, settings.workers)) as pool:
        for row in pool.map(work, todo):
            fresh[row["id"]] = row
            if checkpoint is not None and row["status"] == "ok":
                checkpoint.add(row)
            if on_row is not None:
                on_row(row)
    return [done.get(qid) or fresh[qid] for qid, _ in queries]


# --------------------------------------------------------------------------- manifests


def file_digest(path: str | os.PathLike[str]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(settings: dict[str, Any]) -> str:
    canon = json.dumps(settings, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(
    output: str | os.PathLike[str],
    command: str,
    settings: dict[str, Any],
    inputs: Iterable[str | os.PathLike[str]],
    outputs: Iterable[str | os.PathLike[str]],
) -> Path:
    """``<output>.manifest.json`` with settings, their hash, and input/output digests."""
    manifest = {
        "tool": "ragmt",
        "version": __version__,
        "command": command,
        "config_hash": config_hash(settings),
        "settings": settings,
        "inputs": [{"path": str(p), "sha256": file_digest(p)} for p in inputs if Path(p).is_file()],
        "outputs": [{"path": str(p), "sha256": file_digest(p)} for p in outputs if Path(p).is_file()],
    }
    path = Path(f"{output}.manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path
