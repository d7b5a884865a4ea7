"""Streaming parallel-corpus stages: ingest, dedup, filters, chunking, pseudolabeling.

Every stage consumes and yields :class:`ParallelPair` records lazily, so a
multi-million-pair corpus never has to sit in memory.  Filters keep survivors
in input order and count what they drop in a :class:`FilterReport`.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import unicodedata
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from .errors import ConfigError, CorpusError
from .languages import LANG_PAIRS, split_pair

logger = logging.getLogger(__name__)

CHUNK_BOUNDS = (50_000, 200_000)


@dataclass
class ParallelPair:
    id: str
    source_text: str
    target_text: str
    lang_pair: str
    attrs: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.source_text.strip():
            raise ValueError(f"record {self.id}: empty source_text")
        if not self.target_text.strip():
            raise ValueError(f"record {self.id}: empty target_text")
        split_pair(self.lang_pair)
        flag = self.attrs.get("only_index1")
        if flag is not None and (isinstance(flag, bool) or flag not in (0, 1)):
            raise ValueError(f"record {self.id}: only_index1 must be 0 or 1, got {flag!r}")

    def to_json(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "id": self.id,
            "source": self.source_text,
            "target": self.target_text,
            "lang_pair": self.lang_pair,
        }
        if self.attrs:
            row["attrs"] = self.attrs
        return row


def normalize_text(text: str, casefold: bool = False) -> str:
    """NFC, trim, collapse internal whitespace runs; optionally casefold."""
    text = " ".join(unicodedata.normalize("NFC", text).split())
    return text.casefold() if casefold else text


# --------------------------------------------------------------------------- ingest


@dataclass
class RecordError:
    line: int
    message: str


@dataclass
class IngestReport:
    path: str
    records: int = 0
    errors: list[RecordError] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "path": self.path,
            "records": self.records,
            "malformed": len(self.errors),
            "errors": [{"line": e.line, "message": e.message} for e in self.errors],
        }


def ingest(
    path: str | os.PathLike[str],
    format: str = "jsonl",
    lang_pair: str | None = None,
    pairs: Iterable[str] | None = LANG_PAIRS,
    report: IngestReport | None = None,
) -> Iterator[ParallelPair]:
    """Stream records from a JSONL or two-column TSV file.

    Malformed records are logged and collected in ``report`` with their line
    number, and the stream carries on.  An unreadable file raises
    :class:`CorpusError` immediately.  ``pairs=None`` accepts any pair tag.
    """
    path = Path(path)
    if format not in ("jsonl", "tsv"):
        raise ConfigError(f"unsupported corpus format {format!r}")
    if format == "tsv" and lang_pair is None:
        raise ConfigError("TSV input needs an explicit lang_pair")
    try:
        fh = path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    if report is None:
        report = IngestReport(str(path))
    allowed = frozenset(pairs) if pairs is not None else None
    parse = _parse_jsonl if format == "jsonl" else _parse_tsv
    return _ingest_stream(fh, path, parse, lang_pair, allowed, report)


def _ingest_stream(fh, path, parse, lang_pair, allowed, report) -> Iterator[ParallelPair]:
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            try:
                pair = parse(line, lineno, path, lang_pair)
                if allowed is not None and pair.lang_pair not in allowed:
                    raise ValueError(f"language pair {pair.lang_pair!r} is not configured")
            except (ValueError, TypeError, KeyError) as exc:
                msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
                logger.warning("%s:%d: malformed record: %s", path, lineno, msg)
                report.errors.append(RecordError(lineno, msg))
                continue
            report.records += 1
            yield pair


def _default_id(path: Path, lineno: int) -> str:
    return f"{path.stem}:{lineno}"


def _parse_jsonl(line: str, lineno: int, path: Path, lang_pair: str | None) -> ParallelPair:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    source, target = obj["source"], obj["target"]
    pair = obj.get("lang_pair", lang_pair)
    if pair is None:
        raise KeyError("lang_pair")
    if not isinstance(source, str) or not isinstance(target, str) or not isinstance(pair, str):
        raise TypeError("source, target and lang_pair must be strings")
    attrs = obj.get("attrs") or {}
    if not isinstance(attrs, dict):
        raise TypeError("attrs must be an object")
    rid = obj.get("id")
    return ParallelPair(
        id=str(rid) if rid is not None else _default_id(path, lineno),
        source_text=source,
        target_text=target,
        lang_pair=pair,
        attrs=dict(attrs),
    )


def _parse_tsv(line: str, lineno: int, path: Path, lang_pair: str | None) -> ParallelPair:
    row = next(csv.reader([line], delimiter="\t", quoting=csv.QUOTE_NONE))
    if len(row) != 2:
        raise ValueError(f"expected 2 tab-separated columns, got {len(row)}")
    return ParallelPair(_default_id(path, lineno), row[0], row[1], lang_pair)


def write_jsonl(pairs: Iterable[ParallelPair], path: str | os.PathLike[str]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_json(), ensure_ascii=False) + "\n")
            n += 1
    return n


# --------------------------------------------------------------------------- filters


@dataclass
class FilterReport:
    rule: str
    input: int = 0
    kept: int = 0

    @property
    def removed(self) -> int:
        return self.input - self.kept

    def to_json(self) -> dict[str, Any]:
        return {"input": self.input, "kept": self.kept, "removed": self.removed, "rule": self.rule}


def _filtered(pairs: Iterable[ParallelPair], keep, report: FilterReport) -> Iterator[ParallelPair]:
    for pair in pairs:
        report.input += 1
        if keep(pair):
            report.kept += 1
            yield pair


def dedup(
    pairs: Iterable[ParallelPair],
    casefold: bool = False,
    report: FilterReport | None = None,
) -> Iterator[ParallelPair]:
    """Keep the first occurrence of each normalized (source, target) pair."""
    seen: set[tuple[str, str]] = set()

    def keep(pair: ParallelPair) -> bool:
        key = (normalize_text(pair.source_text, casefold), normalize_text(pair.target_text, casefold))
        if key in seen:
            return False
        seen.add(key)
        return True

    return _filtered(pairs, keep, report if report is not None else FilterReport("dedup"))


@dataclass(frozen=True)
class TestSetGuard:
    """Normalized source sides of held-out test sets."""

    __test__ = False  # not a pytest class

    entries: frozenset[str]
    casefold: bool = False

    @property
    def normalization(self) -> str:
        return "nfc+ws+casefold" if self.casefold else "nfc+ws"

    @classmethod
    def from_texts(cls, texts: Iterable[str], casefold: bool = False) -> TestSetGuard:
        entries = {normalize_text(t, casefold) for t in texts}
        entries.discard("")
        return cls(frozenset(entries), casefold)

    @classmethod
    def from_files(cls, paths: Iterable[str | os.PathLike[str]], casefold: bool = False) -> TestSetGuard:
        """Plain text (one segment per line) or JSONL with a ``source`` field."""
        return cls.from_texts(_iter_guard_texts(paths), casefold)

    def __contains__(self, text: str) -> bool:
        return normalize_text(text, self.casefold) in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _iter_guard_texts(paths: Iterable[str | os.PathLike[str]]) -> Iterator[str]:
    for p in paths:
        p = Path(p)
        try:
            fh = p.open("r", encoding="utf-8")
        except OSError as exc:
            raise CorpusError(f"cannot read test set {p}: {exc}") from exc
        with fh:
            for line in fh:
                line = line.rstrip("\n")
                if p.suffix == ".jsonl" and line.strip():
                    yield json.loads(line)["source"]
                else:
                    yield line


def filter_contamination(
    pairs: Iterable[ParallelPair], guard: TestSetGuard
) -> tuple[Iterator[ParallelPair], FilterReport]:
    """Drop pairs whose normalized source appears in ``guard``.

    The report is filled in as the returned stream is consumed.
    """
    report = FilterReport("contamination")
    return _filtered(pairs, lambda p: p.source_text not in guard, report), report


def _strip_edge_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def wordlist_tokens(text: str) -> list[str]:
    """Whitespace tokens with Unicode punctuation stripped from both edges, casefolded."""
    tokens = (_strip_edge_punct(t) for t in normalize_text(text, casefold=True).split())
    return [t for t in tokens if t]


def filter_by_wordlist(
    pairs: Iterable[ParallelPair],
    allowed_words: Iterable[str],
    min_word_len: int = 2,
    report: FilterReport | None = None,
) -> Iterator[ParallelPair]:
    """Drop pairs whose target has a token of at least ``min_word_len`` chars not in the word list."""
    allowed = {normalize_text(w, casefold=True) for w in allowed_words}
    allowed.discard("")
    if not allowed:
        raise ConfigError("word list is empty")
    if min_word_len < 1:
        raise ConfigError("min_word_len must be >= 1")

    def keep(pair: ParallelPair) -> bool:
        return all(len(t) < min_word_len or t in allowed for t in wordlist_tokens(pair.target_text))

    return _filtered(pairs, keep, report if report is not None else FilterReport("wordlist"))


def only_index1(pairs: Iterable[ParallelPair], value: int = 1) -> Iterator[ParallelPair]:
    """Select pairs by their ``only_index1`` attribute; unflagged pairs count as 1."""
    for pair in pairs:
        if pair.attrs.get("only_index1", 1) == value:
            yield pair


# --------------------------------------------------------------------------- chunking


@dataclass(frozen=True)
class ChunkPlan:
    chunk_size: int = 100_000
    allow_out_of_bounds: bool = False
    bounds: tuple[int, int] = CHUNK_BOUNDS

    def __post_init__(self) -> None:
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be positive")
        lo, hi = self.bounds
        if not self.allow_out_of_bounds and not lo <= self.chunk_size <= hi:
            raise ConfigError(f"chunk_size {self.chunk_size} outside [{lo}, {hi}]")


def chunk(items: Iterable[Any], plan: ChunkPlan) -> Iterator[list[Any]]:
    buf: list[Any] = []
    for item in items:
        buf.append(item)
        if len(buf) == plan.chunk_size:
            yield buf
            buf = []
    if buf:
        yield buf


# --------------------------------------------------------------------------- pseudolabeling


class Translator(Protocol):
    name: str

    def translate(self, text: str, source_lang: str, target_lang: str) -> str: ...


@dataclass
class PseudolabelReport:
    emitted: int = 0
    failed: list[str] = field(default_factory=list)


def _translate_with_retries(
    translator: Translator, text: str, src: str, tgt: str, max_retries: int
) -> tuple[str, int]:
    last = ""
    for attempt in range(max_retries + 1):
        try:
            out = translator.translate(text, src, tgt).strip()
        except Exception as exc:  # any backend failure is retried, then reported
            last = f"{type(exc).__name__}: {exc}"
            continue
        if out:
            return out, attempt
        last = "empty output"
    raise _HopFailed(last)


class _HopFailed(Exception):
    pass


def pivot_pseudolabel(
    sources: Iterable[str],
    source_lang: str,
    pivot_lang: str,
    target_lang: str,
    translator: Translator,
    plan: ChunkPlan | None = None,
    max_retries: int = 3,
    id_prefix: str | None = None,
    report: PseudolabelReport | None = None,
) -> Iterator[ParallelPair]:
    """Build synthetic pairs ``(s, T(T(s, pivot), target))`` chunk by chunk.

    When ``source_lang == pivot_lang`` only the second hop runs.  Empty or
    failing hops are retried up to ``max_retries`` times; a record that still
    fails is logged and skipped.
    """
    plan = plan or ChunkPlan()
    report = report if report is not None else PseudolabelReport()
    lang_pair = f"{source_lang}-{target_lang}"
    prefix = id_prefix or f"{lang_pair}-pl"
    direct = source_lang == pivot_lang
    offset = 0
    for block in chunk(sources, plan):
        ids = [f"{prefix}-{offset + i:08d}" for i in range(len(block))]
        offset += len(block)
        # one hop at a time over the whole chunk, like a document upload
        pivots: list[str | None] = []
        retries = [0] * len(block)
        for i, text in enumerate(block):
            if not text.strip():
                logger.error("pseudolabel %s skipped: empty source", ids[i])
                pivots.append(None)
                continue
            if direct:
                pivots.append(text)
                continue
            try:
                out, n = _translate_with_retries(translator, text, source_lang, pivot_lang, max_retries)
                pivots.append(out)
                retries[i] += n
            except _HopFailed as exc:
                logger.error("pseudolabel %s failed on pivot hop: %s", ids[i], exc)
                pivots.append(None)
        for i, text in enumerate(block):
            pivot = pivots[i]
            if pivot is None:
                report.failed.append(ids[i])
                continue
            try:
                target, n = _translate_with_retries(translator, pivot, pivot_lang, target_lang, max_retries)
            except _HopFailed as exc:
                logger.error("pseudolabel %s failed on target hop: %s", ids[i], exc)
                report.failed.append(ids[i])
                continue
            retries[i] += n
            attrs: dict[str, Any] = {
                "provenance": "pseudolabel",
                "backend": getattr(translator, "name", type(translator).__name__),
                "retries": retries[i],
            }
            if not direct:
                attrs["pivot_text"] = pivot
            report.emitted += 1
            yield ParallelPair(ids[i], text, target, lang_pair, attrs)
