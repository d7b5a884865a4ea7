"""``ragmt`` command line: one subcommand per pipeline stage.

Every setting can come from a JSON config file (``--config``) or a flag; the
flag wins.  Settings are validated before any work or network call.  Exit
codes: 0 success, 1 partial failure (some records or rows failed), 2 fatal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .ann import IndexConfig, QueryParams, build, load
from .backends import (
    REPLACE_WITH_DASH,
    RETRY_GENERATION,
    BackendConfig,
    EmptyPolicy,
    LLMTranslator,
    OpenAICompatClient,
)
from .chrf import ChrfConfig, corpus_chrf, sentence_chrf
from .corpus import (
    ChunkPlan,
    FilterReport,
    IngestReport,
    PseudolabelReport,
    TestSetGuard,
    dedup,
    filter_by_wordlist,
    filter_contamination,
    ingest,
    only_index1,
    pivot_pseudolabel,
    write_jsonl,
)
from .errors import ConfigError, RagmtError
from .languages import language_name, split_pair
from .mock import EchoChatModel, HashEmbedder, MockTranslator
from .pipeline import (
    Checkpoint,
    Retriever,
    TranslateSettings,
    config_hash,
    load_corpus_map,
    read_queries,
    run_translate,
    write_manifest,
)
from .prompting import Budget, PromptConfig
from .stacking import Candidate, CandidateSet, select_by_embedding, select_by_external_score, text_key
from .vectors import VectorStore, load_vectors

logger = logging.getLogger("ragmt")

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2
_MISSING = object()


class Settings:
    """Flag-over-config lookup that remembers every resolved value."""

    def __init__(self, args: argparse.Namespace, config: dict[str, Any]) -> None:
        self.args = args
        self.config = config
        self.resolved: dict[str, Any] = {}

    def get(self, key: str, default: Any = _MISSING) -> Any:
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config
            for part in key.split("."):
                if not isinstance(value, dict) or part not in value:
                    value = None
                    break
                value = value[part]
        if value is None:
            if default is _MISSING:
                flag = "--" + key.split(".")[-1].replace("_", "-")
                raise ConfigError(f"missing required setting {key!r} (flag {flag} or config file)")
            value = default
        self.resolved[key] = value
        return value


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _emit(obj: Any) -> None:
    print(json.dumps(obj, ensure_ascii=False, sort_keys=True))


def _need_file(path: str, what: str) -> str:
    if not Path(path).is_file():
        raise ConfigError(f"{what} {path} does not exist")
    return path


def _backend_config(s: Settings, section: str) -> BackendConfig:
    fields = dict(
        endpoint_url=s.get(f"{section}.endpoint_url"),
        model_name=s.get(f"{section}.model_name"),
        api_key_env_var=s.get(f"{section}.api_key_env_var", "OPENAI_API_KEY"),
        max_retries=int(s.get(f"{section}.max_retries", 3)),
        backoff_initial=float(s.get(f"{section}.backoff_initial", 1.0)),
        backoff_multiplier=float(s.get(f"{section}.backoff_multiplier", 2.0)),
        max_in_flight=int(s.get(f"{section}.max_in_flight", 4)),
        request_timeout=float(s.get(f"{section}.request_timeout", 120.0)),
        requests_per_second=s.get(f"{section}.requests_per_second", None),
        embed_batch_size=int(s.get(f"{section}.batch_size", 64)),
    )
    profile = s.get(f"{section}.temperature_profile", None)
    if profile is not None:
        return BackendConfig.with_profile(profile, **fields)
    return BackendConfig(temperature=float(s.get(f"{section}.temperature", 0.0)), **fields)


def _embedder(s: Settings, dim: int):
    if s.get("mock", False) or s.get("embedding.mock", False):
        return HashEmbedder(dim)
    return OpenAICompatClient(_backend_config(s, "embedding"))


def _store_from_texts(ids: Sequence[str], texts: Sequence[str], embedder, dim: int) -> VectorStore:
    vecs = embedder.embed(list(texts))
    store = VectorStore(list(ids), np.asarray(vecs, dtype=np.float32))
    if store.dim != dim:
        raise ConfigError(f"embedder produced dim {store.dim}, configured dim is {dim}")
    return store


# --------------------------------------------------------------------------- corpus commands


def cmd_ingest(args: argparse.Namespace, s: Settings) -> int:
    inputs = s.get("corpus.inputs")
    if isinstance(inputs, str):
        inputs = [inputs]
    fmt = s.get("corpus.format", "jsonl")
    lang_pair = s.get("lang_pair", None)
    output = s.get("output")
    for p in inputs:
        _need_file(p, "input")
    reports = [IngestReport(str(p)) for p in inputs]
    streams = [ingest(p, fmt, lang_pair=lang_pair, report=r) for p, r in zip(inputs, reports)]
    n = write_jsonl((pair for st in streams for pair in st), output)
    summary = {"written": n, "inputs": [r.to_json() for r in reports]}
    _emit(summary)
    report_path = s.get("report", None)
    if report_path:
        Path(report_path).write_text(json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    write_manifest(output, "ingest", s.resolved, inputs, [output])
    return EXIT_PARTIAL if any(r.errors for r in reports) else EXIT_OK


def cmd_filter(args: argparse.Namespace, s: Settings) -> int:
    source = _need_file(s.get("input"), "input")
    output = s.get("output")
    test_sets = s.get("corpus.test_sets", [])
    casefold = bool(s.get("corpus.casefold", False))
    do_dedup = bool(s.get("corpus.dedup", False))
    wordlist_path = s.get("corpus.wordlist", None)
    min_word_len = int(s.get("corpus.min_word_len", 2))
    subset = s.get("corpus.only_index1", None)
    for p in test_sets:
        _need_file(p, "test set")
    words = None
    if wordlist_path:
        words = Path(_need_file(wordlist_path, "word list")).read_text(encoding="utf-8").split()
        if not words:
            raise ConfigError(f"word list {wordlist_path} is empty")

    ingest_report = IngestReport(source)
    stream = ingest(source, "jsonl", pairs=None, report=ingest_report)
    reports: list[FilterReport] = []
    if subset is not None:
        stream = only_index1(stream, int(subset))
    if do_dedup:
        reports.append(FilterReport("dedup"))
        stream = dedup(stream, casefold=casefold, report=reports[-1])
    if test_sets:
        guard = TestSetGuard.from_files(test_sets, casefold=casefold)
        stream, rep = filter_contamination(stream, guard)
        reports.append(rep)
    if words is not None:
        reports.append(FilterReport("wordlist"))
        stream = filter_by_wordlist(stream, words, min_word_len, report=reports[-1])
    write_jsonl(stream, output)
    summary = [r.to_json() for r in reports]
    _emit(summary)
    report_path = s.get("report", None)
    if report_path:
        Path(report_path).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    write_manifest(output, "filter", s.resolved, [source, *test_sets, *([wordlist_path] if wordlist_path else [])], [output])
    return EXIT_PARTIAL if ingest_report.errors else EXIT_OK


def cmd_pseudolabel(args: argparse.Namespace, s: Settings) -> int:
    source = _need_file(s.get("input"), "input")
    output = s.get("output")
    src_lang = s.get("source_lang")
    pivot = s.get("pivot_lang")
    tgt_lang = s.get("target_lang")
    plan = ChunkPlan(int(s.get("corpus.chunk_size", 100_000)), bool(s.get("allow_small_chunks", False)))
    max_retries = int(s.get("corpus.max_retries", 3))
    if s.get("mock", False):
        translator = MockTranslator()
        client = None
    else:
        client = OpenAICompatClient(_backend_config(s, "backend"))
        translator = LLMTranslator(client)
    texts = [t for _, t in read_queries(source)]
    report = PseudolabelReport()
    try:
        write_jsonl(
            pivot_pseudolabel(texts, src_lang, pivot, tgt_lang, translator, plan, max_retries, report=report),
            output,
        )
    finally:
        if client is not None:
            client.close()
    _emit({"emitted": report.emitted, "failed": report.failed})
    write_manifest(output, "pseudolabel", s.resolved, [source], [output])
    return EXIT_PARTIAL if report.failed else EXIT_OK


# --------------------------------------------------------------------------- index commands


def cmd_embed(args: argparse.Namespace, s: Settings) -> int:
    corpus = _need_file(s.get("corpus.path"), "corpus")
    output = s.get("output")
    dim = int(s.get("index.dim", 384))
    side = s.get("field", "source")
    embedder = _embedder(s, dim)
    pairs = list(load_corpus_map(corpus).values())
    texts = [p.source_text if side == "source" else p.target_text for p in pairs]
    store = _store_from_texts([p.id for p in pairs], texts, embedder, dim)
    store.save(output)
    _emit({"vectors": len(store), "dim": store.dim})
    write_manifest(output, "embed", s.resolved, [corpus], [output])
    return EXIT_OK


def _index_config(s: Settings) -> IndexConfig:
    return IndexConfig(
        dim=int(s.get("index.dim", 384)),
        n_trees=int(s.get("index.n_trees", 100)),
        leaf_capacity=int(s.get("index.leaf_capacity", 128)),
        seed=int(s.get("seed", 0)),
    )


def cmd_index_build(args: argparse.Namespace, s: Settings) -> int:
    corpus_path = _need_file(s.get("corpus.path"), "corpus")
    output = s.get("index.path")
    config = _index_config(s)
    vectors_path = s.get("vectors", None)
    corpus = load_corpus_map(corpus_path)
    if vectors_path:
        store = load_vectors(_need_file(vectors_path, "vectors file"), config.dim)
        for rid in store.ids:
            if rid not in corpus:
                raise ConfigError(f"vector id {rid!r} has no record in {corpus_path}")
    else:
        embedder = _embedder(s, config.dim)
        pairs = list(corpus.values())
        store = _store_from_texts([p.id for p in pairs], [p.source_text for p in pairs], embedder, config.dim)
    forest = build(store, config)
    forest.save(output)
    _emit({"items": forest.item_count, "trees": config.n_trees, "nodes": forest.node_count})
    write_manifest(output, "index-build", s.resolved, [corpus_path, *([vectors_path] if vectors_path else [])], [output])
    return EXIT_OK


def _query_vectors(s: Settings, queries: list[tuple[str, str]], dim: int) -> dict[str, np.ndarray]:
    path = s.get("query_vectors", None)
    if path:
        store = load_vectors(_need_file(path, "query vectors"), dim)
        missing = [qid for qid, _ in queries if qid not in store]
        if missing:
            raise ConfigError(f"query id {missing[0]!r} has no vector in {path}")
        return {qid: store.get(qid) for qid, _ in queries}
    embedder = _embedder(s, dim)
    vecs = embedder.embed([t for _, t in queries]) if queries else []
    for v in vecs:
        if v.size != dim:
            raise ConfigError(f"query embedding dim {v.size} does not match index dim {dim}")
    return {qid: v for (qid, _), v in zip(queries, vecs)}


def cmd_index_query(args: argparse.Namespace, s: Settings) -> int:
    index_path = _need_file(s.get("index.path"), "index")
    corpus_path = _need_file(s.get("corpus.path"), "corpus")
    output = s.get("output")
    text = s.get("text", None)
    queries_path = None if text else _need_file(s.get("queries"), "queries file")
    top_n = int(s.get("prompt.top_n", 10))
    forest = load(index_path)
    search_k = s.get("index.search_k", None)
    params = QueryParams.for_forest(top_n, forest.config.n_trees, None if search_k is None else int(search_k))
    s.resolved["index.search_k"] = params.search_k
    queries = [("q1", text)] if text else read_queries(queries_path)
    vectors = _query_vectors(s, queries, forest.config.dim)
    retriever = Retriever(forest, load_corpus_map(corpus_path), None, params)
    with open(output, "w", encoding="utf-8") as fh:
        for qid, _ in queries:
            for rank, (pair, sim) in enumerate(retriever.neighbours(vectors[qid]), start=1):
                row = {"query_id": qid, "rank": rank, "id": pair.id, "similarity": round(sim, 6),
                       "src": pair.source_text, "tgt": pair.target_text}
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    logger.info("search_k = %d", params.search_k)
    write_manifest(output, "index-query", s.resolved, [index_path, corpus_path, *([queries_path] if queries_path else [])], [output])
    return EXIT_OK


# --------------------------------------------------------------------------- translate


def _prompt_config(s: Settings, mode: str, lang: str) -> PromptConfig:
    limit = s.get("prompt.budget_limit", None)
    return PromptConfig(
        target_lang_name=lang,
        mode=mode,
        top_n=int(s.get("prompt.top_n", 1000)),
        budget=Budget(s.get("prompt.budget_unit", "characters"), None if limit is None else int(limit)),
        chars_per_token=float(s.get("prompt.chars_per_token", 4.0)),
    )


def _empty_policy(s: Settings) -> EmptyPolicy:
    mode = s.get("empty_policy.mode", REPLACE_WITH_DASH)
    aliases = {"dash": REPLACE_WITH_DASH, "retry": RETRY_GENERATION}
    return EmptyPolicy(aliases.get(mode, mode), int(s.get("empty_policy.retry_limit", 5)))


def cmd_translate(args: argparse.Namespace, s: Settings) -> int:
    source = _need_file(s.get("input"), "input")
    output = Path(s.get("output"))
    mode = s.get("prompt.mode", "few_shot")
    lang_pair = s.get("lang_pair")
    _, tgt = split_pair(lang_pair)
    prompt = _prompt_config(s, mode, language_name(tgt))
    policy = _empty_policy(s)
    mock = bool(s.get("mock", False))
    dump = s.get("dump_prompts", None)
    backend = None if mock else _backend_config(s, "backend")
    inputs = [source]
    if mode == "few_shot":
        index_path = _need_file(s.get("index.path"), "index")
        corpus_path = _need_file(s.get("corpus.path"), "corpus")
        search_k = s.get("index.search_k", None)
        inputs += [index_path, corpus_path]

    queries = read_queries(source)
    retriever = None
    vectors = None
    if mode == "few_shot":
        forest = load(index_path)
        params = QueryParams.for_forest(max(1, prompt.top_n), forest.config.n_trees,
                                        None if search_k is None else int(search_k))
        s.resolved["index.search_k"] = params.search_k
        retriever = Retriever(forest, load_corpus_map(corpus_path), None, params)
        vectors = _query_vectors(s, queries, forest.config.dim)
    if backend is None:
        model = EchoChatModel(s.get("mock_empty_marker", None))
        workers = int(s.get("backend.max_in_flight", 1))
        client = None
    else:
        client = OpenAICompatClient(backend)
        model, workers = client, backend.max_in_flight
    try:
        settings = TranslateSettings(prompt, policy, workers, dump_prompts=Path(dump) if dump else None)
        if settings.dump_prompts:
            settings.dump_prompts.mkdir(parents=True, exist_ok=True)
        ckpt_hash = config_hash({k: v for k, v in s.resolved.items() if k != "output"})
        checkpoint = Checkpoint(Path(f"{output}.ckpt.jsonl"), ckpt_hash)
        try:
            rows = run_translate(queries, model, settings, retriever, vectors, checkpoint)
        finally:
            checkpoint.close()
    finally:
        if client is not None:
            client.close()
    with output.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    failed = sum(r["status"] != "ok" for r in rows)
    _emit({"rows": len(rows), "failed": failed})
    write_manifest(output, "translate", s.resolved, inputs, [output])
    return EXIT_PARTIAL if failed else EXIT_OK


# --------------------------------------------------------------------------- stack / evaluate


def _read_lines(path: str) -> list[str]:
    with open(_need_file(path, "input"), "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _read_segments(path: str, fields: Sequence[str]) -> list[str]:
    if not path.endswith(".jsonl"):
        return _read_lines(path)
    out = []
    for i, line in enumerate(_read_lines(path)):
        if not line.strip():
            continue
        obj = json.loads(line)
        for f in fields:
            if f in obj:
                out.append(obj[f] if obj[f] is not None else "")
                break
        else:
            raise ConfigError(f"{path}: line {i + 1} has none of the fields {list(fields)}")
    return out


def _stack_inputs(s: Settings) -> list[dict[str, Any]]:
    path = s.get("input", None)
    if path:
        return [json.loads(line) for line in _read_lines(path) if line.strip()]
    sources = _read_lines(s.get("source"))
    systems = s.get("systems")
    columns = []
    for spec in systems:
        name, sep, sys_path = spec.partition("=")
        if not sep:
            raise ConfigError(f"--system expects NAME=PATH, got {spec!r}")
        columns.append((name, _read_lines(sys_path)))
    for name, lines in columns:
        if len(lines) != len(sources):
            raise ConfigError(f"system {name!r} has {len(lines)} lines, source has {len(sources)}")
    return [
        {"source": src, "candidates": [{"system": name, "text": lines[i]} for name, lines in columns]}
        for i, src in enumerate(sources)
    ]


def cmd_stack(args: argparse.Namespace, s: Settings) -> int:
    records = _stack_inputs(s)
    output = s.get("output")
    by = s.get("by", "embedding")
    direction = s.get("direction", "minimize")
    dim = int(s.get("index.dim", 384))
    out_rows = []
    if by == "score":
        for rec in records:
            cands = rec["candidates"]
            win = select_by_external_score([float(c["score"]) for c in cands], direction)
            out_rows.append({**rec, "winner": cands[win]["system"], "translation": cands[win]["text"]})
    elif by == "embedding":
        vectors_path = s.get("vectors", None)
        texts = sorted({t for rec in records for t in [rec["source"]] + [c["text"] for c in rec["candidates"]]})
        if vectors_path:
            store = load_vectors(_need_file(vectors_path, "vectors file"), dim)
            lookup = {t: store.get(text_key(t)) for t in texts}
        else:
            embedder = _embedder(s, dim)
            lookup = dict(zip(texts, embedder.embed(texts))) if texts else {}
        for rec in records:
            cands = rec["candidates"]
            cset = CandidateSet(
                rec["source"],
                lookup[rec["source"]],
                tuple(Candidate(c["system"], c["text"], lookup[c["text"]]) for c in cands),
            )
            win, sims = select_by_embedding(cset)
            out_rows.append({
                **rec,
                "winner": cands[win]["system"],
                "translation": cands[win]["text"],
                "similarities": {c["system"]: round(sim, 6) for c, sim in zip(cands, sims)},
            })
    else:
        raise ConfigError(f"--by must be 'embedding' or 'score', got {by!r}")
    with open(output, "w", encoding="utf-8") as fh:
        for row in out_rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    _emit({"sentences": len(out_rows)})
    write_manifest(output, "stack", s.resolved, [p for p in [s.resolved.get("input"), s.resolved.get("source")] if p], [output])
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, s: Settings) -> int:
    hyp_path, ref_path = s.get("hyp"), s.get("ref")
    config = ChrfConfig(
        char_order=int(s.get("chrf.char_order", 6)),
        word_order=int(s.get("chrf.word_order", 2)),
        beta=float(s.get("chrf.beta", 2.0)),
        lowercase=bool(s.get("chrf.lowercase", False)),
    )
    hyps = _read_segments(hyp_path, ("translation", "hyp", "text"))
    refs = _read_segments(ref_path, ("target", "ref", "text"))
    if len(hyps) != len(refs):
        raise ConfigError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    result: dict[str, Any] = {
        "chrf++": round(corpus_chrf(hyps, refs, config), 2),
        "segments": len(hyps),
        "config": config.to_json(),
    }
    if s.get("sentences", False):
        result["sentence_scores"] = [round(sentence_chrf(h, r, config), 2) for h, r in zip(hyps, refs)]
    output = s.get("output", None)
    text = json.dumps(result, ensure_ascii=False, sort_keys=True)
    print(text)
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
        write_manifest(output, "evaluate", s.resolved, [hyp_path, ref_path], [output])
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ragmt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ragmt {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", dest="seed", type=int)
    common.add_argument("--mock", dest="mock", action="store_const", const=True,
                        help="offline deterministic backends, no network")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    def backend_flags(sp: argparse.ArgumentParser, section: str) -> None:
        pre = "" if section == "backend" else f"{section}-"
        sp.add_argument(f"--{pre}endpoint-url", dest=f"{section}.endpoint_url")
        sp.add_argument(f"--{pre}model", dest=f"{section}.model_name")
        sp.add_argument(f"--{pre}api-key-env", dest=f"{section}.api_key_env_var")
        if section == "backend":
            sp.add_argument("--temperature", dest="backend.temperature", type=float)
            sp.add_argument("--temperature-profile", dest="backend.temperature_profile",
                            choices=["greedy", "provider_default"])
        sp.add_argument(f"--{pre}max-retries", dest=f"{section}.max_retries", type=int)
        sp.add_argument(f"--{pre}max-in-flight", dest=f"{section}.max_in_flight", type=int)

    sp = add("ingest", cmd_ingest, "read JSONL/TSV corpora into normalized JSONL")
    sp.add_argument("--input", dest="corpus.inputs", action="append")
    sp.add_argument("--format", dest="corpus.format", choices=["jsonl", "tsv"])
    sp.add_argument("--lang-pair", dest="lang_pair")
    sp.add_argument("--output", dest="output")
    sp.add_argument("--report", dest="report")

    sp = add("filter", cmd_filter, "dedup, contamination and word-list filtering")
    sp.add_argument("--input", dest="input")
    sp.add_argument("--output", dest="output")
    sp.add_argument("--test-set", dest="corpus.test_sets", action="append")
    sp.add_argument("--casefold", dest="corpus.casefold", action="store_const", const=True)
    sp.add_argument("--dedup", dest="corpus.dedup", action="store_const", const=True)
    sp.add_argument("--wordlist", dest="corpus.wordlist")
    sp.add_argument("--min-word-len", dest="corpus.min_word_len", type=int)
    sp.add_argument("--only-index1", dest="corpus.only_index1", type=int, choices=[0, 1])
    sp.add_argument("--report", dest="report")

    sp = add("pseudolabel", cmd_pseudolabel, "synthesize targets by pivot translation")
    sp.add_argument("--input", dest="input")
    sp.add_argument("--output", dest="output")
    sp.add_argument("--source-lang", dest="source_lang")
    sp.add_argument("--pivot-lang", dest="pivot_lang")
    sp.add_argument("--target-lang", dest="target_lang")
    sp.add_argument("--chunk-size", dest="corpus.chunk_size", type=int)
    sp.add_argument("--allow-small-chunks", dest="allow_small_chunks", action="store_const", const=True)
    backend_flags(sp, "backend")

    sp = add("embed", cmd_embed, "embed one side of a corpus into a vector file")
    sp.add_argument("--corpus", dest="corpus.path")
    sp.add_argument("--field", dest="field", choices=["source", "target"])
    sp.add_argument("--dim", dest="index.dim", type=int)
    sp.add_argument("--output", dest="output")
    backend_flags(sp, "embedding")

    sp = add("index-build", cmd_index_build, "build the ANN forest over source sentences")
    sp.add_argument("--corpus", dest="corpus.path")
    sp.add_argument("--vectors", dest="vectors")
    sp.add_argument("--output", dest="index.path")
    sp.add_argument("--dim", dest="index.dim", type=int)
    sp.add_argument("--n-trees", dest="index.n_trees", type=int)
    sp.add_argument("--leaf-capacity", dest="index.leaf_capacity", type=int)
    backend_flags(sp, "embedding")

    sp = add("index-query", cmd_index_query, "nearest corpus pairs for queries")
    sp.add_argument("--index", dest="index.path")
    sp.add_argument("--corpus", dest="corpus.path")
    sp.add_argument("--queries", dest="queries")
    sp.add_argument("--text", dest="text")
    sp.add_argument("--query-vectors", dest="query_vectors")
    sp.add_argument("--top-n", dest="prompt.top_n", type=int)
    sp.add_argument("--search-k", dest="index.search_k", type=int)
    sp.add_argument("--output", dest="output")
    backend_flags(sp, "embedding")

    sp = add("translate", cmd_translate, "prompt an LLM, zero-shot or with retrieved examples")
    sp.add_argument("--input", dest="input")
    sp.add_argument("--output", dest="output")
    sp.add_argument("--mode", dest="prompt.mode", choices=["zero_shot", "few_shot"])
    sp.add_argument("--lang-pair", dest="lang_pair")
    sp.add_argument("--index", dest="index.path")
    sp.add_argument("--corpus", dest="corpus.path")
    sp.add_argument("--query-vectors", dest="query_vectors")
    sp.add_argument("--top-n", dest="prompt.top_n", type=int)
    sp.add_argument("--search-k", dest="index.search_k", type=int)
    sp.add_argument("--budget-unit", dest="prompt.budget_unit", choices=["characters", "tokens"])
    sp.add_argument("--budget-limit", dest="prompt.budget_limit", type=int)
    sp.add_argument("--chars-per-token", dest="prompt.chars_per_token", type=float)
    sp.add_argument("--empty-policy", dest="empty_policy.mode",
                    choices=["dash", "retry", REPLACE_WITH_DASH, RETRY_GENERATION])
    sp.add_argument("--retry-limit", dest="empty_policy.retry_limit", type=int)
    sp.add_argument("--mock-empty-marker", dest="mock_empty_marker",
                    help="in --mock mode, queries containing this string get an empty completion")
    sp.add_argument("--dump-prompts", dest="dump_prompts", help="directory for rendered prompts")
    backend_flags(sp, "backend")
    sp.add_argument("--embedding-endpoint-url", dest="embedding.endpoint_url")
    sp.add_argument("--embedding-model", dest="embedding.model_name")

    sp = add("stack", cmd_stack, "choose one candidate translation per sentence")
    sp.add_argument("--input", dest="input", help="JSONL {source, candidates:[{system, text}]}")
    sp.add_argument("--source", dest="source", help="aligned source lines (with --system)")
    sp.add_argument("--system", dest="systems", action="append", metavar="NAME=PATH")
    sp.add_argument("--by", dest="by", choices=["embedding", "score"])
    sp.add_argument("--direction", dest="direction", choices=["maximize", "minimize"])
    sp.add_argument("--vectors", dest="vectors", help="vector store keyed by sha256 of text")
    sp.add_argument("--dim", dest="index.dim", type=int)
    sp.add_argument("--output", dest="output")
    backend_flags(sp, "embedding")

    sp = add("evaluate", cmd_evaluate, "corpus chrF++ of hypotheses against references")
    sp.add_argument("--hyp", dest="hyp")
    sp.add_argument("--ref", dest="ref")
    sp.add_argument("--char-order", dest="chrf.char_order", type=int)
    sp.add_argument("--word-order", dest="chrf.word_order", type=int)
    sp.add_argument("--beta", dest="chrf.beta", type=float)
    sp.add_argument("--lowercase", dest="chrf.lowercase", action="store_const", const=True)
    sp.add_argument("--sentences", dest="sentences", action="store_const", const=True)
    sp.add_argument("--output", dest="output")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        settings = Settings(args, _load_config(args.config))
        return args.func(args, settings)
    except (RagmtError, ValueError, KeyError, OSError) as exc:
        print(f"ragmt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
