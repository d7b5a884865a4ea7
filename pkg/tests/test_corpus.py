from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ragmt.corpus import (
    ChunkPlan,
    FilterReport,
    IngestReport,
    ParallelPair,
    PseudolabelReport,
    TestSetGuard,
    chunk,
    dedup,
    filter_by_wordlist,
    filter_contamination,
    ingest,
    normalize_text,
    only_index1,
    pivot_pseudolabel,
    write_jsonl,
)
from ragmt.errors import ConfigError, CorpusError
from ragmt.mock import MockTranslator


def pp(src: str, tgt: str, i: int = 0, pair: str = "eng-tat", **attrs) -> ParallelPair:
    return ParallelPair(f"r{i}", src, tgt, pair, attrs)


def texts(pairs):
    return [(p.source_text, p.target_text) for p in pairs]


# ---------------------------------------------------------------- records


def test_pair_rejects_blank_sides():
    with pytest.raises(ValueError):
        pp("  ", "x")
    with pytest.raises(ValueError):
        pp("x", "\t")


def test_pair_only_index1_domain():
    pp("a", "b", only_index1=0)
    pp("a", "b", only_index1=1)
    with pytest.raises(ValueError):
        pp("a", "b", only_index1=2)


# ---------------------------------------------------------------- ingest


def test_ingest_jsonl(tmp_path):
    f = tmp_path / "c.jsonl"
    f.write_text(json.dumps({"source": "Hello", "target": "Salam", "lang_pair": "eng-tat"}) + "\n", encoding="utf-8")
    (pair,) = list(ingest(f, "jsonl"))
    assert (pair.source_text, pair.target_text, pair.lang_pair) == ("Hello", "Salam", "eng-tat")
    assert pair.id == "c:1"


def test_ingest_tsv(tmp_path):
    f = tmp_path / "c.tsv"
    f.write_text("Hello\tSalam\n", encoding="utf-8")
    (pair,) = list(ingest(f, "tsv", lang_pair="eng-tat"))
    assert (pair.source_text, pair.target_text, pair.lang_pair) == ("Hello", "Salam", "eng-tat")


def test_ingest_reports_malformed_and_continues(tmp_path):
    f = tmp_path / "c.jsonl"
    lines = [
        {"id": "a", "source": "one", "target": "бер", "lang_pair": "eng-tat"},
        {"id": "b", "source": "two", "lang_pair": "eng-tat"},
        "not json",
        {"id": "c", "source": "three", "target": "өч", "lang_pair": "xxx-yyy"},
        {"id": "d", "source": "four", "target": "дүрт", "lang_pair": "eng-tat", "attrs": {"only_index1": 0}},
    ]
    f.write_text("\n".join(l if isinstance(l, str) else json.dumps(l, ensure_ascii=False) for l in lines) + "\n",
                 encoding="utf-8")
    report = IngestReport(str(f))
    out = list(ingest(f, "jsonl", report=report))
    assert [p.id for p in out] == ["a", "d"]
    assert [e.line for e in report.errors] == [2, 3, 4]
    assert "target" in report.errors[0].message
    assert report.records == 2
    assert out[1].attrs == {"only_index1": 0}


def test_ingest_unreadable_is_fatal(tmp_path):
    with pytest.raises(CorpusError):
        ingest(tmp_path / "missing.jsonl")


def test_ingest_tsv_needs_lang_pair(tmp_path):
    f = tmp_path / "c.tsv"
    f.write_text("a\tb\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        ingest(f, "tsv")


def test_write_then_ingest_roundtrip(tmp_path):
    pairs = [pp("a", "b", 1, only_index1=1), pp("c", "d", 2)]
    f = tmp_path / "o.jsonl"
    write_jsonl(pairs, f)
    back = list(ingest(f))
    assert [(p.id, p.source_text, p.target_text, p.attrs) for p in back] == [
        ("r1", "a", "b", {"only_index1": 1}),
        ("r2", "c", "d", {}),
    ]


# ---------------------------------------------------------------- normalization & dedup


def test_normalize_text():
    assert normalize_text("  a \t b\n") == "a b"
    # NFD e + combining acute -> NFC é
    assert normalize_text("é") == "é"
    assert normalize_text("Hello World", casefold=True) == "hello world"


def test_dedup_examples():
    assert texts(dedup([pp("a", "b"), pp("a", "b")])) == [("a", "b")]
    assert texts(dedup([pp("a", "b"), pp("a", "c")])) == [("a", "b"), ("a", "c")]
    assert texts(dedup([pp(" a ", "b"), pp("a", "b")])) == [(" a ", "b")]


def test_dedup_report_counts():
    rep = FilterReport("dedup")
    list(dedup([pp("a", "b"), pp("a", "b"), pp("c", "d")], report=rep))
    assert rep.to_json() == {"input": 3, "kept": 2, "removed": 1, "rule": "dedup"}


# ---------------------------------------------------------------- contamination


def test_contamination_examples():
    guard = TestSetGuard.from_texts(["Hello world"])
    out, rep = filter_contamination([pp("Hello world", "x", 1), pp("Hello", "y", 2)], guard)
    assert [p.id for p in out] == ["r2"]
    assert rep.removed == 1


def test_contamination_casefold_opt_in():
    # "Hello World" casefolds to "hello world", which is the guard entry
    strict = TestSetGuard.from_texts(["hello world"])
    folded = TestSetGuard.from_texts(["hello world"], casefold=True)
    assert "Hello World" not in strict
    assert "Hello World" in folded
    out, rep = filter_contamination([pp("Hello World", "x")], folded)
    assert list(out) == [] and rep.removed == 1


def test_guard_from_files(tmp_path):
    t1 = tmp_path / "test.txt"
    t1.write_text("Hello  world\nBye\n", encoding="utf-8")
    t2 = tmp_path / "test.jsonl"
    t2.write_text(json.dumps({"source": "Привет"}, ensure_ascii=False) + "\n", encoding="utf-8")
    guard = TestSetGuard.from_files([t1, t2])
    assert guard.entries == {"Hello world", "Bye", "Привет"}


# ---------------------------------------------------------------- word list


def test_wordlist_examples():
    allowed = {"сәлам"}
    assert texts(filter_by_wordlist([pp("x", "сәлам")], allowed)) == [("x", "сәлам")]
    assert texts(filter_by_wordlist([pp("x", "сәлам привет")], allowed)) == []
    assert texts(filter_by_wordlist([pp("x", "сәлам и")], allowed, min_word_len=2)) == [("x", "сәлам и")]


def test_wordlist_strips_edge_punctuation():
    assert len(list(filter_by_wordlist([pp("x", "«Сәлам», сәлам!")], {"сәлам"}))) == 1


def test_wordlist_empty_is_config_error():
    with pytest.raises(ConfigError):
        filter_by_wordlist([], [])


def test_only_index1_selection():
    pairs = [pp("a", "b", 1, only_index1=1), pp("c", "d", 2, only_index1=0), pp("e", "f", 3)]
    assert [p.id for p in only_index1(pairs)] == ["r1", "r3"]
    assert [p.id for p in only_index1(pairs, 0)] == ["r2"]


# ---------------------------------------------------------------- filter properties

short_text = st.text(alphabet="ab ", min_size=1, max_size=4).filter(lambda s: s.strip())


@settings(max_examples=100)
@given(st.lists(st.tuples(short_text, short_text), max_size=30), st.lists(short_text, max_size=5))
def test_filters_idempotent_and_order_preserving(rows, guard_texts):
    pairs = [pp(s, t, i) for i, (s, t) in enumerate(rows)]
    guard = TestSetGuard.from_texts(guard_texts)

    once, _ = filter_contamination(pairs, guard)
    once = list(once)
    twice, _ = filter_contamination(once, guard)
    assert [p.id for p in twice] == [p.id for p in once]
    ids = [p.id for p in pairs]
    assert [p.id for p in once] == [i for i in ids if i in {p.id for p in once}]
    assert not {normalize_text(p.source_text) for p in once} & guard.entries

    d1 = list(dedup(pairs))
    assert [p.id for p in dedup(d1)] == [p.id for p in d1]
    assert [p.id for p in d1] == sorted((p.id for p in d1), key=ids.index)

    w1 = list(filter_by_wordlist(pairs, {"a", "ab"}))
    assert [p.id for p in filter_by_wordlist(w1, {"a", "ab"})] == [p.id for p in w1]


# ---------------------------------------------------------------- chunking


def test_chunk_sizes():
    plan = ChunkPlan(100_000)
    sizes = [len(c) for c in chunk(range(250_000), plan)]
    assert sizes == [100_000, 100_000, 50_000]
    assert [len(c) for c in chunk(range(10), plan)] == [10]


def test_chunk_bounds():
    with pytest.raises(ConfigError):
        ChunkPlan(1_000)
    with pytest.raises(ConfigError):
        ChunkPlan(200_001)
    ChunkPlan(50_000)
    ChunkPlan(200_000)
    ChunkPlan(1_000, allow_out_of_bounds=True)


@given(st.integers(0, 200), st.integers(1, 17))
def test_chunk_reassembly(n, size):
    items = list(range(n))
    chunks = list(chunk(items, ChunkPlan(size, allow_out_of_bounds=True)))
    assert [x for c in chunks for x in c] == items
    assert all(len(c) == size for c in chunks[:-1])


# ---------------------------------------------------------------- pseudolabel

SMALL = ChunkPlan(2, allow_out_of_bounds=True)


def test_pseudolabel_two_hops():
    (pair,) = pivot_pseudolabel(["hi"], "en", "ru", "ba", MockTranslator(), SMALL)
    assert (pair.source_text, pair.target_text) == ("hi", "hi|ru|ba")
    assert pair.attrs["pivot_text"] == "hi|ru"
    assert pair.attrs["backend"] == "mock-translator"
    assert pair.lang_pair == "en-ba"


def test_pseudolabel_direct_mode():
    (pair,) = pivot_pseudolabel(["привет"], "ru", "ru", "ba", MockTranslator(), SMALL)
    assert pair.target_text == "привет|ba"
    assert "pivot_text" not in pair.attrs


def test_pseudolabel_empty_twice_then_success():
    tr = MockTranslator(["", "", None])
    (pair,) = pivot_pseudolabel(["привет"], "ru", "ru", "ba", tr, SMALL, max_retries=3)
    assert pair.target_text == "привет|ba"
    assert pair.attrs["retries"] == 2
    assert tr.calls == 3


def test_pseudolabel_failure_is_skipped_and_logged(caplog):
    tr = MockTranslator(["", "", "", ""])
    report = PseudolabelReport()
    out = list(pivot_pseudolabel(["a", "b"], "ru", "ru", "ba", tr, SMALL, max_retries=3, report=report))
    assert [p.source_text for p in out] == ["b"]
    assert report.failed == ["ru-ba-pl-00000000"]
    assert "ru-ba-pl-00000000" in caplog.text


def test_pseudolabel_chunking_preserves_order():
    srcs = [f"s{i}" for i in range(7)]
    out = list(pivot_pseudolabel(srcs, "en", "ru", "kk", MockTranslator(), ChunkPlan(3, allow_out_of_bounds=True)))
    assert [p.source_text for p in out] == srcs
    assert len({p.id for p in out}) == 7


def test_pseudolabel_empty_source_counts_as_failed():
    report = PseudolabelReport()
    out = list(pivot_pseudolabel(["a", "  ", "b"], "rus", "eng", "tat", MockTranslator(),
                                 ChunkPlan(1000, allow_out_of_bounds=True), report=report))
    assert [p.source_text for p in out] == ["a", "b"]
    assert report.failed == ["rus-tat-pl-00000001"]
