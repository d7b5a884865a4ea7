from __future__ import annotations

import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from ragmt.chrf import (
    ChrfConfig,
    char_ngrams,
    corpus_chrf,
    f_beta,
    segment_stats,
    sentence_chrf,
    word_ngrams,
    word_tokens,
)

ORACLE = json.loads((FIXTURES / "chrf_oracle.json").read_text(encoding="utf-8"))


def test_char_ngrams():
    assert char_ngrams("abc", 2) == Counter(["ab", "bc"])
    assert char_ngrams("a b", 2) == Counter(["ab"])
    assert char_ngrams("ab", 3) == Counter()
    with pytest.raises(ValueError):
        char_ngrams("abc", 0)


def test_word_ngrams():
    assert word_ngrams("the cat.", 1) == Counter(["the", "cat", "."])
    assert word_ngrams("the cat", 2) == Counter(["the cat"])
    assert word_ngrams("", 1) == Counter()
    assert word_tokens("«Сәлам», дус!") == ["«", "Сәлам", "»", ",", "дус", "!"]


def test_sentence_examples():
    assert sentence_chrf("the cat sat", "the cat sat") == 100.0
    assert sentence_chrf("", "abc") == 0.0
    assert sentence_chrf("abc", "abd", ChrfConfig(char_order=1, word_order=0)) == pytest.approx(200 / 3, abs=1e-9)
    assert sentence_chrf("ab", "ab") == 100.0  # short strings: high orders empty on both sides
    with pytest.raises(ValueError):
        sentence_chrf("abc", "  ")


def test_corpus_examples():
    refs = ["a b c", "Здравствуй, мир"]
    assert corpus_chrf(refs, refs) == 100.0
    assert corpus_chrf(["abc d"], ["abd d"]) == sentence_chrf("abc d", "abd d")
    with pytest.raises(ValueError):
        corpus_chrf(["a"], ["a", "b"])


def test_stats_invariants():
    st_ = segment_stats("the cat sat on the mat", "a cat sat on a hat")
    m, h, r = st_.counts.T
    assert (m <= h).all() and (m <= r).all() and (st_.counts >= 0).all()
    assert st_.counts.shape == (8, 3)


def test_oracle_fixture():
    assert len(ORACLE["pairs"]) == 50
    for pair in ORACLE["pairs"]:
        assert sentence_chrf(pair["hyp"], pair["ref"]) == pytest.approx(pair["sentence_chrf"], abs=0.01)
    hyps = [p["hyp"] for p in ORACLE["pairs"]]
    refs = [p["ref"] for p in ORACLE["pairs"]]
    assert corpus_chrf(hyps, refs) == pytest.approx(ORACLE["corpus_chrf"], abs=0.01)


def test_live_reference_implementation():
    sacrebleu = pytest.importorskip("sacrebleu")
    metric = sacrebleu.metrics.CHRF(word_order=2, eps_smoothing=True)
    # every order has n-grams on at least one side, where both definitions coincide
    cases = [("the cat.", "the cat!"), ("Hello, world", "hello world"), ("абвгд ежз", "абвгд ежи"),
             ("x", "xyz qqwe")]
    for hyp, ref in cases:
        assert sentence_chrf(hyp, ref) == pytest.approx(metric.sentence_score(hyp, [ref]).score, abs=0.01)


def test_orders_empty_on_both_sides_are_skipped():
    # "абвг" has no 5- or 6-grams on either side: 4 char orders + 2 word orders count
    full = sentence_chrf("аб вг", "аб вд")
    s = segment_stats("аб вг", "аб вд")
    assert s.counts[4:6].sum() == 0
    assert full == pytest.approx(100 * sum(f_beta(*row, 2.0) for row in s.counts if row[1] or row[2]) / 6)


def test_f_beta_monotone_in_beta():
    # P = 0.25 < R = 0.5
    values = [f_beta(1, 4, 2, b) for b in (0.5, 1.0, 2.0, 3.0, 10.0)]
    assert values == sorted(values)
    assert f_beta(0, 0, 5, 2.0) == 0.0


text = st.text(st.sampled_from(list("abcабв .,!?")), max_size=30)
nonempty = text.filter(str.strip)


@settings(max_examples=150, deadline=None)
@given(text, nonempty)
def test_range(hyp, ref):
    assert 0.0 <= sentence_chrf(hyp, ref) <= 100.0


@settings(max_examples=150, deadline=None)
@given(nonempty)
def test_identity(x):
    assert sentence_chrf(x, x) == pytest.approx(100.0, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(text, nonempty, st.integers(0, 30), st.integers(0, 30))
def test_whitespace_insensitive_char_part(hyp, ref, i, j):
    cfg = ChrfConfig(word_order=0)
    base = sentence_chrf(hyp, ref, cfg)
    spaced_h = hyp[:i] + "  " + hyp[i:]
    spaced_r = ref[:j] + " \t" + ref[j:]
    assert sentence_chrf(spaced_h, spaced_r, cfg) == pytest.approx(base, abs=1e-12)
