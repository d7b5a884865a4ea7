from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ragmt.errors import VectorError
from ragmt.vectors import VectorStore, cosine_similarity, load_vectors, normalize


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


def test_load_jsonl_happy(tmp_path):
    f = tmp_path / "v.jsonl"
    write_jsonl(f, [{"id": str(i), "vector": [i, 1, 2, 3]} for i in range(3)])
    store = load_vectors(f, expected_dim=4)
    assert len(store) == 3 and store.dim == 4
    assert store.get("2").tolist() == [2, 1, 2, 3]


def test_load_jsonl_dim_mismatch_names_row(tmp_path):
    f = tmp_path / "v.jsonl"
    write_jsonl(f, [{"id": "a", "vector": [1, 2, 3, 4]}, {"id": "b", "vector": [1, 2, 3]}])
    with pytest.raises(VectorError, match="row 1"):
        load_vectors(f, expected_dim=4)


def test_load_jsonl_nan(tmp_path):
    f = tmp_path / "v.jsonl"
    f.write_text('{"id": "a", "vector": [1, NaN, 0, 0]}\n', encoding="utf-8")
    with pytest.raises(VectorError, match="non-finite"):
        load_vectors(f, expected_dim=4)
    f.write_text('{"id": "a", "vector": [1, "NaN", 0, 0]}\n', encoding="utf-8")
    with pytest.raises(VectorError):
        load_vectors(f, expected_dim=4)


def test_binary_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(3)
    store = VectorStore([f"id-{i}" for i in range(50)], rng.standard_normal((50, 384)))
    f1, f2 = tmp_path / "a.bin", tmp_path / "b.bin"
    store.save(f1)
    back = load_vectors(f1, 384)
    back.save(f2)
    again = load_vectors(f2, 384)
    assert back.ids == store.ids == again.ids
    assert back.vectors.tobytes() == store.vectors.tobytes() == again.vectors.tobytes()
    assert f1.read_bytes() == f2.read_bytes()
    assert f1.read_bytes()[:5] == b"VSTR1"


def test_binary_dim_and_truncation(tmp_path):
    store = VectorStore(["a", "b"], np.ones((2, 8)))
    f = tmp_path / "v.bin"
    store.save(f)
    with pytest.raises(VectorError):
        load_vectors(f, 4)
    f.write_bytes(f.read_bytes()[:-3])
    with pytest.raises(VectorError):
        load_vectors(f, 8)


def test_duplicate_ids_rejected():
    with pytest.raises(VectorError):
        VectorStore(["a", "a"], np.ones((2, 3)))


def test_cosine_examples():
    assert cosine_similarity([1, 0], [1, 0]) == 1.0
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 0], [1, 1]) == pytest.approx(math.sqrt(2) / 2, abs=1e-6)
    with pytest.raises(VectorError):
        cosine_similarity([0, 0], [1, 1])
    with pytest.raises(VectorError):
        cosine_similarity([1, 0], [1, 0, 0])


def test_normalize_examples():
    assert normalize([3, 4]).tolist() == pytest.approx([0.6, 0.8])
    u = normalize([0.6, 0.8])
    assert normalize(u) == pytest.approx(u, abs=1e-6)
    with pytest.raises(VectorError):
        normalize([0, 0])


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec = arrays(np.float64, 16, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


@given(vec)
def test_self_similarity_and_norm(a):
    assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-6)
    n = normalize(a)
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-5)
    assert cosine_similarity(n, a) == pytest.approx(1.0, abs=1e-6)


@given(vec, vec)
def test_scale_invariance_and_symmetry(a, b):
    c = cosine_similarity(a, b)
    assert c == pytest.approx(cosine_similarity(normalize(a), normalize(b)), abs=1e-5)
    assert c == pytest.approx(cosine_similarity(b, a), abs=1e-12)
    assert -1.0 <= c <= 1.0
