from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def random_unit(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def brute_force_top(vectors: np.ndarray, ids: list[str], probe: np.ndarray, top_n: int) -> list[str]:
    """Exact cosine ranking, ties by ascending id; independent of the forest code."""
    v = vectors.astype(np.float64)
    q = probe / np.linalg.norm(probe)
    sims = [float(np.dot(row, q) / np.linalg.norm(row)) for row in v]
    order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
    return [ids[i] for i in order[:top_n]]


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


_EN = "river sun forest wind stone bread water house road field night star snow fire song bird".split()
_TT = "елга кояш урман жил таш икмәк су йорт юл кыр төн йолдыз кар ут җыр кош".split()


def toy_pairs(n: int, seed: int = 0, lang_pair: str = "eng-tat") -> list[dict]:
    """Word-for-word toy parallel corpus: aligned random phrases of 3-7 words."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        idx = rng.integers(0, len(_EN), size=int(rng.integers(3, 8)))
        rows.append({
            "id": f"toy-{i:05d}",
            "source": " ".join(_EN[j] for j in idx) + f" {i}",
            "target": " ".join(_TT[j] for j in idx) + f" {i}",
            "lang_pair": lang_pair,
        })
    return rows


def write_rows(path: Path, rows: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def read_rows(path: Path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
