"""Fixed-dimension sentence embeddings: loading, storage, cosine similarity.

Vectors are stored as float32; every dot product accumulates in float64.
"""

from __future__ import annotations

import json
import math
import os
import struct
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from .errors import VectorError

DEFAULT_DIM = 384
MAGIC = b"VSTR1"


def as_vector(v: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise VectorError(f"expected a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise VectorError("vector has non-finite components")
    return arr


def norm(v: Sequence[float] | np.ndarray) -> float:
    arr = as_vector(v)
    return math.sqrt(float(np.dot(arr, arr)))


def normalize(v: Sequence[float] | np.ndarray) -> np.ndarray:
    """Unit-L2 copy of ``v`` (float64). Raises on the zero vector."""
    arr = as_vector(v)
    n = math.sqrt(float(np.dot(arr, arr)))
    if n == 0.0:
        raise VectorError("cannot normalize the zero vector")
    return arr / n


def cosine_similarity(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    x, y = as_vector(a), as_vector(b)
    if x.shape != y.shape:
        raise VectorError(f"dimension mismatch: {x.size} vs {y.size}")
    nx, ny = math.sqrt(float(np.dot(x, x))), math.sqrt(float(np.dot(y, y)))
    if nx == 0.0 or ny == 0.0:
        raise VectorError("cosine similarity is undefined for a zero vector")
    sim = float(np.dot(x, y)) / (nx * ny)
    return min(1.0, max(-1.0, sim))


def cosine_distance(a, b) -> float:
    return 1.0 - cosine_similarity(a, b)


class VectorStore:
    """Immutable id-addressed block of ``count x dim`` float32 vectors."""

    def __init__(self, ids: Sequence[str], vectors: np.ndarray | Sequence[Sequence[float]]) -> None:
        block = np.ascontiguousarray(vectors, dtype="<f4")
        if block.ndim != 2:
            raise VectorError(f"vector block must be 2-d, got shape {block.shape}")
        if len(ids) != block.shape[0]:
            raise VectorError(f"{len(ids)} ids for {block.shape[0]} vectors")
        if block.shape[1] == 0:
            raise VectorError("dimension must be positive")
        if not np.all(np.isfinite(block)):
            bad = int(np.flatnonzero(~np.isfinite(block).all(axis=1))[0])
            raise VectorError(f"row {bad} has non-finite components")
        self.ids: tuple[str, ...] = tuple(str(i) for i in ids)
        self._pos = {rid: i for i, rid in enumerate(self.ids)}
        if len(self._pos) != len(self.ids):
            raise VectorError("duplicate ids in vector store")
        block.setflags(write=False)
        self.vectors = block

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, rid: str) -> bool:
        return rid in self._pos

    def position(self, rid: str) -> int:
        try:
            return self._pos[rid]
        except KeyError:
            raise KeyError(f"id {rid!r} not in vector store") from None

    def get(self, rid: str) -> np.ndarray:
        return self.vectors[self.position(rid)]

    # ------------------------------------------------------------ serialization

    def save(self, path: str | os.PathLike[str]) -> None:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQ", self.dim, len(self)))
            for rid in self.ids:
                raw = rid.encode("utf-8")
                if b"\x00" in raw:
                    raise VectorError(f"id {rid!r} contains NUL")
                fh.write(raw + b"\x00")
            fh.write(self.vectors.tobytes(order="C"))

    def save_jsonl(self, path: str | os.PathLike[str]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rid, row in zip(self.ids, self.vectors):
                fh.write(json.dumps({"id": rid, "vector": [float(x) for x in row]}) + "\n")


def _load_binary(path: Path, expected_dim: int | None) -> VectorStore:
    data = path.read_bytes()
    header = len(MAGIC) + 12
    if len(data) < header:
        raise VectorError(f"{path}: truncated header")
    dim, count = struct.unpack_from("<IQ", data, len(MAGIC))
    if expected_dim is not None and dim != expected_dim:
        raise VectorError(f"{path}: file dim {dim}, expected {expected_dim}")
    ids: list[str] = []
    pos = header
    for _ in range(count):
        end = data.find(b"\x00", pos)
        if end < 0:
            raise VectorError(f"{path}: truncated id table")
        ids.append(data[pos:end].decode("utf-8"))
        pos = end + 1
    need = count * dim * 4
    if len(data) - pos != need:
        raise VectorError(f"{path}: expected {need} bytes of vectors, found {len(data) - pos}")
    block = np.frombuffer(data, dtype="<f4", count=count * dim, offset=pos).reshape(count, dim)
    return VectorStore(ids, block)


def _load_jsonl(path: Path, expected_dim: int | None) -> VectorStore:
    ids: list[str] = []
    rows: list[list[float]] = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = len(rows)
            try:
                obj = json.loads(line)  # json accepts NaN/Infinity literals; rejected below
                rid, vec = str(obj["id"]), [float(x) for x in obj["vector"]]
            except (ValueError, KeyError, TypeError) as exc:
                raise VectorError(f"{path}: row {row}: malformed record ({exc})") from None
            if expected_dim is not None and len(vec) != expected_dim:
                raise VectorError(f"{path}: row {row} has dim {len(vec)}, expected {expected_dim}")
            if rows and len(vec) != len(rows[0]):
                raise VectorError(f"{path}: row {row} has dim {len(vec)}, expected {len(rows[0])}")
            if not all(math.isfinite(x) for x in vec):
                raise VectorError(f"{path}: row {row} has non-finite components")
            ids.append(rid)
            rows.append(vec)
    if not rows:
        return VectorStore([], np.zeros((0, expected_dim or DEFAULT_DIM), dtype=np.float32))
    return VectorStore(ids, np.asarray(rows, dtype=np.float32))


def load_vectors(path: str | os.PathLike[str], expected_dim: int | None = DEFAULT_DIM) -> VectorStore:
    """Load a binary ``VSTR1`` file or JSONL ``{"id", "vector"}`` rows."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            head = fh.read(len(MAGIC))
    except OSError as exc:
        raise VectorError(f"cannot read vectors {path}: {exc}") from exc
    if head == MAGIC:
        return _load_binary(path, expected_dim)
    return _load_jsonl(path, expected_dim)


def stack_store(items: Iterable[tuple[str, Sequence[float]]]) -> VectorStore:
    ids, rows = [], []
    for rid, vec in items:
        ids.append(rid)
        rows.append(vec)
    return VectorStore(ids, np.asarray(rows, dtype=np.float32))
