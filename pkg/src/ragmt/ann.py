"""ANNOY-style forest of random-hyperplane trees under the angular metric.

Each tree recursively splits its items with a hyperplane through the
midpoint of two sampled (normalized) items until a node holds at most
``leaf_capacity`` items.  A query runs one best-first traversal over all
trees at once, keyed by the smallest hyperplane margin seen on the path, for
``search_k`` node inspections, and then re-ranks the pooled items by exact
cosine similarity.
"""

from __future__ import annotations

import heapq
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AnnIndexError
from .vectors import VectorStore, as_vector

MAGIC = b"ANNF1"
VERSION = 1
_METRICS = {"angular": 0}
_SPLIT_ATTEMPTS = 3


def default_search_k(n_trees: int, top_n: int) -> int:
    if n_trees < 1 or top_n < 1:
        raise ValueError("n_trees and top_n must be >= 1")
    return 2 * n_trees * top_n


@dataclass(frozen=True)
class IndexConfig:
    dim: int = 384
    n_trees: int = 100
    metric: str = "angular"
    leaf_capacity: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise AnnIndexError("dim must be positive")
        if self.n_trees < 1:
            raise AnnIndexError("n_trees must be >= 1")
        if self.leaf_capacity < 2:
            raise AnnIndexError("leaf_capacity must be >= 2")
        if self.metric not in _METRICS:
            raise AnnIndexError(f"unsupported metric {self.metric!r}")
        if not 0 <= self.seed < 2**64:
            raise AnnIndexError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class QueryParams:
    top_n: int
    search_k: int

    def __post_init__(self) -> None:
        if self.top_n < 1:
            raise AnnIndexError("top_n must be >= 1")
        if self.search_k < self.top_n:
            raise AnnIndexError(f"search_k ({self.search_k}) must be >= top_n ({self.top_n})")

    @classmethod
    def for_forest(cls, top_n: int, n_trees: int, search_k: int | None = None) -> QueryParams:
        return cls(top_n, default_search_k(n_trees, top_n) if search_k is None else search_k)


# --------------------------------------------------------------------------- build


class _TreeParts:
    __slots__ = ("normals", "offsets", "children", "leaves", "root")

    def __init__(self) -> None:
        self.normals: list[np.ndarray] = []
        self.offsets: list[float] = []
        self.children: list[list[int]] = []
        self.leaves: list[np.ndarray] = []
        self.root = 0


def _leaf_code(j: int) -> int:
    return -(j + 1)


def _split(X: np.ndarray, idx: np.ndarray, rng: np.random.Generator):
    """Return (normal, offset, right_mask) for the items ``idx``."""
    m = len(idx)
    min_side = 2 if m >= 4 else 1
    sub = X[idx].astype(np.float64)
    for _ in range(_SPLIT_ATTEMPTS):
        a, b = rng.choice(m, size=2, replace=False)
        diff = sub[a] - sub[b]
        length = math.sqrt(float(np.dot(diff, diff)))
        if length < 1e-6:
            continue
        normal = diff / length
        offset = float(np.dot(normal, (sub[a] + sub[b]) * 0.5))
        right = sub @ normal - offset > 0
        k = int(right.sum())
        if min(k, m - k) >= min_side:
            return normal, offset, right
    # random direction through the median projection
    normal = rng.standard_normal(X.shape[1])
    normal /= math.sqrt(float(np.dot(normal, normal)))
    proj = sub @ normal
    order = np.argsort(proj, kind="stable")
    half = m // 2
    offset = float(proj[order[half - 1]] + proj[order[half]]) * 0.5
    right = proj - offset > 0
    k = int(right.sum())
    if min(k, m - k) < min_side:
        # coincident points: any balanced assignment is as good as another
        right = np.zeros(m, dtype=bool)
        right[order[half:]] = True
    return normal, offset, right


def _build_tree(X: np.ndarray, leaf_capacity: int, seed: int) -> _TreeParts:
    rng = np.random.default_rng(seed)
    parts = _TreeParts()
    # (items, parent inner index, side) with side 0 = left, 1 = right
    stack: list[tuple[np.ndarray, int, int]] = [(np.arange(X.shape[0], dtype=np.int64), -1, 0)]
    while stack:
        idx, parent, side = stack.pop()
        if len(idx) <= leaf_capacity:
            parts.leaves.append(idx.astype(np.uint32))
            code = _leaf_code(len(parts.leaves) - 1)
        else:
            normal, offset, right = _split(X, idx, rng)
            code = len(parts.normals)
            parts.normals.append(normal)
            parts.offsets.append(offset)
            parts.children.append([0, 0])
            stack.append((idx[right], code, 1))
            stack.append((idx[~right], code, 0))
        if parent < 0:
            parts.root = code
        else:
            parts.children[parent][side] = code
    return parts


def build(store: VectorStore, config: IndexConfig, workers: int = 1) -> AnnForest:
    """Build a forest over ``store``; tree ``i`` is seeded with ``config.seed + i``."""
    if len(store) == 0:
        raise AnnIndexError("cannot build an index over an empty store")
    if store.dim != config.dim:
        raise AnnIndexError(f"store dim {store.dim} does not match config dim {config.dim}")
    X = store.vectors.astype(np.float64)
    norms = np.sqrt((X * X).sum(axis=1))
    if np.any(norms == 0):
        raise AnnIndexError(f"zero vector at row {int(np.flatnonzero(norms == 0)[0])}")
    X = (X / norms[:, None]).astype(np.float32)

    seeds = [(config.seed + i) % 2**64 for i in range(config.n_trees)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trees = list(pool.map(lambda s: _build_tree(X, config.leaf_capacity, s), seeds))
    else:
        trees = [_build_tree(X, config.leaf_capacity, s) for s in seeds]

    normals, offsets, children, leaves, roots = [], [], [], [], []
    base_inner = base_leaf = 0

    def remap(code: int) -> int:
        return code + base_inner if code >= 0 else _leaf_code(-code - 1 + base_leaf)

    for t in trees:
        normals.extend(t.normals)
        offsets.extend(t.offsets)
        children.extend([remap(l), remap(r)] for l, r in t.children)
        leaves.extend(t.leaves)
        roots.append(remap(t.root))
        base_inner += len(t.normals)
        base_leaf += len(t.leaves)

    sizes = np.array([len(leaf) for leaf in leaves], dtype=np.uint64)
    leaf_offsets = np.zeros(len(leaves) + 1, dtype=np.uint64)
    np.cumsum(sizes, out=leaf_offsets[1:])
    return AnnForest(
        config=config,
        ids=store.ids,
        vectors=X,
        normals=np.asarray(normals, dtype=np.float32).reshape(len(normals), config.dim),
        offsets=np.asarray(offsets, dtype=np.float32),
        children=np.asarray(children, dtype=np.int64).reshape(len(children), 2),
        leaf_offsets=leaf_offsets,
        leaf_items=np.concatenate(leaves).astype(np.uint32),
        roots=np.asarray(roots, dtype=np.int64),
    )


# --------------------------------------------------------------------------- forest


class AnnForest:
    """Immutable forest; safe for concurrent queries."""

    def __init__(
        self,
        config: IndexConfig,
        ids,
        vectors: np.ndarray,
        normals: np.ndarray,
        offsets: np.ndarray,
        children: np.ndarray,
        leaf_offsets: np.ndarray,
        leaf_items: np.ndarray,
        roots: np.ndarray,
    ) -> None:
        self.config = config
        self.ids = tuple(ids)
        self.vectors = vectors
        self.normals = normals
        self.offsets = offsets
        self.children = children
        self.leaf_offsets = leaf_offsets
        self.leaf_items = leaf_items
        self.roots = roots
        v64 = vectors.astype(np.float64)
        self._norms = np.sqrt((v64 * v64).sum(axis=1))
        self._id_rank = np.empty(len(self.ids), dtype=np.int64)
        self._id_rank[sorted(range(len(self.ids)), key=self.ids.__getitem__)] = np.arange(len(self.ids))
        # python-level copies keep the traversal loop free of numpy scalars
        self._children = children.tolist()
        self._offsets = offsets.astype(np.float64).tolist()
        self._leaf_bounds = leaf_offsets.astype(np.int64).tolist()
        for arr in (vectors, normals, offsets, children, leaf_offsets, leaf_items, roots):
            arr.setflags(write=False)

    @property
    def item_count(self) -> int:
        return len(self.ids)

    @property
    def node_count(self) -> int:
        return len(self.normals) + len(self.leaf_offsets) - 1

    def tree_leaves(self, tree: int) -> list[np.ndarray]:
        """Item-position lists of every leaf reachable from one root."""
        out, stack = [], [int(self.roots[tree])]
        while stack:
            code = stack.pop()
            if code < 0:
                j = -code - 1
                out.append(self.leaf_items[self._leaf_bounds[j] : self._leaf_bounds[j + 1]])
            else:
                stack.extend(self._children[code])
        return out

    def candidates(self, probe: np.ndarray, search_k: int) -> np.ndarray:
        """Sorted unique item positions gathered within ``search_k`` node inspections."""
        q = self._prepare_probe(probe)
        normals, offsets, children, bounds = self.normals, self._offsets, self._children, self._leaf_bounds
        heap = [(-math.inf, int(r)) for r in self.roots]
        heapq.heapify(heap)
        pooled: list[np.ndarray] = []
        visited = 0
        while heap and visited < search_k:
            neg, code = heapq.heappop(heap)
            visited += 1
            if code < 0:
                j = -code - 1
                pooled.append(self.leaf_items[bounds[j] : bounds[j + 1]])
                continue
            margin = float(np.dot(normals[code], q)) - offsets[code]
            prio = -neg
            left, right = children[code]
            heapq.heappush(heap, (-min(prio, margin), right))
            heapq.heappush(heap, (-min(prio, -margin), left))
        if not pooled:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(pooled)).astype(np.int64)

    def query(self, probe, params: QueryParams) -> list[tuple[str, float]]:
        """Top ``params.top_n`` (id, cosine) pairs, best first, ties by ascending id."""
        q = self._prepare_probe(probe)
        cand = self.candidates(q, params.search_k)
        if len(cand) == 0:
            return []
        sims = (self.vectors[cand].astype(np.float64) @ q) / self._norms[cand]
        np.clip(sims, -1.0, 1.0, out=sims)
        order = np.lexsort((self._id_rank[cand], -sims))[: params.top_n]
        return [(self.ids[cand[i]], float(sims[i])) for i in order]

    def _prepare_probe(self, probe) -> np.ndarray:
        q = as_vector(probe)
        if q.size != self.config.dim:
            raise AnnIndexError(f"probe dim {q.size} does not match index dim {self.config.dim}")
        n = math.sqrt(float(np.dot(q, q)))
        if n == 0.0:
            raise AnnIndexError("cannot query with a zero vector")
        return q / n

    # ------------------------------------------------------------ persistence

    def save(self, path: str | os.PathLike[str]) -> None:
        c = self.config
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IIIBIQ", VERSION, c.dim, c.n_trees, _METRICS[c.metric], c.leaf_capacity, c.seed))
            fh.write(struct.pack("<Q", self.item_count))
            fh.write(struct.pack("<Q", len(self.normals)))
            fh.write(self.normals.astype("<f4").tobytes())
            fh.write(self.offsets.astype("<f4").tobytes())
            fh.write(self.children.astype("<i8").tobytes())
            fh.write(struct.pack("<Q", len(self.leaf_offsets) - 1))
            fh.write(self.leaf_offsets.astype("<u8").tobytes())
            fh.write(self.leaf_items.astype("<u4").tobytes())
            fh.write(self.roots.astype("<i8").tobytes())
            for rid in self.ids:
                fh.write(rid.encode("utf-8") + b"\x00")
            fh.write(self.vectors.astype("<f4").tobytes())


class _Reader:
    def __init__(self, data: bytes, path: Path) -> None:
        self.data, self.pos, self.path = data, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise AnnIndexError(f"{self.path}: truncated index file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        width = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * width), dtype=dtype).copy()

    def cstring(self) -> str:
        end = self.data.find(b"\x00", self.pos)
        if end < 0:
            raise AnnIndexError(f"{self.path}: truncated id table")
        out = self.data[self.pos : end].decode("utf-8")
        self.pos = end + 1
        return out


def load(path: str | os.PathLike[str]) -> AnnForest:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise AnnIndexError(f"cannot read index {path}: {exc}") from exc
    r = _Reader(data, path)
    if r.take(len(MAGIC)) != MAGIC:
        raise AnnIndexError(f"{path}: not an index file (bad magic)")
    version, dim, n_trees, metric, leaf_capacity, seed = r.unpack("<IIIBIQ")
    if version != VERSION:
        raise AnnIndexError(f"{path}: unsupported index version {version}")
    metric_name = {v: k for k, v in _METRICS.items()}.get(metric)
    if metric_name is None:
        raise AnnIndexError(f"{path}: unknown metric code {metric}")
    config = IndexConfig(dim=dim, n_trees=n_trees, metric=metric_name, leaf_capacity=leaf_capacity, seed=seed)
    (item_count,) = r.unpack("<Q")
    (n_inner,) = r.unpack("<Q")
    normals = r.array("<f4", n_inner * dim).reshape(n_inner, dim)
    offsets = r.array("<f4", n_inner)
    children = r.array("<i8", n_inner * 2).reshape(n_inner, 2)
    (n_leaves,) = r.unpack("<Q")
    leaf_offsets = r.array("<u8", n_leaves + 1)
    leaf_items = r.array("<u4", int(leaf_offsets[-1]) if n_leaves else 0)
    roots = r.array("<i8", n_trees)
    ids = [r.cstring() for _ in range(item_count)]
    vectors = r.array("<f4", item_count * dim).reshape(item_count, dim)
    if r.pos != len(data):
        raise AnnIndexError(f"{path}: {len(data) - r.pos} trailing bytes")
    return AnnForest(config, ids, vectors, normals, offsets, children, leaf_offsets, leaf_items, roots)
