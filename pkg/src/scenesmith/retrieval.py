"""Embedding retrieval: exact cosine top-k over assets and API descriptions.

The embedder is a pluggable contract (same input, same vector, always). The
in-repo mock hashes character trigrams into a fixed-dimension signed bag and
L2-normalizes, so lexically related texts score higher without any model
weights. Catalogs are small (tens of thousands at most), so the index is an
exact scan: correctness beats speed here.

Asset retrieval picks uniformly among the top five hits; API retrieval takes
rank one. Ties in top_k break by ascending key, making results a total order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Protocol

import numpy as np

from .errors import SceneSmithError
from .registry import DEFAULT_EMBEDDING_DIM, Registry
from .rng import fnv1a64, splitmix64

Embedding = np.ndarray

EntryKind = Literal["asset", "api"]


class DimensionMismatch(SceneSmithError):
    code = "dimension_mismatch"


class EmptyIndex(SceneSmithError):
    code = "empty_index"


class Embedder(Protocol):
    dim: int

    def embed_text(self, text: str) -> Embedding: ...


def ensure_unit(vec: np.ndarray) -> Embedding:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("zero vector cannot be an embedding")
    return vec / norm


class MockEmbedder:
    """Deterministic trigram-hash embedder.

    Lowercased input is padded with spaces and split into overlapping
    character trigrams. Each trigram hashes (FNV-1a then splitmix64) to a
    bucket and a sign; counts accumulate and the vector is L2-normalized.
    Identical across runs and platforms (IEEE-754 double only).
    """

    def __init__(self, dim: int = DEFAULT_EMBEDDING_DIM):
        if dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        self.dim = dim

    def embed_text(self, text: str) -> Embedding:
        padded = f"  {text.strip().lower()}  "
        vec = np.zeros(self.dim, dtype=np.float64)
        for i in range(len(padded) - 2):
            tri = padded[i : i + 3]
            h = splitmix64(fnv1a64(tri.encode("utf-8")))
            bucket = h % self.dim
            sign = 1.0 if (h >> 63) == 0 else -1.0
            vec[bucket] += sign
        if not vec.any():
            vec[0] = 1.0  # degenerate input (empty text) maps to a fixed axis
        return ensure_unit(vec)


class HttpEmbedder:
    """POSTs {"text": ...} to an endpoint and expects {"embedding": [...]}."""

    def __init__(self, endpoint: str, dim: int = DEFAULT_EMBEDDING_DIM, timeout: float = 30.0):
        self.endpoint = endpoint
        self.dim = dim
        self.timeout = timeout

    def embed_text(self, text: str) -> Embedding:
        import requests

        resp = requests.post(self.endpoint, json={"text": text}, timeout=self.timeout)
        resp.raise_for_status()
        vec = np.asarray(resp.json()["embedding"], dtype=np.float64)
        if len(vec) != self.dim:
            raise DimensionMismatch(f"endpoint returned dim {len(vec)}, expected {self.dim}")
        return ensure_unit(vec)


def make_embedder(kind: str, dim: int = DEFAULT_EMBEDDING_DIM, endpoint: str | None = None) -> Embedder:
    if kind == "mock":
        return MockEmbedder(dim)
    if kind == "http":
        if not endpoint:
            raise ValueError("http embedder needs an endpoint")
        return HttpEmbedder(endpoint, dim)
    raise ValueError(f"unknown embedder kind {kind!r}")


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class IndexEntry:
    key: str
    embedding: Embedding
    kind: EntryKind


class EmbeddingIndex:
    def __init__(self, dim: int):
        self.dim = dim
        self._entries: list[IndexEntry] = []
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, key: str, embedding: Embedding, kind: EntryKind) -> None:
        if len(embedding) != self.dim:
            raise DimensionMismatch(f"entry {key!r}: dim {len(embedding)} != {self.dim}")
        self._entries.append(IndexEntry(key, ensure_unit(np.asarray(embedding, dtype=np.float64)), kind))
        self._matrix = None

    def _scores(self, query: Embedding) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack([e.embedding for e in self._entries])
        return self._matrix @ query

    def top_k(self, query: Embedding, k: int, kind: EntryKind | None = None) -> list[tuple[str, float]]:
        """Best k entries by cosine score, ties broken by ascending key."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if len(query) != self.dim:
            raise DimensionMismatch(f"query dim {len(query)} != {self.dim}")
        if not self._entries:
            raise EmptyIndex("index has no entries")
        scores = self._scores(ensure_unit(np.asarray(query, dtype=np.float64)))
        ranked = [
            (entry.key, float(scores[i]))
            for i, entry in enumerate(self._entries)
            if kind is None or entry.kind == kind
        ]
        if not ranked:
            raise EmptyIndex(f"index has no entries of kind {kind!r}")
        ranked.sort(key=lambda pair: (-pair[1], pair[0]))
        return ranked[:k]

    @classmethod
    def from_registry(cls, registry: Registry, embedder: Embedder) -> "EmbeddingIndex":
        index = cls(embedder.dim)
        for name, desc in sorted(registry.descriptors.items()):
            index.add(name, embedder.embed_text(desc.description), "api")
        for asset_id, asset in sorted(registry.assets.items()):
            vec = asset.embedding if asset.embedding is not None else embedder.embed_text(asset.text())
            index.add(asset_id, vec, "asset")
        return index


def select_top5(ranked: list[tuple[str, float]], rng_seed: int) -> str:
    """Uniform pick among the first min(5, len) candidates, fixed by seed."""
    if not ranked:
        raise ValueError("ranked list must be non-empty")
    pool = ranked[: min(5, len(ranked))]
    return pool[splitmix64(rng_seed) % len(pool)][0]


@dataclass(frozen=True)
class AssetHit:
    asset_id: str
    score: float


@dataclass(frozen=True)
class ApiHit:
    plugin_name: str
    score: float


RetrievalHit = AssetHit | ApiHit


class Retriever:
    """Retrieval over one immutable registry snapshot.

    The API side wins when its best score is at least the best asset score
    (rank-1 for APIs, randomized top-5 for assets). A pure function of
    (registry snapshot, query, seed).
    """

    def __init__(self, registry: Registry, embedder: Embedder):
        self.registry = registry
        self.embedder = embedder
        self.index = EmbeddingIndex.from_registry(registry, embedder)

    def retrieve(self, query: str, seed: int) -> RetrievalHit:
        if len(self.index) == 0:
            raise EmptyIndex("registry has no descriptors or assets to retrieve from")
        q = self.embedder.embed_text(query)
        api_best: tuple[str, float] | None = None
        asset_ranked: list[tuple[str, float]] = []
        try:
            api_best = self.index.top_k(q, 1, kind="api")[0]
        except EmptyIndex:
            pass
        try:
            asset_ranked = self.index.top_k(q, 5, kind="asset")
        except EmptyIndex:
            pass
        if api_best is not None and (not asset_ranked or api_best[1] >= asset_ranked[0][1]):
            return ApiHit(plugin_name=api_best[0], score=api_best[1])
        if asset_ranked:
            chosen = select_top5(asset_ranked, seed)
            score = next(s for k, s in asset_ranked if k == chosen)
            return AssetHit(asset_id=chosen, score=score)
        raise EmptyIndex("registry has no descriptors or assets to retrieve from")
