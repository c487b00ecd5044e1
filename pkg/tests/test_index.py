from __future__ import annotations

import struct
import threading

import numpy as np
import pytest

from codestrata.embed import EmbeddingRecord, unit_norm
from codestrata.index import (
    MAGIC,
    Collection,
    CorruptIndex,
    DimensionMismatch,
    EmptyCollection,
    VersionMismatch,
)


def record(node_id: str, vector, digest: str = "") -> EmbeddingRecord:
    return EmbeddingRecord(node_id=node_id, collection="code", vector=np.asarray(vector, dtype=np.float32), text_digest=digest)


def unit(values, dim=4):
    v = np.zeros(dim, dtype=np.float64)
    for i, x in enumerate(values):
        v[i] = x
    return unit_norm(v)


def brute_force_ranking(collection: Collection, query: np.ndarray) -> list[str]:
    """Independent full-sort oracle over per-row dot products."""
    q = np.asarray(query, dtype=np.float64)
    scored = [
        (float(np.dot(collection.vector(nid).astype(np.float64), q)), nid)
        for nid in collection.ids()
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [nid for _, nid in scored]


def test_upsert_replaces_same_id():
    c = Collection("code", 4)
    c.upsert(record("a", [1, 0, 0, 0]))
    c.upsert(record("a", [0, 1, 0, 0]))
    assert len(c) == 1
    assert np.array_equal(c.vector("a"), np.array([0, 1, 0, 0], dtype=np.float32))


def test_upsert_dimension_mismatch():
    c = Collection("code", 4)
    with pytest.raises(DimensionMismatch):
        c.upsert(record("a", [1, 0, 0]))


def test_upsert_into_empty_collection():
    c = Collection("code", 4)
    c.upsert(record("a", [1, 0, 0, 0]))
    assert len(c) == 1


def test_search_orthonormal_example():
    c = Collection("code", 4)
    c.upsert(record("e1", [1, 0, 0, 0]))
    c.upsert(record("e2", [0, 1, 0, 0]))
    hits = c.search(np.array([1.0, 0, 0, 0]), k=2)
    assert [(h.node_id, h.rank) for h in hits] == [("e1", 1), ("e2", 2)]
    assert hits[0].score == pytest.approx(1.0, abs=1e-9)
    assert hits[1].score == pytest.approx(0.0, abs=1e-9)


def test_search_tie_breaks_by_node_id():
    c = Collection("code", 4)
    c.upsert(record("b", [1, 0, 0, 0]))
    c.upsert(record("a", [1, 0, 0, 0]))
    hits = c.search(np.array([1.0, 0, 0, 0]), k=1)
    assert hits[0].node_id == "a"


def test_search_matches_brute_force_oracle():
    rng = np.random.default_rng(321)
    c = Collection("code", 16)
    for i in range(100):
        c.upsert(record(f"v{i:03d}", unit_norm(rng.normal(size=16))))
    for _ in range(25):
        query = unit_norm(rng.normal(size=16)).astype(np.float64)
        hits = c.search(query, k=10)
        assert [h.node_id for h in hits] == brute_force_ranking(c, query)[:10]


def test_search_prefix_property():
    rng = np.random.default_rng(11)
    c = Collection("code", 8)
    for i in range(30):
        c.upsert(record(f"v{i:02d}", unit_norm(rng.normal(size=8))))
    query = unit_norm(rng.normal(size=8))
    full = c.search(query, k=30)
    for k in (1, 3, 5, 10, 29):
        assert c.search(query, k=k) == full[:k]


def test_search_score_equals_dot_product():
    rng = np.random.default_rng(5)
    c = Collection("code", 8)
    stored = unit_norm(rng.normal(size=8))
    c.upsert(record("a", stored))
    query = unit_norm(rng.normal(size=8))
    hit = c.search(query, k=1)[0]
    expected = float(np.dot(stored.astype(np.float64), query.astype(np.float64)))
    assert abs(hit.score - expected) <= 1e-6


def test_search_scores_stay_in_range():
    c = Collection("code", 4)
    v = unit_norm(np.array([0.3, 0.2, 0.9, 0.1]))
    c.upsert(record("a", v))
    hit = c.search(v.astype(np.float64), k=1)[0]
    assert -1.0 <= hit.score <= 1.0
    assert hit.score == pytest.approx(1.0, abs=1e-6)


def test_search_k_larger_than_corpus_returns_all():
    c = Collection("code", 4)
    c.upsert(record("a", [1, 0, 0, 0]))
    c.upsert(record("b", [0, 1, 0, 0]))
    assert len(c.search(np.array([1.0, 0, 0, 0]), k=50)) == 2


def test_search_empty_collection():
    with pytest.raises(EmptyCollection):
        Collection("code", 4).search(np.array([1.0, 0, 0, 0]), k=1)


def test_search_k_below_one_rejected():
    c = Collection("code", 4)
    c.upsert(record("a", [1, 0, 0, 0]))
    with pytest.raises(ValueError):
        c.search(np.array([1.0, 0, 0, 0]), k=0)


def test_persist_load_round_trip(tmp_path):
    rng = np.random.default_rng(77)
    c = Collection("summary", 6)
    for i in range(9):
        c.upsert(
            record(f"n{i}", unit_norm(rng.normal(size=6)), digest=f"d{i}"),
            meta={"file_path": f"f{i}.toy", "name": f"n{i}", "kind": "function"},
        )
    path = tmp_path / "summary.idx"
    c.save(path)
    loaded = Collection.load(path)
    assert loaded == c


def test_truncated_file_is_corrupt(tmp_path):
    c = Collection("code", 4)
    c.upsert(record("a", [1, 0, 0, 0]))
    path = tmp_path / "code.idx"
    c.save(path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-10])
    with pytest.raises(CorruptIndex):
        Collection.load(path)


def test_version_99_is_version_mismatch(tmp_path):
    c = Collection("code", 4)
    c.upsert(record("a", [1, 0, 0, 0]))
    path = tmp_path / "code.idx"
    c.save(path)
    blob = bytearray(path.read_bytes())
    blob[len(MAGIC) : len(MAGIC) + 4] = struct.pack("<I", 99)
    path.write_bytes(bytes(blob))
    with pytest.raises(VersionMismatch) as excinfo:
        Collection.load(path)
    assert excinfo.value.found == 99


def test_bad_magic_is_corrupt(tmp_path):
    c = Collection("code", 4)
    c.upsert(record("a", [1, 0, 0, 0]))
    path = tmp_path / "code.idx"
    c.save(path)
    blob = bytearray(path.read_bytes())
    blob[0] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CorruptIndex):
        Collection.load(path)


def test_flipped_body_byte_fails_checksum(tmp_path):
    c = Collection("code", 4)
    c.upsert(record("alpha", [1, 0, 0, 0]))
    path = tmp_path / "code.idx"
    c.save(path)
    blob = bytearray(path.read_bytes())
    blob[len(MAGIC) + 20] ^= 0x01
    path.write_bytes(bytes(blob))
    with pytest.raises(CorruptIndex):
        Collection.load(path)


def test_export_json_shape():
    c = Collection("code", 4)
    c.upsert(record("a", [1, 0, 0, 0], digest="dd"), meta={"file_path": "f.toy", "name": "a", "kind": "function"})
    out = c.export_json_dict()
    assert out["name"] == "code"
    assert out["count"] == 1
    assert out["records"][0]["node_id"] == "a"
    assert len(out["records"][0]["vector"]) == 4
    assert out["metadata"]["a"]["file_path"] == "f.toy"


def test_concurrent_saves_leave_valid_file(tmp_path):
    c = Collection("code", 4)
    for i in range(5):
        c.upsert(record(f"n{i}", unit_norm(np.ones(4) * (i + 1))))
    path = tmp_path / "code.idx"
    threads = [threading.Thread(target=c.save, args=(path,)) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert Collection.load(path) == c
