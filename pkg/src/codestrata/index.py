"""Persisted per-collection vector store with exact cosine top-k search.

Corpora here top out around a few thousand vectors, so search is an
exact scan over a cached matrix rather than an approximate index: one
matrix-vector product per query, fully testable against a brute-force
oracle, with deterministic tie-breaks by node id.

On-disk layout (little-endian), one file per collection:

    magic "HCGSVIDX" | u32 version | u32 dimension | u64 count
    count * ( u32 id_len | id utf-8 | dimension * f32 )
    8-byte checksum (blake2b-64 of everything before it)

Node metadata (file path, name, kind) and text digests live in a JSON
sidecar next to the binary file.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
import struct
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embed import EmbeddingRecord

MAGIC = b"HCGSVIDX"
VERSION = 1
_HEADER = struct.Struct("<II")
_COUNT = struct.Struct("<Q")
_IDLEN = struct.Struct("<I")


class VectorIndexError(Exception):
    """Base class for vector index errors."""


class DimensionMismatch(VectorIndexError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"vector dimension {got} does not match collection dimension {expected}")


class EmptyCollection(VectorIndexError):
    pass


class CorruptIndex(VectorIndexError):
    pass


class VersionMismatch(VectorIndexError):
    def __init__(self, found: int):
        self.found = found
        super().__init__(f"index file version {found} is not supported (expected {VERSION})")


@dataclass(frozen=True)
class SearchHit:
    node_id: str
    score: float
    rank: int


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


@contextmanager
def _locked(path: Path, exclusive: bool):
    path.parent.mkdir(parents=True, exist_ok=True)
    lock_path = path.with_name(path.name + ".lock")
    with open(lock_path, "w") as handle:
        fcntl.flock(handle, fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
        try:
            yield
        finally:
            fcntl.flock(handle, fcntl.LOCK_UN)


class Collection:
    """A named set of unit-norm vectors keyed by node id."""

    def __init__(self, name: str, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.name = name
        self.dimension = dimension
        self._vectors: dict[str, np.ndarray] = {}
        self._digests: dict[str, str] = {}
        self.metadata: dict[str, dict] = {}
        self._matrix: np.ndarray | None = None
        self._matrix_ids: list[str] = []

    def __len__(self) -> int:
        return len(self._vectors)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Collection):
            return NotImplemented
        return (
            self.name == other.name
            and self.dimension == other.dimension
            and self._digests == other._digests
            and self.metadata == other.metadata
            and set(self._vectors) == set(other._vectors)
            and all(np.array_equal(v, other._vectors[k]) for k, v in self._vectors.items())
        )

    def ids(self) -> list[str]:
        return sorted(self._vectors)

    def vector(self, node_id: str) -> np.ndarray:
        return self._vectors[node_id]

    def upsert(self, record: EmbeddingRecord, meta: dict | None = None) -> None:
        """Insert or replace the record with the same node id."""
        vector = np.asarray(record.vector, dtype=np.float32)
        if vector.shape != (self.dimension,):
            raise DimensionMismatch(self.dimension, int(vector.shape[-1]) if vector.ndim else 0)
        self._vectors[record.node_id] = vector
        self._digests[record.node_id] = record.text_digest
        if meta is not None:
            self.metadata[record.node_id] = dict(meta)
        self._matrix = None

    def upsert_many(self, records: list[EmbeddingRecord], metas: dict[str, dict] | None = None) -> None:
        for record in records:
            self.upsert(record, (metas or {}).get(record.node_id))

    def _ensure_matrix(self) -> None:
        if self._matrix is None:
            self._matrix_ids = self.ids()
            self._matrix = np.stack(
                [self._vectors[nid] for nid in self._matrix_ids]
            ).astype(np.float64)

    def search(self, query: np.ndarray, k: int) -> list[SearchHit]:
        """Exact top-min(k, size) by cosine, ties broken by node id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._vectors:
            raise EmptyCollection(f"collection {self.name!r} is empty")
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dimension,):
            raise DimensionMismatch(self.dimension, int(q.shape[-1]) if q.ndim else 0)
        self._ensure_matrix()
        scores = self._matrix @ q
        order = sorted(range(len(self._matrix_ids)), key=lambda i: (-scores[i], self._matrix_ids[i]))
        # ranking uses raw scores; the reported cosine is clamped because
        # float32 storage can push a self-match a few ulp past 1.0
        return [
            SearchHit(
                node_id=self._matrix_ids[i],
                score=min(1.0, max(-1.0, float(scores[i]))),
                rank=rank,
            )
            for rank, i in enumerate(order[: min(k, len(order))], start=1)
        ]

    def save(self, path: str | Path) -> None:
        """Persist atomically; writers are exclusive per collection file."""
        path = Path(path)
        chunks: list[bytes] = [MAGIC, _HEADER.pack(VERSION, self.dimension), _COUNT.pack(len(self._vectors))]
        for nid in self.ids():
            encoded = nid.encode("utf-8")
            chunks.append(_IDLEN.pack(len(encoded)))
            chunks.append(encoded)
            chunks.append(self._vectors[nid].astype(np.float32).tobytes())
        body = b"".join(chunks)
        sidecar = json.dumps(
            {"name": self.name, "metadata": self.metadata, "digests": self._digests},
            ensure_ascii=False,
            indent=2,
            sort_keys=True,
        )
        with _locked(path, exclusive=True):
            _atomic_write(path, body + _checksum(body))
            _atomic_write(_sidecar_path(path), sidecar.encode("utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> "Collection":
        path = Path(path)
        with _locked(path, exclusive=False):
            blob = path.read_bytes()
            sidecar_path = _sidecar_path(path)
            sidecar = sidecar_path.read_text("utf-8") if sidecar_path.exists() else None

        header_len = len(MAGIC) + _HEADER.size + _COUNT.size
        if len(blob) < header_len + 8:
            raise CorruptIndex(f"{path}: file too short")
        if blob[: len(MAGIC)] != MAGIC:
            raise CorruptIndex(f"{path}: bad magic")
        version, dimension = _HEADER.unpack_from(blob, len(MAGIC))
        if version != VERSION:
            raise VersionMismatch(version)
        body, stored_sum = blob[:-8], blob[-8:]
        if _checksum(body) != stored_sum:
            raise CorruptIndex(f"{path}: checksum mismatch")
        (count,) = _COUNT.unpack_from(body, len(MAGIC) + _HEADER.size)

        meta: dict = {}
        digests: dict[str, str] = {}
        name = path.stem
        if sidecar is not None:
            try:
                parsed = json.loads(sidecar)
                name = parsed.get("name", name)
                meta = parsed.get("metadata", {})
                digests = parsed.get("digests", {})
            except (json.JSONDecodeError, AttributeError) as exc:
                raise CorruptIndex(f"{sidecar_path}: bad sidecar: {exc}") from exc

        collection = cls(name=name, dimension=dimension)
        offset = len(MAGIC) + _HEADER.size + _COUNT.size
        vec_bytes = dimension * 4
        for _ in range(count):
            if offset + _IDLEN.size > len(body):
                raise CorruptIndex(f"{path}: truncated record")
            (id_len,) = _IDLEN.unpack_from(body, offset)
            offset += _IDLEN.size
            if offset + id_len + vec_bytes > len(body):
                raise CorruptIndex(f"{path}: truncated record")
            node_id = body[offset : offset + id_len].decode("utf-8")
            offset += id_len
            vector = np.frombuffer(body[offset : offset + vec_bytes], dtype="<f4").copy()
            offset += vec_bytes
            collection._vectors[node_id] = vector
            collection._digests[node_id] = digests.get(node_id, "")
        if offset != len(body):
            raise CorruptIndex(f"{path}: trailing data after records")
        collection.metadata = meta
        return collection

    def export_json_dict(self) -> dict:
        """Debug-friendly JSON view of the whole collection."""
        return {
            "name": self.name,
            "dimension": self.dimension,
            "count": len(self._vectors),
            "records": [
                {
                    "node_id": nid,
                    "vector": [float(x) for x in self._vectors[nid]],
                    "text_digest": self._digests.get(nid, ""),
                }
                for nid in self.ids()
            ],
            "metadata": self.metadata,
        }


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
