"""Text embedding: deterministic hashing backend, HTTP backend, batching.

Every vector this module hands out is L2-normalized to unit length at a
fixed dimension, so cosine similarity downstream reduces to a dot
product. The hashing backend needs no model or network and is exactly
reproducible, which makes the whole pipeline runnable offline and lets
tests cross-check it against an independent reimplementation.
"""

from __future__ import annotations

import hashlib
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .backends import BackendUnavailable, post_json

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 384
COLLECTIONS = ("code", "summary")

_TOKEN = re.compile(r"[0-9a-z]+")


class EmbedBatchError(Exception):
    """Raised when too large a share of a batch failed to embed."""

    def __init__(self, failures: list[tuple[str, str, str]], total: int):
        self.failures = failures
        self.total = total
        sample = "; ".join(f"{nid}/{coll}: {msg}" for nid, coll, msg in failures[:3])
        super().__init__(f"{len(failures)}/{total} records failed to embed ({sample})")


@dataclass(frozen=True)
class EmbeddingRecord:
    node_id: str
    collection: str
    vector: np.ndarray
    text_digest: str


class EmbedBackend(Protocol):
    dimension: int

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]: ...


def basis_vector(dimension: int) -> np.ndarray:
    v = np.zeros(dimension, dtype=np.float32)
    v[0] = 1.0
    return v


def unit_norm(vector: np.ndarray) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        return basis_vector(v.shape[0])
    return (v / n).astype(np.float32)


class HashEmbedder:
    """Signed feature hashing over tokens and adjacent-token bigrams.

    Text is lowercased and tokenized on anything that is not an ASCII
    alphanumeric. Each token, and each bigram "a b" of adjacent tokens,
    is hashed to 64 bits (blake2b, big-endian); the feature adds -1 when
    hash bit 63 is set and +1 otherwise at index hash mod dimension. The
    accumulated vector is L2-normalized. Not semantically meaningful,
    but stable across platforms and trivially reimplementable.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> np.ndarray:
        tokens = _TOKEN.findall(text.lower())
        if not tokens:
            return basis_vector(self.dimension)
        accum = np.zeros(self.dimension, dtype=np.float64)
        features = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        for feature in features:
            h = int.from_bytes(
                hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest(), "big"
            )
            sign = -1.0 if (h >> 63) & 1 else 1.0
            accum[h % self.dimension] += sign
        return unit_norm(accum)


class HttpEmbedder:
    """Client for an embedding endpoint: POST {"texts": [...]} -> {"vectors": [[...]]}."""

    def __init__(
        self,
        base_url: str,
        dimension: int = DEFAULT_DIMENSION,
        timeout: float = 30.0,
        retries: int = 3,
        retry_base_delay: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.dimension = dimension
        self.timeout = timeout
        self.retries = retries
        self.retry_base_delay = retry_base_delay

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        body = post_json(
            self.base_url,
            {"texts": texts},
            timeout=self.timeout,
            retries=self.retries,
            retry_base_delay=self.retry_base_delay,
        )
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise BackendUnavailable(f"{self.base_url}: malformed vectors in response")
        return [np.asarray(v, dtype=np.float64) for v in vectors]


def embed(text: str, backend: EmbedBackend) -> np.ndarray:
    """Embed one text to a unit-norm float32 vector.

    Text that is empty after trimming maps to the fixed basis vector e1
    without consulting the backend, so degenerate inputs (abstract
    methods, empty bodies) always embed.
    """
    if not text.strip():
        return basis_vector(backend.dimension)
    vector = backend.embed_batch([text])[0]
    if vector.shape[0] != backend.dimension:
        raise BackendUnavailable(
            f"backend returned dimension {vector.shape[0]}, expected {backend.dimension}"
        )
    return unit_norm(vector)


def flatten_summary(summary) -> str:
    """Canonical one-text form of a structured summary for embedding.

    Layout: purpose, newline, details, newline, "deps: " followed by the
    dependency names joined with ", " in their listed order. The same
    summary always flattens to the same bytes.
    """
    names = ", ".join(dep["name"] for dep in summary.dependencies)
    return f"{summary.purpose}\n{summary.details}\ndeps: {names}"


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def embed_corpus(
    records: list[tuple[str, str, str]],
    backend: EmbedBackend,
    workers: int = 4,
) -> list[EmbeddingRecord]:
    """Embed (node_id, collection, text) records over a bounded pool.

    Output is sorted by (collection, node_id), so the result does not
    depend on worker scheduling. Individual failures are tolerated up to
    10% of the batch; beyond that an EmbedBatchError is raised.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if not records:
        return []

    def run(item: tuple[str, str, str]) -> EmbeddingRecord:
        node_id, collection, text = item
        return EmbeddingRecord(
            node_id=node_id,
            collection=collection,
            vector=embed(text, backend),
            text_digest=text_digest(text),
        )

    done: list[EmbeddingRecord] = []
    failures: list[tuple[str, str, str]] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run, item): item for item in records}
        for future, item in futures.items():
            try:
                done.append(future.result())
            except Exception as exc:
                failures.append((item[0], item[1], str(exc)))

    if failures:
        failures.sort()
        if len(failures) * 10 > len(records):
            raise EmbedBatchError(failures, len(records))
        for node_id, collection, message in failures:
            logger.warning("skipped %s/%s: %s", collection, node_id, message)

    done.sort(key=lambda r: (r.collection, r.node_id))
    return done
