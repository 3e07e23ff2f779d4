"""Text embeddings: deterministic local embedder, remote client, disk cache.

The local embedder is signed feature-hashing of character trigrams. It needs
no model download and gives identical vectors on every platform, which keeps
retrieval tests reproducible.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

from .clients import EmbeddingClient, embedding_key
from .domain import EmbeddingVector, content_hash

LOCAL_PROVIDER_ID = "local"
DEFAULT_LOCAL_DIM = 256
MIN_DIM = 16
DEFAULT_TRUNCATION_CHARS = 6000
DEFAULT_EMBED_PARALLELISM = 8


class EmptyText(ValueError):
    """The text to embed was empty after whitespace trimming."""


class DimensionTooSmall(ValueError):
    """Requested embedding dimension is below the supported minimum."""


class DimensionMismatch(ValueError):
    """A provider returned vectors of inconsistent dimension."""


class CacheCorrupt(RuntimeError):
    """A cache entry's recomputed key does not match its filename."""


def local_model_id(dim: int) -> str:
    return f"hashed-trigram-{dim}"


def normalize_for_embedding(text: str) -> str:
    """Lowercase and collapse whitespace runs; no Unicode folding (ℝ, → survive)."""
    return " ".join(text.split()).lower()


def truncate_for_embedding(text: str, limit: int = DEFAULT_TRUNCATION_CHARS) -> str:
    """Hard character cut applied before embedding long documents."""
    return text if len(text) <= limit else text[:limit]


def embed_local(text: str, dim: int = DEFAULT_LOCAL_DIM) -> EmbeddingVector:
    """Embed text by hashing character trigrams into dim signed buckets."""
    if dim < MIN_DIM:
        raise DimensionTooSmall(f"dim must be >= {MIN_DIM}, got {dim}")
    normalized = normalize_for_embedding(text)
    if not normalized:
        raise EmptyText("cannot embed empty text")
    if len(normalized) >= 3:
        grams: Iterable[str] = (normalized[i : i + 3] for i in range(len(normalized) - 2))
    else:
        grams = (normalized,)
    accum = [0.0] * dim
    slots: dict[str, tuple[int, float]] = {}
    for gram in grams:
        slot = slots.get(gram)
        if slot is None:
            digest = hashlib.sha256(gram.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big") % dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            slot = (bucket, sign)
            slots[gram] = slot
        accum[slot[0]] += slot[1]
    norm = math.sqrt(math.fsum(v * v for v in accum))
    if norm == 0.0:
        # Signed counts cancelled exactly; fall back to a deterministic axis.
        digest = hashlib.sha256(normalized.encode("utf-8")).digest()
        accum[int.from_bytes(digest[:8], "big") % dim] = 1.0
        norm = 1.0
    values = tuple(v / norm for v in accum)
    return EmbeddingVector(
        values=values,
        provider_id=LOCAL_PROVIDER_ID,
        model_id=local_model_id(dim),
        content_hash=content_hash(text),
    )


@dataclass(frozen=True)
class EmbeddingRequest:
    """An ordered batch of texts to embed with one provider/model."""

    texts: tuple[str, ...]
    provider_id: str
    model_id: str

    def __post_init__(self) -> None:
        if not self.texts:
            raise ValueError("embedding request must contain at least one text")
        for i, text in enumerate(self.texts):
            if not text.strip():
                raise EmptyText(f"text {i} is empty after trimming")


def embed_remote(request: EmbeddingRequest, client: EmbeddingClient) -> list[EmbeddingVector]:
    """Embed a batch through the remote client, preserving input order."""
    if request.provider_id != client.provider_id:
        raise ValueError(
            f"request provider {request.provider_id!r} != client provider {client.provider_id!r}"
        )
    raw = client.embed_texts(list(request.texts), request.model_id)
    dims = {len(vec) for vec in raw}
    if len(dims) != 1:
        raise DimensionMismatch(f"provider returned inconsistent dimensions: {sorted(dims)}")
    return [
        EmbeddingVector(
            values=tuple(vec),
            provider_id=request.provider_id,
            model_id=request.model_id,
            content_hash=content_hash(text),
        )
        for text, vec in zip(request.texts, raw)
    ]


@dataclass(frozen=True)
class CacheEntry:
    key: str
    vector: EmbeddingVector


class EmbeddingCache:
    """Content-addressed cache: one <key>.json file per embedded text.

    Reads are lock-free; writes are serialized and atomic (temp file then
    rename), so concurrent readers never observe a partial entry.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _entry_path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str, text: str) -> EmbeddingVector | None:
        path = self._entry_path(key)
        if not path.exists():
            return None
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
            provider_id = obj["provider_id"]
            model_id = obj["model_id"]
            dim = obj["dim"]
            values = tuple(float(v) for v in obj["vector"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CacheCorrupt(f"unreadable cache entry {path.name}: {exc}") from exc
        if embedding_key(provider_id, model_id, text) != key:
            raise CacheCorrupt(f"cache entry {path.name} fails key recomputation")
        if len(values) != dim:
            raise CacheCorrupt(f"cache entry {path.name} has dim {dim} but {len(values)} values")
        return EmbeddingVector(
            values=values,
            provider_id=provider_id,
            model_id=model_id,
            content_hash=content_hash(text),
        )

    def put(self, key: str, vector: EmbeddingVector) -> None:
        payload = {
            "provider_id": vector.provider_id,
            "model_id": vector.model_id,
            "dim": vector.dim,
            "vector": list(vector.values),
        }
        path = self._entry_path(key)
        with self._write_lock:
            fd, tmp = tempfile.mkstemp(prefix=path.name, dir=self.directory)
            try:
                with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                    json.dump(payload, fh)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise

    def keys(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def __len__(self) -> int:
        return len(self.keys())


class Embedder(Protocol):
    """Anything that can embed a single text with stable provenance ids."""

    provider_id: str
    model_id: str

    def embed(self, text: str) -> EmbeddingVector: ...


@dataclass(frozen=True)
class LocalEmbedder:
    dim: int = DEFAULT_LOCAL_DIM

    @property
    def provider_id(self) -> str:
        return LOCAL_PROVIDER_ID

    @property
    def model_id(self) -> str:
        return local_model_id(self.dim)

    def embed(self, text: str) -> EmbeddingVector:
        return embed_local(text, self.dim)


@dataclass
class RemoteEmbedder:
    client: EmbeddingClient
    model_id: str

    @property
    def provider_id(self) -> str:
        return self.client.provider_id

    def embed(self, text: str) -> EmbeddingVector:
        request = EmbeddingRequest(
            texts=(text,), provider_id=self.provider_id, model_id=self.model_id
        )
        return embed_remote(request, self.client)[0]


def cache_get_or_embed(text: str, provider: Embedder, cache: EmbeddingCache) -> EmbeddingVector:
    """Return the cached vector for text, or embed, store, and return it."""
    key = embedding_key(provider.provider_id, provider.model_id, text)
    hit = cache.get(key, text)
    if hit is not None:
        return hit
    vector = provider.embed(text)
    cache.put(key, vector)
    return vector


@dataclass
class CachedEmbedder:
    """Embedder wrapper that reads through an EmbeddingCache."""

    inner: Embedder
    cache: EmbeddingCache

    @property
    def provider_id(self) -> str:
        return self.inner.provider_id

    @property
    def model_id(self) -> str:
        return self.inner.model_id

    def embed(self, text: str) -> EmbeddingVector:
        return cache_get_or_embed(text, self.inner, self.cache)


def embed_many(
    texts: list[str],
    embedder: Embedder,
    parallelism: int = DEFAULT_EMBED_PARALLELISM,
) -> list[EmbeddingVector]:
    """Embed texts with bounded parallelism, preserving input order."""
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as executor:
        return list(executor.map(embedder.embed, texts))
