"""Immutable exact cosine-similarity index with bit-exact binary persistence.

File layout: magic "FRVIDX01", u32 LE dim, u64 LE count, then per entry a
u16 LE id length, the UTF-8 id bytes, and dim little-endian f32 values;
the file ends with a u32 LE CRC32 of all preceding bytes.

Vectors are quantized to f32 at build time so that a save/load round trip
is lossless; similarities are always accumulated in f64.
"""
from __future__ import annotations

import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import EmbeddingVector, RetrievedDocument

MAGIC = b"FRVIDX01"
_MAX_ID_BYTES = 0xFFFF


class DimensionMismatch(ValueError):
    """Vectors of different dimensions were mixed."""


class DuplicateId(ValueError):
    """The same doc_id appeared twice while building an index."""


class ZeroVector(ValueError):
    """A document vector has zero norm (after f32 quantization)."""


class ZeroQuery(ValueError):
    """The query vector has zero norm."""


class BadMagic(ValueError):
    """The file does not start with the index magic bytes."""


class TruncatedFile(ValueError):
    """The file ended before the declared content did."""


class ChecksumMismatch(ValueError):
    """The trailing CRC32 does not match the file contents."""


@dataclass(frozen=True, eq=False)
class VectorIndex:
    """Exact brute-force cosine index; immutable after construction."""

    dim: int
    doc_ids: tuple[str, ...]
    matrix: np.ndarray  # float32, shape (n, dim), rows in doc_id order
    norms: np.ndarray  # float64 L2 norms of the f32 rows

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.doc_ids == other.doc_ids
            and self.matrix.tobytes() == other.matrix.tobytes()
        )

    def vector_for(self, doc_id: str) -> np.ndarray:
        return self.matrix[self.doc_ids.index(doc_id)]


def build_index(pairs: list[tuple[str, EmbeddingVector]]) -> VectorIndex:
    """Build an index from (doc_id, vector) pairs, sorted by doc_id."""
    if not pairs:
        raise ValueError("cannot build an index from zero vectors")
    dim = pairs[0][1].dim
    seen: set[str] = set()
    for doc_id, vector in pairs:
        if vector.dim != dim:
            raise DimensionMismatch(
                f"document {doc_id!r} has dim {vector.dim}, expected {dim}"
            )
        if doc_id in seen:
            raise DuplicateId(f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
    ordered = sorted(pairs, key=lambda item: item[0])
    matrix = np.array([vec.values for _, vec in ordered], dtype=np.float32)
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
    for (doc_id, _), norm in zip(ordered, norms):
        if norm == 0.0:
            raise ZeroVector(f"document {doc_id!r} has a zero vector")
    return VectorIndex(
        dim=dim,
        doc_ids=tuple(doc_id for doc_id, _ in ordered),
        matrix=matrix,
        norms=norms,
    )


def top_k(index: VectorIndex, query: EmbeddingVector, k: int) -> list[RetrievedDocument]:
    """Exact top-k by cosine similarity; ties broken by ascending doc_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if query.dim != index.dim:
        raise DimensionMismatch(f"query dim {query.dim} != index dim {index.dim}")
    q = np.asarray(query.values, dtype=np.float64)
    q_norm = float(np.linalg.norm(q))
    if q_norm == 0.0:
        raise ZeroQuery("query vector has zero norm")
    sims = index.matrix.astype(np.float64) @ q / (index.norms * q_norm)
    # Rows are in ascending doc_id order, so a stable sort on -sim breaks
    # exact ties by ascending doc_id.
    order = np.argsort(-sims, kind="stable")[: min(k, len(index))]
    return [
        RetrievedDocument(doc_id=index.doc_ids[i], similarity=float(sims[i]), rank=rank)
        for rank, i in enumerate(order, start=1)
    ]


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Serialize the index; the write is atomic (temp file then rename)."""
    path = Path(path)
    buf = bytearray(MAGIC)
    buf += struct.pack("<I", index.dim)
    buf += struct.pack("<Q", len(index))
    for doc_id, row in zip(index.doc_ids, index.matrix):
        id_bytes = doc_id.encode("utf-8")
        if len(id_bytes) > _MAX_ID_BYTES:
            raise ValueError(f"doc_id too long to serialize: {doc_id[:40]!r}…")
        buf += struct.pack("<H", len(id_bytes))
        buf += id_bytes
        buf += row.astype("<f4", copy=False).tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name, dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(buf))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_index(path: str | Path) -> VectorIndex:
    """Load and verify an index file written by save_index."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC):
        raise TruncatedFile(f"{path}: shorter than the magic header")
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path}: bad magic {data[:len(MAGIC)]!r}")
    header_size = len(MAGIC) + 4 + 8
    if len(data) < header_size + 4:
        raise TruncatedFile(f"{path}: shorter than header plus checksum")
    (crc_stored,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc_stored:
        raise ChecksumMismatch(f"{path}: CRC32 mismatch")
    (dim,) = struct.unpack_from("<I", data, len(MAGIC))
    (count,) = struct.unpack_from("<Q", data, len(MAGIC) + 4)
    offset = header_size
    end = len(data) - 4
    doc_ids: list[str] = []
    rows: list[np.ndarray] = []
    row_bytes = dim * 4
    for _ in range(count):
        if offset + 2 > end:
            raise TruncatedFile(f"{path}: entry header past end of data")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + row_bytes > end:
            raise TruncatedFile(f"{path}: entry body past end of data")
        doc_ids.append(data[offset : offset + id_len].decode("utf-8"))
        offset += id_len
        rows.append(np.frombuffer(data, dtype="<f4", count=dim, offset=offset))
        offset += row_bytes
    if offset != end:
        raise TruncatedFile(f"{path}: {end - offset} unexpected trailing bytes")
    if sorted(doc_ids) != doc_ids or len(set(doc_ids)) != len(doc_ids):
        raise ValueError(f"{path}: doc_ids are not unique and sorted")
    matrix = np.array(rows, dtype=np.float32).reshape(count, dim)
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector(f"{path}: contains a zero vector")
    return VectorIndex(dim=dim, doc_ids=tuple(doc_ids), matrix=matrix, norms=norms)
