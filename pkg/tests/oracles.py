"""Independent re-implementations used to cross-check production paths."""
from __future__ import annotations

import math

from leanrag.domain import EmbeddingVector
from leanrag.vindex import VectorIndex


def oracle_top_k(index: VectorIndex, query: EmbeddingVector, k: int) -> list[tuple[str, float]]:
    """All-pairs cosine ranking with fsum accumulation; ties by ascending id."""
    q = [float(v) for v in query.values]
    q_norm = math.sqrt(math.fsum(v * v for v in q))
    scored = []
    for doc_id, row in zip(index.doc_ids, index.matrix):
        r = [float(v) for v in row]
        dot = math.fsum(a * b for a, b in zip(r, q))
        norm = math.sqrt(math.fsum(v * v for v in r))
        scored.append((doc_id, dot / (norm * q_norm)))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[: min(k, len(scored))]
