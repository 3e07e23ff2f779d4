"""Retrieval-augmented generation toolkit comparing natural-language and
Lean-formalized retrieval for math question answering."""

from .domain import (
    BenchmarkQuestion,
    CorpusDocument,
    EmbeddingVector,
    PipelineConfig,
    RetrievedDocument,
    Source,
    Verdict,
    content_hash,
)
from .grader import CanonicalAnswer, grade
from .pipeline import GenerationResult, IndexedCorpus, PipelineClients
from .vindex import VectorIndex, build_index, load_index, save_index, top_k

__version__ = "0.1.0"

__all__ = [
    "BenchmarkQuestion",
    "CanonicalAnswer",
    "CorpusDocument",
    "EmbeddingVector",
    "GenerationResult",
    "IndexedCorpus",
    "PipelineClients",
    "PipelineConfig",
    "RetrievedDocument",
    "Source",
    "VectorIndex",
    "Verdict",
    "__version__",
    "build_index",
    "content_hash",
    "grade",
    "load_index",
    "save_index",
    "top_k",
]
