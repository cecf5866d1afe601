"""Knowledge-graph construction and hybrid retrieval engine."""

from ._core import (
    NgramEmbedder,
    answer_f1,
    chunk_document,
    cli,
    cosine,
    evidence_f1,
    quality_gate,
    rrf_fuse,
    tokenize,
)

__all__ = [
    "NgramEmbedder",
    "answer_f1",
    "chunk_document",
    "cli",
    "cosine",
    "evidence_f1",
    "quality_gate",
    "rrf_fuse",
    "tokenize",
]
