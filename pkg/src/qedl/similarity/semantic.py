"""Embedding cosine, IDF saliency and the BM25-shaped semantic similarity."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from qedl.kg import KgEntity

K1 = 1.5
B = 0.75


def cosine(u, v) -> float:
    """``u.v / (|u| |v|)``, or 0 when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))


class EmbeddingTable:
    """Term vectors of a common dimension."""

    def __init__(self, vectors: Mapping[str, Sequence[float]], dim: int | None = None):
        self.vectors: dict[str, np.ndarray] = {}
        for term, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if dim is None:
                dim = arr.shape[0]
            if arr.shape != (dim,):
                raise ValueError(f"vector for {term!r} has dimension {arr.shape}, expected {dim}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"vector for {term!r} is not finite")
            self.vectors[term] = arr
        self.dim = dim or 0

    def __contains__(self, term: str) -> bool:
        return term in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, term: str):
        return self.vectors.get(term)

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        """Read ``vocab_size dim`` header then ``token v1 ... vd`` lines."""
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}:1: expected 'vocab_size dim' header")
            size, dim = int(header[0]), int(header[1])
            vectors = {}
            for lineno, line in enumerate(fh, 2):
                parts = line.rstrip("\n").split(" ")
                if not line.strip():
                    continue
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}:{lineno}: expected {dim} values")
                vectors[parts[0]] = [float(x) for x in parts[1:]]
        if len(vectors) != size:
            raise ValueError(f"{path}: header says {size} vectors, found {len(vectors)}")
        return cls(vectors, dim)


class IdfTable:
    """Document frequencies with smoothed IDF ``ln((N + 1) / (df + 1))``."""

    def __init__(self, n_docs: int, df: Mapping[str, int]):
        for term, d in df.items():
            if not 0 <= d <= n_docs:
                raise ValueError(f"df({term!r}) = {d} outside [0, {n_docs}]")
        self.n_docs = n_docs
        self.df = dict(df)

    @classmethod
    def from_documents(cls, documents: Iterable[Sequence[str]]) -> "IdfTable":
        df: dict[str, int] = {}
        n = 0
        for doc in documents:
            n += 1
            for term in set(doc):
                df[term] = df.get(term, 0) + 1
        return cls(n, df)

    def idf(self, term: str) -> float:
        return math.log((self.n_docs + 1) / (self.df.get(term, 0) + 1))


def term_sem(w: str, e_terms: Sequence[str], emb: EmbeddingTable) -> float:
    """Best cosine between ``w`` and any entity term, clamped to [0, 1].

    A term without a vector scores 1 if it occurs verbatim in the entity
    terms and 0 otherwise; entity terms without vectors are skipped.
    """
    vw = emb.get(w)
    if vw is None:
        return 1.0 if w in e_terms else 0.0
    best = 0.0
    for t in e_terms:
        vt = emb.get(t)
        if vt is None:
            continue
        best = max(best, cosine(vw, vt))
    return min(1.0, max(0.0, best))


def saliency_bm25(sems: Sequence[float], idfs: Sequence[float], e_len: int, avge: float,
                  k1: float = K1, b: float = B) -> float:
    """Sum of ``idf * sem * (k1 + 1) / (sem + k1 * (1 - b + b * e_len / avge))``."""
    if avge <= 0:
        raise ValueError("average entity length must be positive")
    norm = k1 * (1.0 - b + b * e_len / avge)
    return float(sum(i * s * (k1 + 1.0) / (s + norm) for s, i in zip(sems, idfs) if s > 0))


def semantic_similarity(q_terms: Sequence[str], e_terms: Sequence[str], emb: EmbeddingTable,
                        idf: IdfTable, k1: float = K1, b: float = B,
                        avge: float | None = None) -> float:
    """Saliency-weighted semantic similarity of a question to an entity.

    Every question term is weighted by its IDF and by the BM25-style
    saturation of its best embedding match among the entity terms;
    ``avge`` is the average entity length used for length normalization
    (defaults to ``len(e_terms)``).
    """
    if not e_terms:
        raise ValueError("entity term list is empty")
    if avge is None:
        avge = float(len(e_terms))
    sems = [term_sem(w, e_terms, emb) for w in q_terms]
    return saliency_bm25(sems, [idf.idf(w) for w in q_terms], len(e_terms), avge, k1, b)


def popularity_feature(entity: KgEntity | int) -> float:
    """``log10`` of the stored hit count."""
    n = entity if isinstance(entity, int) else entity.popularity
    if n < 1:
        raise ValueError("popularity must be >= 1")
    return math.log10(n)
