"""Question/entity similarity features used for ranking."""

from qedl.similarity.lda import LdaModel
from qedl.similarity.linalg import jacobi_svd
from qedl.similarity.semantic import (
    B,
    K1,
    EmbeddingTable,
    IdfTable,
    cosine,
    popularity_feature,
    saliency_bm25,
    semantic_similarity,
    term_sem,
)
from qedl.similarity.textsim import (
    CorpusModels,
    NotFittedError,
    TextModelConfig,
    read_corpus,
)

__all__ = [
    "LdaModel", "jacobi_svd", "B", "K1", "EmbeddingTable", "IdfTable", "cosine",
    "popularity_feature", "saliency_bm25", "semantic_similarity", "term_sem",
    "CorpusModels", "NotFittedError", "TextModelConfig", "read_corpus",
]
