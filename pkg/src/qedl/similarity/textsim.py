"""TF-IDF, LSI and LDA text similarity fitted on a background corpus."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from qedl.similarity.lda import LdaModel
from qedl.similarity.linalg import jacobi_svd, numerical_rank
from qedl.similarity.semantic import IdfTable, cosine
from qedl.text import is_placeholder, normalize

log = logging.getLogger(__name__)

FORMAT = "qedl-similarity"
FORMAT_VERSION = 1


class NotFittedError(RuntimeError):
    pass


@dataclass
class TextModelConfig:
    lsi_rank: int = 100
    lda_topics: int = 50
    lda_alpha: float | None = None
    lda_beta: float = 0.01
    lda_seed: int = 0
    lda_sweeps: int = 500
    lda_infer_sweeps: int = 50


class CorpusModels:
    """Vocabulary, TF-IDF weights, LSI factors and an LDA model for one corpus.

    TF-IDF vectors are raw counts times ``ln((N + 1) / (df + 1))``, L2
    normalized. LSI projects a TF-IDF vector onto the top ``k`` left singular
    vectors of the term-document matrix. LDA compares inferred topic
    proportions after stopword removal. Any comparison involving a text with
    no usable terms is 0.
    """

    def __init__(self):
        self.vocab: list[str] = []
        self.index: dict[str, int] = {}
        self.idf_table: IdfTable | None = None
        self.idf = None
        self.lsi_basis = None
        self.singular_values = None
        self.lda: LdaModel | None = None
        self.stopwords: frozenset[str] = frozenset()
        self.config = TextModelConfig()
        self._lda_cache: dict[tuple[int, ...], np.ndarray] = {}

    @property
    def fitted(self) -> bool:
        return self.idf is not None

    def _check(self):
        if not self.fitted:
            raise NotFittedError("similarity models are not fitted; run fit-similarity first")

    # -- fitting ----------------------------------------------------------

    @classmethod
    def fit(cls, documents: Sequence[Sequence[str]], stopwords: Iterable[str] = (),
            config: TextModelConfig | None = None, lsi: bool = True, lda: bool = True) -> "CorpusModels":
        m = cls()
        m.config = config or TextModelConfig()
        m.stopwords = frozenset(stopwords)
        documents = [list(d) for d in documents]
        m.vocab = sorted({t for d in documents for t in d})
        m.index = {t: i for i, t in enumerate(m.vocab)}
        m.idf_table = IdfTable.from_documents(documents)
        m.idf = np.array([m.idf_table.idf(t) for t in m.vocab])
        if lsi:
            m._fit_lsi(documents)
        if lda:
            m._fit_lda(documents)
        return m

    def term_document_matrix(self, documents) -> np.ndarray:
        return np.stack([self.tfidf_vector(d) for d in documents], axis=1) if documents \
            else np.zeros((len(self.vocab), 0))

    def _fit_lsi(self, documents):
        A = self.term_document_matrix(documents)
        U, s, _ = jacobi_svd(A)
        rank = numerical_rank(s, A.shape)
        k = min(self.config.lsi_rank, rank)
        self.singular_values = s
        self.lsi_basis = U[:, :k]
        log.info("LSI: %dx%d matrix, rank %d, keeping %d", *A.shape, rank, k)

    def _fit_lda(self, documents):
        c = self.config
        ids = [self._content_ids(d) for d in documents]
        self.lda = LdaModel(c.lda_topics, len(self.vocab), c.lda_alpha, c.lda_beta, c.lda_seed,
                            c.lda_infer_sweeps).fit(ids, c.lda_sweeps)

    # -- vectors ----------------------------------------------------------

    def tfidf_vector(self, terms: Sequence[str]) -> np.ndarray:
        self._check()
        v = np.zeros(len(self.vocab))
        for t in terms:
            i = self.index.get(t)
            if i is not None:
                v[i] += 1.0
        v *= self.idf
        n = np.linalg.norm(v)
        return v / n if n > 0 else v

    def lsi_vector(self, terms: Sequence[str]) -> np.ndarray:
        if self.lsi_basis is None:
            raise NotFittedError("LSI model is not fitted")
        return self.lsi_basis.T @ self.tfidf_vector(terms)

    def _content_ids(self, terms: Sequence[str]) -> list[int]:
        return [self.index[t] for t in terms if t in self.index and t not in self.stopwords]

    def topic_vector(self, terms: Sequence[str]) -> np.ndarray:
        if self.lda is None:
            raise NotFittedError("LDA model is not fitted")
        key = tuple(self._content_ids(terms))
        theta = self._lda_cache.get(key)
        if theta is None:
            theta = self.lda.infer(list(key))
            self._lda_cache[key] = theta
        return theta

    # -- similarities -----------------------------------------------------

    def tfidf_similarity(self, a: Sequence[str], b: Sequence[str]) -> float:
        return cosine(self.tfidf_vector(a), self.tfidf_vector(b))

    def lsi_similarity(self, a: Sequence[str], b: Sequence[str]) -> float:
        return cosine(self.lsi_vector(a), self.lsi_vector(b))

    def lda_similarity(self, a: Sequence[str], b: Sequence[str]) -> float:
        self._check()
        if not self._content_ids(a) or not self._content_ids(b):
            return 0.0
        return cosine(self.topic_vector(a), self.topic_vector(b))

    # -- persistence ------------------------------------------------------

    def to_dict(self) -> dict:
        self._check()
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "config": self.config.__dict__,
            "vocab": self.vocab,
            "n_docs": self.idf_table.n_docs,
            "df": [self.idf_table.df.get(t, 0) for t in self.vocab],
            "stopwords": sorted(self.stopwords),
            "singular_values": None if self.singular_values is None else self.singular_values.tolist(),
            "lsi_basis": None if self.lsi_basis is None else self.lsi_basis.tolist(),
            "lda": None if self.lda is None else self.lda.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusModels":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ValueError("not a compatible similarity model file")
        m = cls()
        m.config = TextModelConfig(**d["config"])
        m.vocab = list(d["vocab"])
        m.index = {t: i for i, t in enumerate(m.vocab)}
        m.idf_table = IdfTable(d["n_docs"], dict(zip(m.vocab, d["df"])))
        m.idf = np.array([m.idf_table.idf(t) for t in m.vocab])
        m.stopwords = frozenset(d["stopwords"])
        if d.get("singular_values") is not None:
            m.singular_values = np.asarray(d["singular_values"])
            basis = np.asarray(d["lsi_basis"], dtype=np.float64)
            m.lsi_basis = basis.reshape(len(m.vocab), -1) if basis.size else np.zeros((len(m.vocab), 0))
        if d.get("lda") is not None:
            m.lda = LdaModel.from_dict(d["lda"])
        return m

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CorpusModels":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def read_corpus(path: str | Path, tokenizer=None) -> list[list[str]]:
    """One document per line; whitespace-tokenized unless ``tokenizer`` is given.

    Tokens are normalized and punctuation-only tokens dropped.
    """
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = tokenizer(line) if tokenizer else line.split()
            docs.append([t for t in map(normalize, raw) if not is_placeholder(t)])
    return docs
