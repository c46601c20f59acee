"""Latent Dirichlet allocation by collapsed Gibbs sampling."""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure Python fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _sweep(words, docs, z, ndk, nkw, nk, alpha, beta, u, learn):
    """One Gibbs pass over every token; ``u`` holds one uniform draw per token.

    With ``learn`` false the topic-word counts stay frozen (inference).
    """
    K = nk.shape[0]
    V = nkw.shape[1]
    vbeta = V * beta
    p = np.empty(K)
    for n in range(words.shape[0]):
        w = words[n]
        d = docs[n]
        k = z[n]
        ndk[d, k] -= 1
        if learn:
            nkw[k, w] -= 1
            nk[k] -= 1
        total = 0.0
        for t in range(K):
            total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            p[t] = total
        r = u[n] * total
        k = K - 1
        for t in range(K):
            if r < p[t]:
                k = t
                break
        z[n] = k
        ndk[d, k] += 1
        if learn:
            nkw[k, w] += 1
            nk[k] += 1


class LdaModel:
    """Topic model over a fixed vocabulary.

    ``alpha`` defaults to ``50 / n_topics`` and ``beta`` to 0.01.
    """

    def __init__(self, n_topics: int, vocab_size: int, alpha: float | None = None,
                 beta: float = 0.01, seed: int = 0, infer_sweeps: int = 50):
        if n_topics < 1:
            raise ValueError("n_topics must be positive")
        self.n_topics = n_topics
        self.vocab_size = vocab_size
        self.alpha = 50.0 / n_topics if alpha is None else alpha
        self.beta = beta
        self.seed = seed
        self.infer_sweeps = infer_sweeps
        self.nkw = None
        self.nk = None

    @property
    def fitted(self) -> bool:
        return self.nkw is not None

    def fit(self, documents: list[list[int]], sweeps: int = 500) -> "LdaModel":
        rng = np.random.default_rng(self.seed)
        K = self.n_topics
        words = np.array([w for doc in documents for w in doc], dtype=np.int64)
        docs = np.array([d for d, doc in enumerate(documents) for _ in doc], dtype=np.int64)
        z = rng.integers(0, K, size=len(words)).astype(np.int64)
        ndk = np.zeros((len(documents), K), dtype=np.int64)
        nkw = np.zeros((K, self.vocab_size), dtype=np.int64)
        np.add.at(ndk, (docs, z), 1)
        np.add.at(nkw, (z, words), 1)
        nk = nkw.sum(axis=1)
        for _ in range(sweeps):
            _sweep(words, docs, z, ndk, nkw, nk, self.alpha, self.beta,
                   rng.random(len(words)), True)
        self.nkw, self.nk = nkw, nk
        return self

    def topic_word(self) -> np.ndarray:
        """Row-stochastic topic-word distributions."""
        self._check()
        return (self.nkw + self.beta) / (self.nk[:, None] + self.vocab_size * self.beta)

    def infer(self, word_ids: list[int]) -> np.ndarray:
        """Topic proportions of an unseen document.

        Runs ``infer_sweeps`` passes with the topic-word counts frozen and
        averages the posterior mean over the second half of them. A fresh
        generator seeded from the model seed makes the result a pure function
        of the input.
        """
        self._check()
        K = self.n_topics
        if not word_ids:
            return np.full(K, 1.0 / K)
        rng = np.random.default_rng(self.seed)
        words = np.asarray(word_ids, dtype=np.int64)
        docs = np.zeros(len(words), dtype=np.int64)
        z = rng.integers(0, K, size=len(words)).astype(np.int64)
        ndk = np.zeros((1, K), dtype=np.int64)
        np.add.at(ndk, (docs, z), 1)
        nkw, nk = self.nkw.copy(), self.nk.copy()
        burn = self.infer_sweeps // 2
        acc = np.zeros(K)
        kept = 0
        for s in range(self.infer_sweeps):
            _sweep(words, docs, z, ndk, nkw, nk, self.alpha, self.beta,
                   rng.random(len(words)), False)
            if s >= burn:
                acc += (ndk[0] + self.alpha) / (len(words) + K * self.alpha)
                kept += 1
        if kept == 0:
            acc = (ndk[0] + self.alpha) / (len(words) + K * self.alpha)
            kept = 1
        theta = acc / kept
        return theta / theta.sum()

    def _check(self):
        if not self.fitted:
            raise RuntimeError("LDA model is not fitted")

    def to_dict(self) -> dict:
        self._check()
        return {
            "n_topics": self.n_topics, "vocab_size": self.vocab_size,
            "alpha": self.alpha, "beta": self.beta, "seed": self.seed,
            "infer_sweeps": self.infer_sweeps, "nkw": self.nkw.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LdaModel":
        m = cls(d["n_topics"], d["vocab_size"], d["alpha"], d["beta"], d["seed"], d["infer_sweeps"])
        m.nkw = np.asarray(d["nkw"], dtype=np.int64).reshape(m.n_topics, m.vocab_size)
        m.nk = m.nkw.sum(axis=1)
        return m
