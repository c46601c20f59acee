"""Linear-chain CRF: scoring, forward algorithm, Viterbi and training."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from qedl.crf.bioes import LABEL_INDEX, LABELS
from qedl.crf.features import FEATURE_GROUPS, CharObservation, feature_strings

log = logging.getLogger(__name__)

N_LABELS = len(LABELS)
FORMAT = "qedl-crf"
FORMAT_VERSION = 1


class CrfModelError(ValueError):
    pass


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def log_partition_scores(unary: np.ndarray, trans: np.ndarray) -> float:
    """log of the sum over label paths of exp(path score), for a (T, L) unary table."""
    if unary.shape[0] == 0:
        raise ValueError("log partition of an empty sequence")
    alpha = unary[0]
    for t in range(1, unary.shape[0]):
        alpha = unary[t] + _logsumexp(alpha[:, None] + trans, axis=0)
    return float(_logsumexp(alpha, axis=0))


def viterbi_scores(unary: np.ndarray, trans: np.ndarray) -> list[int]:
    """Best path indices; ties go to the lower label index at every step."""
    T = unary.shape[0]
    if T == 0:
        raise ValueError("viterbi on an empty sequence")
    delta = unary[0].copy()
    back = np.zeros((T, unary.shape[1]), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + trans
        # np.argmax returns the first maximum, i.e. the lowest index
        back[t] = np.argmax(cand, axis=0)
        delta = unary[t] + cand[back[t], np.arange(unary.shape[1])]
    path = [int(np.argmax(delta))]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    return path[::-1]


def path_score(unary: np.ndarray, trans: np.ndarray, path: Sequence[int]) -> float:
    s = sum(unary[t, y] for t, y in enumerate(path))
    s += sum(trans[path[t - 1], path[t]] for t in range(1, len(path)))
    return float(s)


@dataclass
class CrfModel:
    """Weights of a linear-chain CRF over BIOES labels.

    ``unary[f, y]`` is the weight of feature ``features[f]`` firing with label
    ``y``; ``trans[y', y]`` scores the label bigram. Features unseen during
    training are ignored when decoding.
    """

    features: list[str]
    unary: np.ndarray
    trans: np.ndarray
    groups: tuple[str, ...] = FEATURE_GROUPS
    l2: float = 0.1
    meta: dict = field(default_factory=dict)
    history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.unary = np.asarray(self.unary, dtype=np.float64)
        self.trans = np.asarray(self.trans, dtype=np.float64)
        if self.unary.size != len(self.features) * N_LABELS:
            raise CrfModelError("unary table does not match the feature list")
        if self.trans.size != N_LABELS * N_LABELS:
            raise CrfModelError("transition table must be 5x5")
        self.unary = self.unary.reshape(len(self.features), N_LABELS)
        self.trans = self.trans.reshape(N_LABELS, N_LABELS)
        if not (np.all(np.isfinite(self.unary)) and np.all(np.isfinite(self.trans))):
            raise CrfModelError("non-finite CRF weights")
        self.groups = tuple(self.groups)
        self.index = {f: i for i, f in enumerate(self.features)}
        if len(self.index) != len(self.features):
            raise CrfModelError("duplicate feature names")

    @classmethod
    def zeros(cls, features: Sequence[str], groups=FEATURE_GROUPS, **kw) -> "CrfModel":
        return cls(list(features), np.zeros((len(features), N_LABELS)),
                   np.zeros((N_LABELS, N_LABELS)), groups, **kw)

    @property
    def n_params(self) -> int:
        return self.unary.size + self.trans.size

    def weights(self) -> np.ndarray:
        return np.concatenate([self.unary.ravel(), self.trans.ravel()])

    def with_weights(self, w: np.ndarray) -> "CrfModel":
        k = self.unary.size
        return CrfModel(self.features, w[:k].copy(), w[k:].copy(), self.groups, self.l2, dict(self.meta))

    def feature_ids(self, observations: Sequence[CharObservation]) -> list[list[int]]:
        idx = self.index
        return [[idx[f] for f in feats if f in idx]
                for feats in feature_strings(observations, self.groups)]

    def unary_scores(self, observations: Sequence[CharObservation]) -> np.ndarray:
        ids = self.feature_ids(observations)
        out = np.zeros((len(ids), N_LABELS))
        for t, row in enumerate(ids):
            if row:
                out[t] = self.unary[row].sum(axis=0)
        return out

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "labels": list(LABELS),
            "templates": list(self.groups),
            "l2": self.l2,
            "meta": self.meta,
            "features": self.features,
            "unary": self.unary.tolist(),
            "transitions": self.trans.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CrfModel":
        if d.get("format") != FORMAT:
            raise CrfModelError("not a CRF model file")
        if d.get("version") != FORMAT_VERSION:
            raise CrfModelError(f"unsupported CRF model version {d.get('version')!r}")
        if tuple(d.get("labels", ())) != LABELS:
            raise CrfModelError(f"label order {d.get('labels')!r} does not match {list(LABELS)}")
        features = d["features"]
        unary = np.asarray(d["unary"], dtype=np.float64).reshape(len(features), N_LABELS)
        return cls(features, unary, d["transitions"], tuple(d["templates"]), d.get("l2", 0.0),
                   d.get("meta", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=1) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CrfModel":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CrfModelError(f"{path}: malformed model file ({exc.msg})") from None
        return cls.from_dict(d)


def log_partition(model: CrfModel, observations: Sequence[CharObservation]) -> float:
    return log_partition_scores(model.unary_scores(observations), model.trans)


def viterbi(model: CrfModel, observations: Sequence[CharObservation]) -> list[str]:
    if not observations:
        raise ValueError("viterbi on an empty sequence")
    return [LABELS[y] for y in viterbi_scores(model.unary_scores(observations), model.trans)]


# -- training ---------------------------------------------------------------


class _Batch:
    """Padded, featurized corpus for vectorized forward-backward."""

    def __init__(self, X: sp.csr_matrix, gold: np.ndarray, lengths: np.ndarray):
        self.X = X
        self.gold = gold
        self.lengths = lengths
        self.B = len(lengths)
        self.T = int(lengths.max())
        self.offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        t = np.arange(self.T)
        self.mask = t[None, :] < lengths[:, None]
        self.rows, self.cols = np.nonzero(self.mask)  # row-major == corpus order
        self.gold_onehot = np.zeros((len(gold), N_LABELS))
        self.gold_onehot[np.arange(len(gold)), gold] = 1.0
        self.emp_unary = np.asarray(X.T @ self.gold_onehot)
        emp_trans = np.zeros((N_LABELS, N_LABELS))
        for b in range(self.B):
            seq = gold[self.offsets[b]:self.offsets[b] + lengths[b]]
            np.add.at(emp_trans, (seq[:-1], seq[1:]), 1.0)
        self.emp_trans = emp_trans

    def padded(self, flat: np.ndarray) -> np.ndarray:
        out = np.zeros((self.B, self.T, N_LABELS))
        out[self.rows, self.cols] = flat
        return out


def _build_batch(model: CrfModel, corpus) -> _Batch:
    rows, cols, gold, lengths = [], [], [], []
    r = 0
    for observations, labels in corpus:
        if len(observations) != len(labels):
            raise ValueError("observation and label sequences differ in length")
        if not observations:
            raise ValueError("empty training sequence")
        for ids, lab in zip(model.feature_ids(observations), labels):
            rows.extend([r] * len(ids))
            cols.extend(ids)
            gold.append(LABEL_INDEX[lab] if isinstance(lab, str) else int(lab))
            r += 1
        lengths.append(len(observations))
    data = np.ones(len(rows))
    X = sp.csr_matrix((data, (rows, cols)), shape=(r, len(model.features)))
    return _Batch(X, np.asarray(gold, dtype=np.int64), np.asarray(lengths, dtype=np.int64))


def _objective_and_gradient(w: np.ndarray, batch: _Batch, l2: float, n_feat: int):
    k = n_feat * N_LABELS
    W = w[:k].reshape(n_feat, N_LABELS)
    trans = w[k:].reshape(N_LABELS, N_LABELS)
    flat_u = np.asarray(batch.X @ W)
    U = batch.padded(flat_u)
    B, T, mask = batch.B, batch.T, batch.mask

    alpha = np.zeros((B, T, N_LABELS))
    alpha[:, 0] = U[:, 0]
    for t in range(1, T):
        new = U[:, t] + _logsumexp(alpha[:, t - 1, :, None] + trans[None], axis=1)
        alpha[:, t] = np.where(mask[:, t, None], new, alpha[:, t - 1])
    logZ = _logsumexp(alpha[:, T - 1], axis=1)  # padded steps carry alpha forward

    beta = np.zeros((B, T, N_LABELS))
    for t in range(T - 2, -1, -1):
        nxt = U[:, t + 1] + beta[:, t + 1]
        new = _logsumexp(trans[None] + nxt[:, None, :], axis=2)
        beta[:, t] = np.where(mask[:, t + 1, None], new, 0.0)

    node = np.exp(alpha + beta - logZ[:, None, None])
    exp_unary = batch.X.T @ node[batch.rows, batch.cols]
    exp_trans = np.zeros((N_LABELS, N_LABELS))
    for t in range(1, T):
        m = mask[:, t]
        if not m.any():
            break
        e = (alpha[m, t - 1, :, None] + trans[None] + (U[m, t] + beta[m, t])[:, None, :]
             - logZ[m, None, None])
        exp_trans += np.exp(e).sum(axis=0)

    gold_score = float(np.sum(flat_u[np.arange(len(batch.gold)), batch.gold]))
    gold_score += float(np.sum(batch.emp_trans * trans))
    obj = gold_score - float(logZ.sum()) - l2 * float(w @ w)
    grad = np.concatenate([
        (batch.emp_unary - exp_unary).ravel(),
        (batch.emp_trans - exp_trans).ravel(),
    ]) - 2.0 * l2 * w
    return obj, grad


def crf_objective(model: CrfModel, corpus, l2: float | None = None, w: np.ndarray | None = None):
    """Penalized log-likelihood and its gradient at ``w`` (default: model weights)."""
    batch = _build_batch(model, corpus)
    w = model.weights() if w is None else np.asarray(w, dtype=np.float64)
    return _objective_and_gradient(w, batch, model.l2 if l2 is None else l2, len(model.features))


def objective_function(model: CrfModel, corpus, l2: float | None = None):
    """``w -> (objective, gradient)`` with the corpus featurized once."""
    batch = _build_batch(model, corpus)
    lam = model.l2 if l2 is None else l2
    n_feat = len(model.features)
    return lambda w: _objective_and_gradient(np.asarray(w, dtype=np.float64), batch, lam, n_feat)


def collect_features(corpus, groups: Sequence[str]) -> list[str]:
    seen: dict[str, None] = {}
    for observations, _ in corpus:
        for feats in feature_strings(observations, groups):
            for f in feats:
                seen.setdefault(f, None)
    return list(seen)


def train_crf(
    corpus,
    l2: float = 0.1,
    epochs: int = 200,
    seed: int = 0,
    groups: Sequence[str] = FEATURE_GROUPS,
    step: float = 1.0,
    max_halvings: int = 40,
) -> CrfModel:
    """Fit CRF weights by full-batch gradient ascent.

    Maximizes ``sum(log p(gold | x)) - l2 * ||w||^2``. The gradient is scaled
    by the number of sequences; when a step would lower the objective the
    step size is halved and the step retried, so the objective never
    decreases. ``seed`` is recorded for provenance; the procedure itself is
    deterministic.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("cannot train a CRF on an empty corpus")
    if l2 < 0:
        raise ValueError("l2 must be non-negative")
    model = CrfModel.zeros(collect_features(corpus, groups), groups, l2=l2)
    batch = _build_batch(model, corpus)
    n_feat = len(model.features)
    w = np.zeros(model.n_params)
    obj, grad = _objective_and_gradient(w, batch, l2, n_feat)
    history = [obj]
    scale = 1.0 / len(corpus)
    eta = step
    for epoch in range(epochs):
        for _ in range(max_halvings):
            w_new = w + eta * scale * grad
            obj_new, grad_new = _objective_and_gradient(w_new, batch, l2, n_feat)
            if obj_new >= obj:
                break
            eta *= 0.5
        else:
            log.info("step size underflow at epoch %d; stopping", epoch)
            break
        w, obj, grad = w_new, obj_new, grad_new
        history.append(obj)
    if epochs == 0:
        log.warning("epochs=0: emitting an all-zero CRF model")
    trained = model.with_weights(w)
    trained.meta = {
        "epochs": epochs,
        "seed": seed,
        "step": step,
        "final_step": eta,
        "initial_objective": history[0],
        "final_objective": history[-1],
        "n_sequences": len(corpus),
    }
    log.info("CRF trained: %d features, objective %.4f -> %.4f",
             n_feat, history[0], history[-1])
    trained.history = history
    return trained
