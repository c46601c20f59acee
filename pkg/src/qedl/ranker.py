"""Entity linking: candidates, ranking features and a pairwise ranking SVM."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from qedl.kg import KgEntity, KgStore
from qedl.qed import Mention
from qedl.questions import Question
from qedl.segmentation import segment_fmm
from qedl.similarity import (
    B,
    K1,
    CorpusModels,
    EmbeddingTable,
    popularity_feature,
    semantic_similarity,
)
from qedl.text import is_placeholder, normalize

log = logging.getLogger(__name__)

LAYOUT = (
    "semantic",
    "ts_qen_tfidf", "ts_qen_lsi", "ts_qen_lda",
    "ts_qea_tfidf", "ts_qea_lsi", "ts_qea_lda",
    "popularity",
)
FEATURE_SETS = {
    "semantic": (0,),
    "ts_qen": (1, 2, 3),
    "ts_qea": (4, 5, 6),
    "popularity": (7,),
}
FORMAT = "qedl-ranker"
FORMAT_VERSION = 1


def feature_mask(sets: Iterable[str] | None) -> np.ndarray:
    """Boolean mask over :data:`LAYOUT` enabling the named feature sets (all if None)."""
    if sets is None:
        return np.ones(len(LAYOUT), dtype=bool)
    mask = np.zeros(len(LAYOUT), dtype=bool)
    for name in sets:
        if name not in FEATURE_SETS:
            raise ValueError(f"unknown feature set {name!r}; choose from {sorted(FEATURE_SETS)}")
        mask[list(FEATURE_SETS[name])] = True
    return mask


def generate_el_candidates(mention: Mention | str, store: KgStore) -> list[KgEntity]:
    surface = mention if isinstance(mention, str) else mention.surface
    return [store.entity(i) for i in sorted(store.lookup_surface(surface))]


@dataclass
class SimilarityContext:
    """Everything needed to compute ranking features.

    ``avge_mode`` selects the average entity length of the saliency score:
    ``"candidates"`` averages over the current mention's candidate set,
    ``"global"`` over the whole KG.
    """

    store: KgStore
    embeddings: EmbeddingTable
    corpus: CorpusModels
    k1: float = K1
    b: float = B
    avge_mode: str = "candidates"

    def __post_init__(self):
        if self.avge_mode not in ("candidates", "global"):
            raise ValueError(f"unknown avge mode {self.avge_mode!r}")
        self._terms = lru_cache(maxsize=100_000)(self._terms_uncached)
        self._global_avge = None

    def _terms_uncached(self, text: str) -> tuple[str, ...]:
        toks = (normalize(t.surface) for t in segment_fmm(text, self.store))
        return tuple(t for t in toks if not is_placeholder(t))

    def terms(self, text: str) -> tuple[str, ...]:
        return self._terms(text)

    def name_terms(self, entity: KgEntity) -> tuple[str, ...]:
        return self.terms(entity.name)

    def attribute_terms(self, entity: KgEntity) -> tuple[str, ...]:
        return tuple(t for v in entity.attributes.values() for t in self.terms(v))

    def entity_terms(self, entity: KgEntity) -> tuple[str, ...]:
        return self.name_terms(entity) + self.attribute_terms(entity)

    def global_avge(self) -> float:
        if self._global_avge is None:
            lens = [len(self.entity_terms(e)) for e in self.store.entities.values()]
            self._global_avge = float(np.mean(lens)) if lens else 1.0
        return self._global_avge

    def avge(self, candidates: Sequence[KgEntity]) -> float:
        if self.avge_mode == "global" or not candidates:
            return max(self.global_avge(), 1.0)
        return max(float(np.mean([len(self.entity_terms(e)) for e in candidates])), 1.0)


def build_features(question: str, mention: Mention | None, entity: KgEntity,
                   ctx: SimilarityContext, avge: float | None = None) -> np.ndarray:
    """The 8-slot feature vector of (question, candidate) in :data:`LAYOUT` order.

    TS_QEN compares the question with the entity name and TS_QEA with the
    concatenated attribute values; an empty side yields 0.
    """
    q = ctx.terms(question)
    name = ctx.name_terms(entity)
    attrs = ctx.attribute_terms(entity)
    e_terms = name + attrs
    if avge is None:
        avge = ctx.avge([entity])
    corpus = ctx.corpus
    sem = semantic_similarity(q, e_terms, ctx.embeddings, corpus.idf_table, ctx.k1, ctx.b, avge) \
        if e_terms else 0.0

    def text_sims(other):
        if not q or not other:
            return (0.0, 0.0, 0.0)
        return (corpus.tfidf_similarity(q, other), corpus.lsi_similarity(q, other),
                corpus.lda_similarity(q, other))

    vec = np.array((sem, *text_sims(name), *text_sims(attrs), popularity_feature(entity)))
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"non-finite feature for entity {entity.id!r}")
    return vec


def mention_features(question: str, mention: Mention, ctx: SimilarityContext
                     ) -> list[tuple[KgEntity, np.ndarray]]:
    cands = generate_el_candidates(mention, ctx.store)
    avge = ctx.avge(cands)
    return [(e, build_features(question, mention, e, ctx, avge)) for e in cands]


# -- model ---------------------------------------------------------------------


@dataclass
class RankingExample:
    query_id: str
    gold_id: str
    candidates: dict[str, np.ndarray]

    def negatives(self) -> list[str]:
        return sorted(i for i in self.candidates if i != self.gold_id)


@dataclass
class RankModel:
    """Linear scorer over z-normalized ranking features.

    Disabled feature sets (``mask``) are zeroed before normalization.
    """

    weights: np.ndarray
    mean: np.ndarray = field(default_factory=lambda: np.zeros(len(LAYOUT)))
    std: np.ndarray = field(default_factory=lambda: np.ones(len(LAYOUT)))
    mask: np.ndarray = field(default_factory=lambda: np.ones(len(LAYOUT), dtype=bool))
    meta: dict = field(default_factory=dict)
    history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        for name in ("weights", "mean", "std", "mask"):
            if getattr(self, name).shape != (len(LAYOUT),):
                raise ValueError(f"{name} must have length {len(LAYOUT)}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite ranking weights")

    def masked(self, x) -> np.ndarray:
        return np.where(self.mask, np.asarray(x, dtype=np.float64), 0.0)

    def transform(self, x) -> np.ndarray:
        return (self.masked(x) - self.mean) / self.std

    def score(self, x) -> float:
        return float(self.weights @ self.transform(x))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT, "version": FORMAT_VERSION, "layout": list(LAYOUT),
            "weights": self.weights.tolist(), "mean": self.mean.tolist(),
            "std": self.std.tolist(), "mask": self.mask.tolist(), "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankModel":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ValueError("not a compatible ranking model file")
        if tuple(d.get("layout", ())) != LAYOUT:
            raise ValueError(f"feature layout {d.get('layout')!r} does not match {list(LAYOUT)}")
        return cls(d["weights"], d["mean"], d["std"], d["mask"], d.get("meta", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RankModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def pairwise_objective(w: np.ndarray, diffs: np.ndarray, l2: float) -> float:
    """``sum(max(0, 1 - w.d)) + l2 * |w|^2`` over gold-minus-negative differences."""
    margins = 1.0 - diffs @ w
    return float(np.maximum(margins, 0.0).sum() + l2 * (w @ w))


def pairwise_subgradient(w: np.ndarray, diffs: np.ndarray, l2: float) -> np.ndarray:
    active = (1.0 - diffs @ w) > 0
    return -diffs[active].sum(axis=0) + 2.0 * l2 * w


def _pair_differences(examples: Sequence[RankingExample], model: RankModel) -> np.ndarray:
    rows = []
    for ex in examples:
        g = model.transform(ex.candidates[ex.gold_id])
        for neg in ex.negatives():
            rows.append(g - model.transform(ex.candidates[neg]))
    return np.asarray(rows).reshape(-1, len(LAYOUT))


def train_ranker(examples: Iterable[RankingExample], l2: float = 0.01, epochs: int = 50,
                 seed: int = 0, eta0: float = 0.1, feature_sets: Iterable[str] | None = None
                 ) -> RankModel:
    """Pairwise ranking SVM by stochastic subgradient descent.

    Pairs are (gold, negative) for every non-gold candidate. Each epoch
    visits the pairs in a seeded random order with step
    ``eta0 / (1 + epoch / epochs)``; the L2 term is applied as a proximal
    shrink so very large ``l2`` stays stable.
    """
    examples = list(examples)
    if not examples:
        raise ValueError("cannot train a ranker on an empty dataset")
    usable = []
    for ex in examples:
        if ex.gold_id not in ex.candidates:
            log.debug("skipping %s: gold entity not among candidates", ex.query_id)
            continue
        if not ex.negatives():
            continue
        usable.append(ex)
    mask = feature_mask(feature_sets)
    model = RankModel(np.zeros(len(LAYOUT)), mask=mask)
    if usable:
        X = np.array([model.masked(v) for ex in usable for v in ex.candidates.values()])
        std = X.std(axis=0)
        model.mean = X.mean(axis=0)
        model.std = np.where(std > 0, std, 1.0)
    diffs = _pair_differences(usable, model)
    n_pairs = len(diffs)
    rng = np.random.default_rng(seed)
    w = np.zeros(len(LAYOUT))
    history = [pairwise_objective(w, diffs, l2)]
    shrink_scale = 2.0 * l2 / max(n_pairs, 1)
    for epoch in range(epochs):
        eta = eta0 / (1.0 + epoch / max(epochs, 1))
        for p in rng.permutation(n_pairs):
            d = diffs[p]
            if d @ w < 1.0:
                w = w + eta * d
            w = w / (1.0 + eta * shrink_scale)
        history.append(pairwise_objective(w, diffs, l2))
    model.weights = w
    model.meta = {"l2": l2, "epochs": epochs, "seed": seed, "eta0": eta0, "pairs": n_pairs,
                  "queries": len(usable), "skipped": len(examples) - len(usable),
                  "initial_loss": history[0], "final_loss": history[-1],
                  "feature_sets": sorted(feature_sets) if feature_sets is not None else sorted(FEATURE_SETS)}
    model.history = history
    log.info("ranker trained on %d pairs: loss %.4f -> %.4f", n_pairs, history[0], history[-1])
    return model


def rank_candidates(model: RankModel, candidates: Iterable[tuple[KgEntity | str, np.ndarray]]
                    ) -> list[tuple[str, float]]:
    """Candidates by descending score; exact ties go to the smaller entity id."""
    scored = []
    for ent, x in candidates:
        eid = ent if isinstance(ent, str) else ent.id
        scored.append((eid, model.score(x)))
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored


# -- dataset assembly ------------------------------------------------------------


def build_examples(questions: Sequence[Question], ctx: SimilarityContext) -> list[RankingExample]:
    """Ranking examples from gold mentions that carry a KB id."""
    out = []
    for q in questions:
        for k, gm in enumerate(q.entities):
            if gm.kb_id is None:
                continue
            m = Mention(gm.start, gm.end, gm.mention)
            feats = {e.id: x for e, x in mention_features(q.text, m, ctx)}
            out.append(RankingExample(f"{q.id}#{k}", gm.kb_id, feats))
    return out


def link_mention(question: str, mention: Mention, model: RankModel, ctx: SimilarityContext
                 ) -> list[dict]:
    feats = mention_features(question, mention, ctx)
    by_id = {e.id: x for e, x in feats}
    return [{"entity_id": eid, "score": score, "features": model.masked(by_id[eid]).tolist()}
            for eid, score in rank_candidates(model, feats)]
