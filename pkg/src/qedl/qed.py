"""Question entity discovery: KG retrieval, CRF, ensemble and lexicon iteration."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from qedl.crf import (
    BASE_GROUPS,
    DF_BUCKETS,
    CrfModel,
    bioes_decode,
    bioes_encode,
    extract_features,
    resolve_overlaps,
    train_crf,
    viterbi,
)
from qedl.kg import KgStore
from qedl.questions import Question
from qedl.segmentation import DEFAULT_MAX_N, generate_candidates, segment_fmm

log = logging.getLogger(__name__)

KG_RETRIEVAL = "KG_RETRIEVAL"
CRF = "CRF"
LEXICON_ITERATION = "LEXICON_ITERATION"
SOURCES = (CRF, LEXICON_ITERATION, KG_RETRIEVAL)  # pipeline order for dedup

METHODS = ("kg", "crf", "ensemble", "iteration")


@dataclass(frozen=True, order=True)
class Mention:
    start: int
    end: int
    surface: str
    source: str = KG_RETRIEVAL

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def overlaps(self, other: "Mention") -> bool:
        return self.start < other.end and other.start < self.end

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "surface": self.surface, "source": self.source}

    @classmethod
    def from_dict(cls, d: dict) -> "Mention":
        return cls(int(d["start"]), int(d["end"]), d["surface"], d.get("source", KG_RETRIEVAL))


def discover_kg(question: str, store: KgStore, max_n: int = DEFAULT_MAX_N) -> list[Mention]:
    """All KG-matching n-gram spans; nested and overlapping matches are kept."""
    tokens = segment_fmm(question, store)
    return [Mention(c.start, c.end, c.surface, KG_RETRIEVAL)
            for c in generate_candidates(question, tokens, store, max_n)]


def observations_for(question: str, store: KgStore, df_table: Mapping[str, int] | None,
                     with_kg: bool, max_n: int = DEFAULT_MAX_N, df_buckets: int = DF_BUCKETS):
    tokens = segment_fmm(question, store)
    kg_spans = generate_candidates(question, tokens, store, max_n) if with_kg else ()
    return extract_features(question, tokens, kg_spans, df_table, store.stopwords, df_buckets)


def discover_crf(question: str, model: CrfModel, store: KgStore,
                 df_table: Mapping[str, int] | None = None,
                 max_n: int = DEFAULT_MAX_N) -> list[Mention]:
    """Viterbi-decode the question; the ensemble method when the model uses the kg column."""
    if not question:
        return []
    buckets = int(model.meta.get("df_buckets", DF_BUCKETS))
    obs = observations_for(question, store, df_table, "kg" in model.groups, max_n, buckets)
    return [Mention(s, e, question[s:e], CRF) for s, e in bioes_decode(viterbi(model, obs))]


def one_step_iteration(crf_mentions: Iterable[Mention], kg_mentions: Iterable[Mention],
                       store: KgStore) -> list[Mention]:
    """Add lexicon-confirmed KG mentions that no CRF mention touches.

    A KG mention counts as ignored by the CRF when it shares no character
    with any CRF mention.
    """
    crf_mentions = list(crf_mentions)
    result = list(crf_mentions)
    for m in kg_mentions:
        if any(m.overlaps(c) for c in crf_mentions):
            continue
        if store.in_lexicon(m.surface):
            result.append(Mention(m.start, m.end, m.surface, LEXICON_ITERATION))
    return dedupe(result)


def dedupe(mentions: Iterable[Mention]) -> list[Mention]:
    """One mention per span, keeping the earliest source in pipeline order."""
    best: dict[tuple[int, int], Mention] = {}
    for m in mentions:
        cur = best.get(m.span)
        if cur is None or SOURCES.index(m.source) < SOURCES.index(cur.source):
            best[m.span] = m
    return sorted(best.values(), key=lambda m: (m.start, m.end))


# -- training ----------------------------------------------------------------


def gold_labels(question: Question) -> list[str]:
    spans = question.gold_spans()
    clean = resolve_overlaps(spans)
    if len(clean) != len(set(spans)):
        log.warning("question %s: overlapping gold spans reduced to %s", question.id, clean)
    return bioes_encode(len(question.text), clean)


def build_corpus(questions: Sequence[Question], store: KgStore,
                 df_table: Mapping[str, int] | None, with_kg: bool,
                 max_n: int = DEFAULT_MAX_N, df_buckets: int = DF_BUCKETS):
    return [(observations_for(q.text, store, df_table, with_kg, max_n, df_buckets), gold_labels(q))
            for q in questions if q.text]


def train_qed(questions: Sequence[Question], store: KgStore,
              df_table: Mapping[str, int] | None = None, method: str = "ensemble",
              groups: Sequence[str] = BASE_GROUPS, l2: float = 0.1, epochs: int = 200,
              seed: int = 0, max_n: int = DEFAULT_MAX_N, df_buckets: int = DF_BUCKETS,
              **kw) -> CrfModel:
    """Train the plain CRF (``method="crf"``) or the KG-feature ensemble."""
    if method not in ("crf", "ensemble"):
        raise ValueError(f"unknown QED training method {method!r}")
    groups = tuple(g for g in groups if g != "kg")
    with_kg = method == "ensemble"
    if with_kg:
        groups = groups + ("kg",)
    corpus = build_corpus(questions, store, df_table, with_kg, max_n, df_buckets)
    model = train_crf(corpus, l2=l2, epochs=epochs, seed=seed, groups=groups, **kw)
    model.meta["method"] = method
    model.meta["df_buckets"] = df_buckets
    return model


@dataclass
class Discoverer:
    """Runs one QED method over questions with a shared store and model."""

    store: KgStore
    model: CrfModel | None = None
    df_table: Mapping[str, int] | None = None
    max_n: int = DEFAULT_MAX_N

    def __call__(self, question: str, method: str = "iteration") -> list[Mention]:
        if method == "kg":
            return discover_kg(question, self.store, self.max_n)
        if method not in METHODS:
            raise ValueError(f"unknown discovery method {method!r}")
        if self.model is None:
            raise ValueError(f"method {method!r} needs a trained CRF model")
        crf = discover_crf(question, self.model, self.store, self.df_table, self.max_n)
        if method != "iteration":
            return crf
        return one_step_iteration(crf, discover_kg(question, self.store, self.max_n), self.store)
