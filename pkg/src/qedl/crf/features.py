"""Per-character observations and feature templates for the CRF.

Template groups (frozen; model files record which groups were active):

``char``
    character n-grams covering the position, N = 1..4, one template per
    (N, offset) pair: ``c{N}@{off}`` is the gram starting ``off`` characters
    relative to the position (``-N+1 <= off <= 0``). Sequence edges are
    padded with ``BOS``/``EOS`` marks.
``wb``
    B/I/E/S position of the character inside its token.
``pos``
    POS tag of the containing token.
``sw``
    whether the containing token is a stopword.
``df``
    bucketed document frequency of the containing token,
    ``min(DF_BUCKETS - 1, floor(log2(df + 1)))``.
``kg``
    BIOES tag of KG retrieval spans at the position and its two neighbours.

A ``bias`` feature is always present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from qedl.crf.bioes import bioes_encode, resolve_overlaps
from qedl.segmentation import CandidateSpan, Token
from qedl.text import normalize

DF_BUCKETS = 8
BOS = "␂"
EOS = "␃"
NGRAM_TEMPLATES = tuple(
    (n, off) for n in range(1, 5) for off in range(-(n - 1), 1)
)
FEATURE_GROUPS = ("char", "wb", "pos", "sw", "df", "kg")
BASE_GROUPS = ("char", "wb", "pos", "sw", "df")


@dataclass(frozen=True)
class CharObservation:
    char: str
    char_ngrams: tuple[str, ...]  # aligned with NGRAM_TEMPLATES
    word_boundary: str
    pos: str
    is_stopword: bool
    df_bucket: int
    kg_tag: str = "O"


def df_bucket(df: int, buckets: int = DF_BUCKETS) -> int:
    return min(buckets - 1, int(math.floor(math.log2(df + 1))))


def _token_boundary(k: int, length: int) -> str:
    if length == 1:
        return "S"
    if k == 0:
        return "B"
    return "E" if k == length - 1 else "I"


def kg_tags(length: int, kg_spans: Iterable[CandidateSpan | tuple[int, int]]) -> list[str]:
    spans = [(s.start, s.end) if isinstance(s, CandidateSpan) else tuple(s) for s in kg_spans]
    return bioes_encode(length, resolve_overlaps(spans))


def extract_features(
    question: str,
    tokens: Sequence[Token],
    kg_spans: Iterable[CandidateSpan | tuple[int, int]] | None = None,
    df_table: Mapping[str, int] | None = None,
    stopwords: Iterable[str] = (),
    buckets: int = DF_BUCKETS,
) -> list[CharObservation]:
    """One :class:`CharObservation` per character of ``question``."""
    n = len(question)
    df_table = df_table or {}
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    tags = kg_tags(n, kg_spans or ())

    padded = BOS * 3 + question + EOS * 3
    obs = []
    for tok in tokens:
        if tok.start != len(obs):
            raise ValueError("tokens do not segment the question contiguously")
        key = normalize(tok.surface)
        sw = key in stop
        bucket = df_bucket(df_table.get(key, 0), buckets)
        width = tok.end - tok.start
        for k, i in enumerate(range(tok.start, tok.end)):
            grams = tuple(padded[i + 3 + off:i + 3 + off + size] for size, off in NGRAM_TEMPLATES)
            obs.append(CharObservation(
                char=question[i],
                char_ngrams=grams,
                word_boundary=_token_boundary(k, width),
                pos=tok.pos,
                is_stopword=sw,
                df_bucket=bucket,
                kg_tag=tags[i],
            ))
    if len(obs) != n:
        raise ValueError("tokens do not cover the question")
    return obs


def feature_strings(observations: Sequence[CharObservation],
                    groups: Sequence[str] = FEATURE_GROUPS) -> list[list[str]]:
    """Expand observations into feature names using the active template groups."""
    unknown = set(groups) - set(FEATURE_GROUPS)
    if unknown:
        raise ValueError(f"unknown feature groups: {sorted(unknown)}")
    active = set(groups)
    out = []
    last = len(observations) - 1
    for i, ob in enumerate(observations):
        feats = ["bias"]
        if "char" in active:
            feats.extend(f"c{size}@{off}={g}" for (size, off), g in zip(NGRAM_TEMPLATES, ob.char_ngrams))
        if "wb" in active:
            feats.append(f"wb={ob.word_boundary}")
        if "pos" in active:
            feats.append(f"pos={ob.pos}")
        if "sw" in active:
            feats.append(f"sw={int(ob.is_stopword)}")
        if "df" in active:
            feats.append(f"df={ob.df_bucket}")
        if "kg" in active:
            feats.append(f"kg={ob.kg_tag}")
            feats.append(f"kg-1={observations[i - 1].kg_tag if i > 0 else BOS}")
            feats.append(f"kg+1={observations[i + 1].kg_tag if i < last else EOS}")
        out.append(feats)
    return out
