"""Dictionary segmentation and n-gram candidate spans for KG retrieval."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from qedl.kg import KgStore
from qedl.text import normalize

UNK_POS = "UNK"
DEFAULT_MAX_N = 4
DEFAULT_CONTENT_POS = ("n", "v")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int
    pos: str = UNK_POS


@dataclass(frozen=True)
class CandidateSpan:
    start: int
    end: int
    surface: str
    token_span: tuple[int, int]  # first and last token index, inclusive

    @property
    def key(self) -> str:
        return normalize(self.surface)


def segment_fmm(text: str, lexicon: KgStore) -> list[Token]:
    """Forward maximum matching against the store's POS lexicon.

    Scans left to right taking the longest window whose normalized form is a
    lexicon entry; characters that start no entry become single-character
    ``UNK`` tokens. Token surfaces concatenate back to ``text``.
    """
    tokens = []
    n = len(text)
    max_len = lexicon.max_lexicon_len
    i = 0
    while i < n:
        match = 0
        pos = UNK_POS
        for length in range(min(max_len, n - i), 0, -1):
            window = text[i:i + length]
            # a window padded with whitespace would alias the bare entry
            if window != window.strip():
                continue
            key = normalize(window)
            if key in lexicon.lexicon:
                match = length
                pos = lexicon.lexicon[key] or UNK_POS
                break
        if match == 0:
            match = 1
            pos = UNK_POS
        tokens.append(Token(text[i:i + match], i, i + match, pos))
        i += match
    return tokens


def has_content(tokens: Sequence[Token], surface: str,
                content_pos: Sequence[str] = DEFAULT_CONTENT_POS) -> bool:
    """Noun/verb POS (by prefix) on some token, or a numeral in the surface."""
    if any(t.pos != UNK_POS and t.pos.startswith(tuple(content_pos)) for t in tokens):
        return True
    return any(ch.isnumeric() for ch in surface)


def generate_candidates(
    text: str,
    tokens: Sequence[Token],
    store: KgStore,
    max_n: int = DEFAULT_MAX_N,
    content_pos: Sequence[str] = DEFAULT_CONTENT_POS,
) -> list[CandidateSpan]:
    """Token n-grams (n <= max_n) that survive the KG retrieval filters.

    Filters, in order: normalize the surface; drop single-character
    1-grams; drop grams with no noun/verb token and no numeral; keep grams
    whose normalized surface is a KG name or alias.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    out = []
    for i in range(len(tokens)):
        for n in range(1, max_n + 1):
            j = i + n - 1
            if j >= len(tokens):
                break
            start, end = tokens[i].start, tokens[j].end
            surface = text[start:end]
            key = normalize(surface)
            if n == 1 and len(surface) == 1:
                continue
            if not has_content(tokens[i:j + 1], surface, content_pos):
                continue
            if not store.surface_index.get(key):
                continue
            out.append(CandidateSpan(start, end, surface, (i, j)))
    out.sort(key=lambda c: (c.start, c.end))
    return out
