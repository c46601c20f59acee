"""Surface-form normalization shared by every lookup in the package."""

import unicodedata

PLACEHOLDER = "_"


def _is_meaningless(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def _fold_latin(ch: str) -> str:
    # only Latin letters are case-folded; CJK and other scripts pass through
    if ch.isascii() or "LATIN" in unicodedata.name(ch, ""):
        return ch.casefold()
    return ch


def normalize(surface: str) -> str:
    """Canonical key for a surface string.

    NFC-normalizes, trims surrounding whitespace, replaces every run of
    whitespace and/or punctuation with a single ``"_"`` and case-folds Latin
    letters.

    >>> normalize("  Hello,  World! ")
    'hello_world_'
    >>> normalize("方便面")
    '方便面'
    """
    s = unicodedata.normalize("NFC", surface).strip()
    out = []
    in_run = False
    for ch in s:
        if _is_meaningless(ch):
            if not in_run:
                out.append(PLACEHOLDER)
            in_run = True
        else:
            out.append(_fold_latin(ch))
            in_run = False
    return "".join(out)


def is_placeholder(term: str) -> bool:
    """True when a normalized term carries no content (empty or only ``_``)."""
    return not term.strip(PLACEHOLDER)

