"""BIOES span codec."""

from __future__ import annotations

from typing import Iterable, Sequence

LABELS = ("B", "I", "O", "E", "S")
LABEL_INDEX = {lab: i for i, lab in enumerate(LABELS)}

Span = tuple[int, int]


def bioes_encode(length: int, spans: Iterable[Span]) -> list[str]:
    """Label a sequence of ``length`` characters from half-open spans.

    Raises ValueError for empty, out-of-range or overlapping spans.
    """
    labels = ["O"] * length
    last_end = -1
    for start, end in sorted(spans):
        if not 0 <= start < end <= length:
            raise ValueError(f"span ({start}, {end}) out of range for length {length}")
        if start < last_end:
            raise ValueError(f"overlapping span ({start}, {end})")
        last_end = end
        if end - start == 1:
            labels[start] = "S"
        else:
            labels[start] = "B"
            for k in range(start + 1, end - 1):
                labels[k] = "I"
            labels[end - 1] = "E"
    return labels


def bioes_decode(labels: Sequence[str]) -> list[Span]:
    """Recover spans from labels, silently dropping ill-formed fragments.

    Only ``S`` and ``B I* E`` runs produce spans; a dangling ``B`` or an
    ``I``/``E`` without an opening ``B`` is ignored.
    """
    spans = []
    open_at = None
    for i, lab in enumerate(labels):
        if lab == "S":
            spans.append((i, i + 1))
            open_at = None
        elif lab == "B":
            open_at = i
        elif lab == "I":
            pass
        elif lab == "E":
            if open_at is not None:
                spans.append((open_at, i + 1))
            open_at = None
        else:
            open_at = None
    return spans


def resolve_overlaps(spans: Iterable[Span]) -> list[Span]:
    """Greedy non-overlapping subset: longer spans first, then earlier start."""
    chosen: list[Span] = []
    for span in sorted(set(spans), key=lambda s: (-(s[1] - s[0]), s[0])):
        if all(span[1] <= c[0] or span[0] >= c[1] for c in chosen):
            chosen.append(span)
    return sorted(chosen)
