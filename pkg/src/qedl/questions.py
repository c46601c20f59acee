"""Question records and JSON Lines helpers.

``questions.jsonl`` schema::

    {"id": str, "text": str,
     "entities": [{"start": int, "end": int, "mention": str, "kb_id": str}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator


class SchemaError(ValueError):
    """A JSON Lines record does not follow the expected schema."""


@dataclass(frozen=True)
class GoldMention:
    start: int
    end: int
    mention: str
    kb_id: str | None = None

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    entities: tuple[GoldMention, ...] = field(default_factory=tuple)

    def gold_spans(self) -> list[tuple[int, int]]:
        return [m.span for m in self.entities]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "entities": [
                {"start": m.start, "end": m.end, "mention": m.mention, "kb_id": m.kb_id}
                for m in self.entities
            ],
        }


def _check_int(v, name, where):
    if not isinstance(v, int) or isinstance(v, bool):
        raise SchemaError(f"{where}: '{name}' must be an integer")
    return v


def question_from_dict(rec: dict, where: str = "record") -> Question:
    if not isinstance(rec, dict):
        raise SchemaError(f"{where}: expected an object")
    qid, text = rec.get("id"), rec.get("text")
    if not isinstance(qid, str) or not isinstance(text, str):
        raise SchemaError(f"{where}: 'id' and 'text' must be strings")
    ents = []
    for k, e in enumerate(rec.get("entities") or []):
        w = f"{where} (question {qid!r}, entity {k})"
        if not isinstance(e, dict):
            raise SchemaError(f"{w}: expected an object")
        start = _check_int(e.get("start"), "start", w)
        end = _check_int(e.get("end"), "end", w)
        if not 0 <= start < end <= len(text):
            raise SchemaError(f"{w}: span ({start}, {end}) outside the text")
        mention = e.get("mention", text[start:end])
        if mention != text[start:end]:
            raise SchemaError(f"{w}: mention {mention!r} != text slice {text[start:end]!r}")
        kb_id = e.get("kb_id")
        if kb_id is not None and not isinstance(kb_id, str):
            raise SchemaError(f"{w}: 'kb_id' must be a string")
        ents.append(GoldMention(start, end, mention, kb_id))
    return Question(qid, text, tuple(ents))


def iter_jsonl(path: str | Path) -> Iterator[tuple[str, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                yield where, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{where}: malformed JSON ({exc.msg})") from None


def read_questions(path: str | Path) -> list[Question]:
    qs = [question_from_dict(rec, where) for where, rec in iter_jsonl(path)]
    ids = [q.id for q in qs]
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{path}: duplicate question ids")
    return qs


def dumps_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=False) + "\n"


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_line(rec))
