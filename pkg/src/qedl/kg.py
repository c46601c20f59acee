"""Knowledge graph, lexicon and stopword store.

The KG file is JSON Lines, one entity per line::

    {"id": "E1", "name": "方便面", "aliases": ["泡面"],
     "attributes": {"类型": "食品"}, "popularity": 1370}

``aliases``, ``attributes`` and ``popularity`` are optional. The lexicon is
UTF-8 text with one ``term<TAB>pos`` entry per line (POS optional) and the
stopword list is one term per line.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from qedl.text import is_placeholder, normalize

log = logging.getLogger(__name__)


class KgError(ValueError):
    """Raised for malformed or inconsistent knowledge graph input."""


@dataclass(frozen=True)
class KgEntity:
    id: str
    name: str
    aliases: tuple[str, ...] = ()
    attributes: Mapping[str, str] = field(default_factory=dict)
    popularity: int = 1

    def surfaces(self) -> tuple[str, ...]:
        return (self.name,) + self.aliases

    def attribute_text(self) -> str:
        return " ".join(self.attributes.values())


def _entity_from_record(rec: dict, where: str) -> KgEntity:
    if not isinstance(rec, dict):
        raise KgError(f"{where}: expected a JSON object")
    try:
        eid, name = rec["id"], rec["name"]
    except KeyError as exc:
        raise KgError(f"{where}: missing field {exc.args[0]!r}") from None
    if not isinstance(eid, str) or not eid:
        raise KgError(f"{where}: 'id' must be a non-empty string")
    if not isinstance(name, str) or not name.strip():
        raise KgError(f"{where}: 'name' must be a non-empty string")
    aliases = rec.get("aliases") or []
    attributes = rec.get("attributes") or {}
    if not isinstance(aliases, list) or not all(isinstance(a, str) for a in aliases):
        raise KgError(f"{where}: 'aliases' must be a list of strings")
    if not isinstance(attributes, dict):
        raise KgError(f"{where}: 'attributes' must be an object")
    popularity = rec.get("popularity", 1)
    if popularity is None:
        popularity = 1
    if not isinstance(popularity, int) or isinstance(popularity, bool) or popularity < 0:
        raise KgError(f"{where}: 'popularity' must be a non-negative integer")
    # log(N) must stay finite
    popularity = max(1, popularity)
    return KgEntity(
        id=eid,
        name=name,
        aliases=tuple(aliases),
        attributes=MappingProxyType({str(k): str(v) for k, v in attributes.items()}),
        popularity=popularity,
    )


class KgStore:
    """Read-only index over entities, lexicon and stopwords.

    Built once by :func:`load_kg` (or :meth:`from_entities`) and never mutated
    afterwards, so it can be shared between workers.
    """

    def __init__(
        self,
        entities: Iterable[KgEntity] = (),
        lexicon: Mapping[str, str | None] | None = None,
        stopwords: Iterable[str] = (),
    ):
        ents: dict[str, KgEntity] = {}
        index: dict[str, set[str]] = {}
        for ent in entities:
            if ent.id in ents:
                raise KgError(f"duplicate entity id {ent.id!r}")
            ents[ent.id] = ent
            for surface in ent.surfaces():
                key = normalize(surface)
                if key:
                    index.setdefault(key, set()).add(ent.id)
        self._entities = MappingProxyType(ents)
        self._index = MappingProxyType({k: frozenset(v) for k, v in index.items()})

        lex: dict[str, str | None] = {}
        for term, pos in (lexicon or {}).items():
            key = normalize(term)
            if key and not is_placeholder(key):
                # first POS wins for duplicated entries
                lex.setdefault(key, pos or None)
        self._lexicon = MappingProxyType(lex)
        self._stopwords = frozenset(k for k in (normalize(w) for w in stopwords) if k)
        self.max_lexicon_len = max((len(t) for t in lex), default=0)

    @classmethod
    def from_entities(cls, entities, lexicon=None, stopwords=()) -> "KgStore":
        return cls(entities, lexicon, stopwords)

    # -- accessors -------------------------------------------------------

    @property
    def entities(self) -> Mapping[str, KgEntity]:
        return self._entities

    @property
    def surface_index(self) -> Mapping[str, frozenset[str]]:
        return self._index

    @property
    def lexicon(self) -> Mapping[str, str | None]:
        return self._lexicon

    @property
    def stopwords(self) -> frozenset[str]:
        return self._stopwords

    def __len__(self) -> int:
        return len(self._entities)

    def entity(self, eid: str) -> KgEntity:
        return self._entities[eid]

    # -- queries ---------------------------------------------------------

    def lookup_surface(self, surface: str) -> frozenset[str]:
        """Ids whose name or alias normalizes to ``normalize(surface)``."""
        return self._index.get(normalize(surface), frozenset())

    def in_lexicon(self, term: str) -> bool:
        key = normalize(term)
        return bool(key) and key in self._lexicon

    def lexicon_pos(self, term: str) -> str | None:
        return self._lexicon.get(normalize(term))

    def is_stopword(self, term: str) -> bool:
        return normalize(term) in self._stopwords


def lookup_surface(store: KgStore, surface: str) -> frozenset[str]:
    return store.lookup_surface(surface)


def in_lexicon(store: KgStore, term: str) -> bool:
    return store.in_lexicon(term)


def read_kg_entities(path: str | Path) -> list[KgEntity]:
    entities = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise KgError(f"{where}: malformed JSON ({exc.msg})") from None
            ent = _entity_from_record(rec, where)
            if ent.id in seen:
                raise KgError(f"{where}: duplicate entity id {ent.id!r}")
            seen.add(ent.id)
            entities.append(ent)
    return entities


def read_lexicon(path: str | Path) -> dict[str, str | None]:
    lexicon: dict[str, str | None] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n\r")
            if not line.strip():
                continue
            term, _, pos = line.partition("\t")
            lexicon.setdefault(term.strip(), pos.strip() or None)
    return lexicon


def read_wordlist(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [w.strip() for w in fh if w.strip()]


def load_kg(
    path: str | Path,
    lexicon_path: str | Path | None = None,
    stopwords_path: str | Path | None = None,
) -> KgStore:
    """Build a :class:`KgStore` from a KG file and optional lexicon/stopwords."""
    entities = read_kg_entities(path)
    lexicon = read_lexicon(lexicon_path) if lexicon_path else None
    stopwords = read_wordlist(stopwords_path) if stopwords_path else ()
    store = KgStore(entities, lexicon, stopwords)
    log.info("loaded %d entities, %d lexicon terms, %d stopwords",
             len(store), len(store.lexicon), len(store.stopwords))
    return store
