"""Deterministic synthetic data: KG, lexicon, stopwords, embeddings, corpus and questions.

The generated language is a toy: every content word is spelled with its own
CJK characters, so dictionary segmentation recovers the intended words
exactly, and a small set of real Chinese function words glues questions
together. Entities belong to topics; a question mentioning an entity
usually also carries one of that entity's attribute words, which is what
makes ambiguous surfaces resolvable. Entity frequency in questions is
Zipf-distributed, so a held-out split contains entities never seen in
training.

Files written by :func:`generate_fixture`::

    kg.jsonl lexicon.txt stopwords.txt embeddings.txt corpus.txt
    questions.jsonl train.jsonl test.jsonl config.json
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from qedl.kg import KgEntity, KgStore
from qedl.questions import GoldMention, Question, dumps_line
from qedl.segmentation import segment_fmm

log = logging.getLogger(__name__)

# function words: (surface, POS); all of them are stopwords
FRAME_WORDS = {
    "的": "u", "是": "v", "什么": "r", "吗": "y", "和": "c", "有": "v", "关系": "n",
    "谁": "r", "知道": "v", "在": "p", "哪里": "r", "怎么": "r", "呢": "y", "好": "a",
    "与": "c", "请问": "v", "哪个": "r", "属于": "v", "还是": "c", "都": "d",
}

# E = entity mention, C = attribute word of the preceding entity, G = generic word
TEMPLATES = (
    ("E", "的", "C", "是", "什么"),
    ("请问", "E", "属于", "C", "吗"),
    ("G", "E", "好", "吗"),
    ("谁", "知道", "E", "的", "C"),
    ("E", "在", "哪里", "G"),
    ("怎么", "G", "E", "呢"),
    ("E", "和", "E", "有", "什么", "关系"),
    ("E", "的", "C", "与", "E", "的", "C", "哪个", "好"),
    ("G", "E", "还是", "G", "E"),
    ("请问", "E", "C", "和", "E", "C", "是", "什么"),
    ("E", "、", "E", "和", "E", "的", "C", "是", "什么"),
    ("E", "与", "E", "都", "G", "E", "吗"),
)

ATTR_TYPE = "类型"
ATTR_RELATED = "相关"
GENERIC_ID_SUFFIX = "（通用词）"
CJK_RANGE = (0x4E00, 0x9FA5)


class FixtureError(ValueError):
    pass


@dataclass(frozen=True)
class FixtureConfig:
    seed: int = 0
    n_entities: int = 50
    n_questions: int = 200
    vocab_size: int = 200          # topic words across all topics
    embedding_dim: int = 32
    ambiguity_rate: float = 0.2    # fraction of entity surfaces shared by two entities
    n_topics: int = 5
    n_generic: int = 24            # generic words; nouns, verbs and some adjectives are also KG entries
    compound_rate: float = 0.4     # names spelled as two lexicon parts (not in the lexicon)
    alias_rate: float = 0.2
    zipf: float = 1.1
    train_fraction: float = 0.8

    def validate(self) -> None:
        for name in ("n_entities", "n_questions", "vocab_size", "embedding_dim", "n_topics", "n_generic"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise FixtureError(f"{name} must be a positive integer, got {v!r}")
        for name in ("ambiguity_rate", "compound_rate", "alias_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise FixtureError(f"{name} must lie in [0, 1], got {v!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise FixtureError("train_fraction must lie in (0, 1)")
        if self.zipf < 0:
            raise FixtureError("zipf must be non-negative")
        if self.embedding_dim < self.n_topics + 2:
            raise FixtureError("embedding_dim must be at least n_topics + 2")
        if self.vocab_size < 4 * self.n_topics:
            raise FixtureError("vocab_size must give every topic at least 4 words")
        if self.n_generic < 4:
            raise FixtureError("n_generic must be at least 4")
        if self.n_ambiguous() > 0 and self.n_topics < 2:
            raise FixtureError("ambiguous surfaces need at least two topics")
        if self.n_questions < 2:
            raise FixtureError("need at least two questions for a train/test split")

    def n_ambiguous(self) -> int:
        # a ambiguous surfaces over n - a surfaces in total: a / (n - a) = rate
        a = int(round(self.ambiguity_rate * self.n_entities / (1.0 + self.ambiguity_rate)))
        return min(a, self.n_entities // 2)


class _Speller:
    """Hands out words spelled with characters no other word uses."""

    def __init__(self, rng: random.Random):
        literals = "".join(w for t in TEMPLATES for w in t if w not in "ECG")
        reserved = set("".join(FRAME_WORDS) + literals + ATTR_TYPE + ATTR_RELATED + GENERIC_ID_SUFFIX)
        pool = [chr(c) for c in range(CJK_RANGE[0], CJK_RANGE[1] + 1) if chr(c) not in reserved]
        rng.shuffle(pool)
        self._pool = pool
        self._next = 0
        self._rng = rng

    def word(self, lo: int, hi: int) -> str:
        n = self._rng.randint(lo, hi)
        if self._next + n > len(self._pool):
            raise FixtureError("fixture too large for the character pool")
        w = "".join(self._pool[self._next:self._next + n])
        self._next += n
        return w


@dataclass
class _Entity:
    name: str
    parts: tuple[str, ...]
    topic: int
    attrs: tuple[str, ...]
    popularity: int
    alias: str | None = None
    ambiguous: bool = False


def _zipf_weights(n: int, s: float, rng: random.Random) -> list[float]:
    ranks = list(range(n))
    rng.shuffle(ranks)
    return [1.0 / (r + 1) ** s for r in ranks]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


class _Builder:
    def __init__(self, cfg: FixtureConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.nrng = np.random.default_rng(cfg.seed)
        self.spell = _Speller(self.rng)
        self.lexicon: dict[str, str] = dict(FRAME_WORDS)
        self.word_topic: dict[str, int] = {}  # -1 = general direction

    def _add(self, word: str, pos: str, topic: int) -> str:
        self.lexicon[word] = pos
        self.word_topic[word] = topic
        return word

    def build(self):
        cfg = self.cfg
        T = cfg.n_topics
        self.labels = [self._add(self.spell.word(2, 3), "n", t) for t in range(T)]
        self.topic_words: list[list[str]] = [[] for _ in range(T)]
        for i in range(cfg.vocab_size):
            t = i % T
            self.topic_words[t].append(self._add(self.spell.word(2, 2), "n", t))
        # generic words: nouns and verbs (content), adjectives (dropped by the POS filter)
        self.generic: list[str] = []
        for i in range(cfg.n_generic):
            pos = ("n", "v", "a")[i % 3]
            self.generic.append(self._add(self.spell.word(1, 2), pos, -1))
        # every generic noun/verb is a KG entry (a distractor); half the adjectives too
        self.generic_kg = [g for i, g in enumerate(self.generic) if self.lexicon[g] != "a" or i % 2]
        self._make_entities()
        self.questions = self._make_questions()
        return self

    def _make_entities(self):
        cfg, rng = self.cfg, self.rng
        T = cfg.n_topics
        a = cfg.n_ambiguous()
        n_surfaces = cfg.n_entities - a
        content_generic = [g for g in self.generic_kg if self.lexicon[g] in ("n", "v")]
        self.entities: list[_Entity] = []
        for s in range(n_surfaces):
            ambiguous = s < a
            topics = rng.sample(range(T), 2) if ambiguous else [rng.randrange(T)]
            home = -1 if ambiguous else topics[0]
            if rng.random() < cfg.compound_rate:
                # some compounds start with a generic KG word, nesting a distractor inside the name
                head = rng.choice(content_generic) if content_generic and rng.random() < 0.3 \
                    else self._add(self.spell.word(1, 2), "n", home)
                parts = (head, self._add(self.spell.word(1, 2), "n", home))
            else:
                parts = (self._add(self.spell.word(2, 3), "n", home),)
            name = "".join(parts)
            for t in topics:
                attrs = tuple(rng.sample(self.topic_words[t], 3))
                pop = int(10 ** rng.uniform(0.0, 6.0))
                ent = _Entity(name, parts, t, attrs, pop, ambiguous=ambiguous)
                if rng.random() < cfg.alias_rate:
                    ent.alias = self._add(self.spell.word(2, 3), "n", -1 if ambiguous else t)
                self.entities.append(ent)
        if a:
            # an ambiguous pair must not tie on popularity
            by_name: dict[str, list[_Entity]] = {}
            for e in self.entities:
                by_name.setdefault(e.name, []).append(e)
            for group in by_name.values():
                if len(group) == 2 and group[0].popularity == group[1].popularity:
                    group[1].popularity += 1

    def entity_id(self, e: _Entity) -> str:
        return f"{e.name}（{self.labels[e.topic]}）"

    def _make_questions(self) -> list[Question]:
        cfg, rng = self.cfg, self.rng
        weights = _zipf_weights(len(self.entities), cfg.zipf, rng)
        by_name: dict[str, list[_Entity]] = {}
        for e in self.entities:
            by_name.setdefault(e.name, []).append(e)
        questions = []
        width = len(str(cfg.n_questions))
        for qi in range(cfg.n_questions):
            template = rng.choice(TEMPLATES)
            n_e = template.count("E")
            chosen: list[_Entity] = []
            while len(chosen) < n_e:
                e = rng.choices(self.entities, weights)[0]
                if all(c.name != e.name for c in chosen):
                    chosen.append(e)
            text, gold = [], []
            pos = 0
            k = -1
            for slot_i, slot in enumerate(template):
                if slot == "E":
                    k += 1
                    e = chosen[k]
                    rest = template[slot_i + 1:]
                    has_context = "C" in rest[:rest.index("E")] if "E" in rest else "C" in rest
                    if e.ambiguous and not has_context:
                        # without context the more popular reading is the gold one
                        e = max(by_name[e.name], key=lambda x: x.popularity)
                        chosen[k] = e
                    surface = e.alias if e.alias and rng.random() < 0.3 else e.name
                    gold.append(GoldMention(pos, pos + len(surface), surface, self.entity_id(e)))
                    word = surface
                elif slot == "C":
                    word = rng.choice(chosen[k].attrs)
                elif slot == "G":
                    word = rng.choice(self.generic)
                else:
                    word = slot
                text.append(word)
                pos += len(word)
            questions.append(Question(f"q{qi:0{width}d}", "".join(text), tuple(gold)))
        return questions

    # -- outputs ---------------------------------------------------------------

    def kg_entities(self) -> list[KgEntity]:
        out = []
        for e in self.entities:
            out.append(KgEntity(self.entity_id(e), e.name, (e.alias,) if e.alias else (),
                                {ATTR_TYPE: self.labels[e.topic], ATTR_RELATED: " ".join(e.attrs)},
                                e.popularity))
        for g in self.generic_kg:
            out.append(KgEntity(g + GENERIC_ID_SUFFIX, g, (), {}, int(10 ** self.rng.uniform(0.0, 6.0))))
        return out

    def corpus(self) -> list[list[str]]:
        rng, T = self.rng, self.cfg.n_topics
        docs = []
        for e in self.entities:
            doc = list(e.parts) + [self.labels[e.topic], *e.attrs]
            doc += rng.choices(self.topic_words[e.topic], k=rng.randint(4, 8))
            docs.append(doc)
        by_topic = [[e for e in self.entities if e.topic == t] for t in range(T)]
        for t in range(T):
            for _ in range(12):
                doc = rng.choices(self.topic_words[t], k=rng.randint(6, 12))
                if by_topic[t] and rng.random() < 0.5:
                    doc += list(rng.choice(by_topic[t]).parts)
                if rng.random() < 0.5:
                    doc.append(rng.choice(self.generic))
                doc.append(rng.choice(list(FRAME_WORDS)))
                docs.append(doc)
        return docs

    def embeddings(self) -> dict[str, np.ndarray]:
        """Orthonormal topic centers plus noise orthogonal to every center.

        With noise norm 0.25, same-topic cosines are at least 0.88 and
        cross-topic cosines at most 0.06.
        """
        T, d = self.cfg.n_topics, self.cfg.embedding_dim
        q, _ = np.linalg.qr(self.nrng.normal(size=(d, d)))
        centers, complement = q[:, :T + 1], q[:, T + 1:]
        out = {}
        for word in sorted(self.lexicon):
            t = self.word_topic.get(word, -1)
            c = centers[:, T] if t < 0 else centers[:, t]
            noise = complement @ self.nrng.normal(size=complement.shape[1])
            out[word] = c + 0.25 * noise / np.linalg.norm(noise)
        return out


def build_fixture(config: FixtureConfig):
    """Generate everything in memory: (entities, lexicon, stopwords, embeddings, corpus, questions)."""
    config.validate()
    b = _Builder(config).build()
    entities = b.kg_entities()
    corpus = b.corpus()
    emb = b.embeddings()
    stopwords = sorted(FRAME_WORDS)
    validate_fixture(entities, b.lexicon, stopwords, b.questions)
    return entities, dict(sorted(b.lexicon.items())), stopwords, emb, corpus, b.questions


def validate_fixture(entities, lexicon, stopwords, questions) -> None:
    """Gold spans are exact slices, resolvable by surface lookup and aligned to tokens."""
    store = KgStore(entities, lexicon, stopwords)
    for q in questions:
        if not 1 <= len(q.entities) <= 3:
            raise FixtureError(f"question {q.id}: {len(q.entities)} gold mentions")
        bounds = {t.start for t in segment_fmm(q.text, store)} | {len(q.text)}
        for m in q.entities:
            if q.text[m.start:m.end] != m.mention:
                raise FixtureError(f"question {q.id}: span {m.start}:{m.end} is not {m.mention!r}")
            if m.kb_id not in store.entities or m.kb_id not in store.lookup_surface(m.mention):
                raise FixtureError(f"question {q.id}: {m.kb_id!r} not reachable from {m.mention!r}")
            if m.start not in bounds or m.end not in bounds:
                raise FixtureError(f"question {q.id}: {m.mention!r} cuts through a token")


def split_questions(questions, train_fraction: float, seed: int):
    order = list(questions)
    random.Random(seed + 1).shuffle(order)
    n_train = min(max(1, int(round(len(order) * train_fraction))), len(order) - 1)
    return order[:n_train], order[n_train:]


def _entity_line(e: KgEntity) -> str:
    rec = {"id": e.id, "name": e.name, "aliases": list(e.aliases),
           "attributes": dict(e.attributes), "popularity": e.popularity}
    return json.dumps(rec, ensure_ascii=False)


def generate_fixture(config: FixtureConfig, out_dir: str | Path) -> dict[str, Path]:
    """Write the fixture files under ``out_dir``; returns name -> path."""
    entities, lexicon, stopwords, emb, corpus, questions = build_fixture(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / fname for name, fname in (
        ("kg", "kg.jsonl"), ("lexicon", "lexicon.txt"), ("stopwords", "stopwords.txt"),
        ("embeddings", "embeddings.txt"), ("corpus", "corpus.txt"), ("questions", "questions.jsonl"),
        ("train", "train.jsonl"), ("test", "test.jsonl"), ("config", "config.json"))}

    def write(key, lines):
        paths[key].write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    write("kg", (_entity_line(e) for e in entities))
    write("lexicon", (f"{w}\t{p}" for w, p in lexicon.items()))
    write("stopwords", stopwords)
    dim = config.embedding_dim
    write("embeddings", [f"{len(emb)} {dim}"] +
          [w + " " + " ".join(_fmt(x) for x in v) for w, v in emb.items()])
    write("corpus", (" ".join(doc) for doc in corpus))
    write("questions", (dumps_line(q.to_dict()).rstrip("\n") for q in questions))
    train, test = split_questions(questions, config.train_fraction, config.seed)
    write("train", (dumps_line(q.to_dict()).rstrip("\n") for q in train))
    write("test", (dumps_line(q.to_dict()).rstrip("\n") for q in test))
    paths["config"].write_text(json.dumps(asdict(config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    n_mentions = sum(len(q.entities) for q in questions)
    log.info("fixture: %d KG entries, %d lexicon terms, %d questions (%d mentions)",
             len(entities), len(lexicon), len(questions), n_mentions)
    return paths


def worked_example_dir() -> Path:
    """Directory of the bundled worked-example fixture (the 孕妇/方便面 question)."""
    return Path(str(resources.files("qedl") / "data" / "worked_example"))


def worked_example_paths() -> dict[str, Path]:
    d = worked_example_dir()
    return {"kg": d / "kg.jsonl", "lexicon": d / "lexicon.txt", "stopwords": d / "stopwords.txt",
            "questions": d / "questions.jsonl", "corpus": d / "corpus.txt",
            "embeddings": d / "embeddings.txt"}
