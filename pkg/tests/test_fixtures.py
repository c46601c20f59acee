import itertools
import json

import numpy as np
import pytest

from qedl.fixtures import (
    FixtureConfig,
    FixtureError,
    build_fixture,
    generate_fixture,
    worked_example_paths,
)
from qedl.kg import load_kg, lookup_surface
from qedl.questions import read_questions
from qedl.ranker import generate_el_candidates
from qedl.similarity import EmbeddingTable, cosine


def test_same_config_byte_identical(tmp_path):
    cfg = FixtureConfig(seed=3, n_entities=20, n_questions=30)
    a = generate_fixture(cfg, tmp_path / "a")
    b = generate_fixture(cfg, tmp_path / "b")
    assert set(a) == set(b)
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes(), key


def test_different_seed_differs(tmp_path):
    a = generate_fixture(FixtureConfig(seed=0, n_entities=10, n_questions=10), tmp_path / "a")
    b = generate_fixture(FixtureConfig(seed=1, n_entities=10, n_questions=10), tmp_path / "b")
    assert a["kg"].read_bytes() != b["kg"].read_bytes()


def test_gold_resolvable(tmp_path):
    files = generate_fixture(FixtureConfig(seed=0, n_entities=50, n_questions=200), tmp_path)
    store = load_kg(files["kg"], files["lexicon"], files["stopwords"])
    questions = read_questions(files["questions"])
    assert len(questions) == 200
    for q in questions:
        assert 1 <= len(q.entities) <= 3
        for m in q.entities:
            assert q.text[m.start:m.end] == m.mention
            assert m.kb_id in lookup_surface(store, m.mention)
    train, test = read_questions(files["train"]), read_questions(files["test"])
    assert len(train) + len(test) == 200
    assert {q.id for q in train}.isdisjoint(q.id for q in test)


def test_zero_ambiguity_gives_unique_candidates(tmp_path):
    files = generate_fixture(FixtureConfig(seed=4, n_entities=30, n_questions=60, ambiguity_rate=0.0), tmp_path)
    store = load_kg(files["kg"], files["lexicon"])
    for q in read_questions(files["questions"]):
        for m in q.entities:
            cands = generate_el_candidates(m.mention, store)
            assert [e.id for e in cands] == [m.kb_id]


def test_ambiguity_rate_and_resolution():
    cfg = FixtureConfig(seed=5, n_entities=40, n_questions=100, ambiguity_rate=0.5)
    entities, lexicon, stop, emb, corpus, questions = build_fixture(cfg)
    names = {}
    for e in entities:
        if e.attributes:  # principal entities carry attributes
            names.setdefault(e.name, []).append(e)
    ambiguous = [v for v in names.values() if len(v) >= 2]
    assert len(ambiguous) / len(names) == pytest.approx(0.5, abs=0.05)
    by_id = {e.id: e for e in entities}
    for group in ambiguous:
        # distinct readings differ in type and popularity
        assert len({e.attributes["类型"] for e in group}) == len(group)
        assert len({e.popularity for e in group}) == len(group)
    for q in questions:
        for m in q.entities:
            gold = by_id[m.kb_id]
            readings = names.get(gold.name, [gold])
            if len(readings) < 2:
                continue
            related = set(gold.attributes["相关"].split())
            context = any(w in q.text for w in related)
            assert context or gold.popularity == max(e.popularity for e in readings)


def test_embedding_clusters(tmp_path):
    cfg = FixtureConfig(seed=6, n_entities=20, n_questions=20)
    files = generate_fixture(cfg, tmp_path)
    emb = EmbeddingTable.load(files["embeddings"])
    entities, lexicon, *_ = build_fixture(cfg)
    by_type = {}
    for e in entities:
        if e.attributes:
            by_type.setdefault(e.attributes["类型"], set()).update(e.attributes["相关"].split())
    groups = [sorted(v) for _, v in sorted(by_type.items())]
    for g in groups:
        for a, b in itertools.combinations(g, 2):
            assert cosine(emb.get(a), emb.get(b)) > 0.8
    for g, h in itertools.combinations(groups, 2):
        for a in g[:5]:
            for b in h[:5]:
                assert cosine(emb.get(a), emb.get(b)) < 0.2


def test_popularity_spread():
    entities, *_ = build_fixture(FixtureConfig(seed=7, n_entities=200, n_questions=10))
    pops = np.array([e.popularity for e in entities])
    assert pops.min() >= 1 and pops.max() <= 10 ** 6
    logs = np.log10(pops)
    assert logs.max() - logs.min() > 4  # spans several decades


@pytest.mark.parametrize("kw", [
    {"n_entities": 0}, {"n_questions": -1}, {"ambiguity_rate": 1.5}, {"embedding_dim": 3},
    {"vocab_size": 2}, {"n_topics": 1, "ambiguity_rate": 0.5}, {"train_fraction": 1.0},
])
def test_inconsistent_config_rejected(kw):
    with pytest.raises(FixtureError):
        build_fixture(FixtureConfig(**kw))


def test_config_written(tmp_path):
    cfg = FixtureConfig(seed=8, n_entities=5, n_questions=5)
    files = generate_fixture(cfg, tmp_path)
    assert json.loads(files["config"].read_text())["seed"] == 8


def test_worked_example_bundle():
    p = worked_example_paths()
    store = load_kg(p["kg"], p["lexicon"], p["stopwords"])
    (q,) = read_questions(p["questions"])
    assert q.text == "孕妇吃方便面好吗"
    assert sorted(store.lookup_surface("方便面")) == ["方便面（中国大陆歌手肖飞演唱歌曲）", "方便面（快餐类面制食品）"]
    EmbeddingTable.load(p["embeddings"])
