import random

import numpy as np
import pytest

from qedl.crf import LABEL_INDEX, CrfModel
from qedl.evaluation import qed_metrics
from qedl.kg import KgEntity, KgStore
from qedl.qed import (
    CRF,
    KG_RETRIEVAL,
    LEXICON_ITERATION,
    Discoverer,
    Mention,
    dedupe,
    discover_kg,
    gold_labels,
    one_step_iteration,
    train_qed,
)
from qedl.questions import GoldMention, Question


def test_worked_example_kg_retrieval(worked_store):
    found = discover_kg("孕妇吃方便面好吗", worked_store)
    assert [(m.surface, m.span) for m in found] == [("孕妇", (0, 2)), ("方便面", (3, 6))]
    assert all(m.source == KG_RETRIEVAL for m in found)


def test_empty_question(worked_store):
    assert discover_kg("", worked_store) == []


def _random_mentions(rng, length, k, source):
    out = set()
    for _ in range(k):
        s = rng.randrange(length)
        e = rng.randint(s + 1, min(length, s + 4))
        out.add(Mention(s, e, "x" * (e - s), source))
    return out


def test_iteration_set_property():
    rng = random.Random(0)
    # every "x"-run is in the lexicon, so lexicon membership never blocks
    store = KgStore([KgEntity("x", "x")], {"x" * n: "n" for n in range(1, 5)})
    for _ in range(1000):
        length = rng.randint(1, 12)
        crf = sorted(_random_mentions(rng, length, rng.randint(0, 3), CRF))
        kg = sorted(_random_mentions(rng, length, rng.randint(0, 4), KG_RETRIEVAL))
        gold = {m.span for m in _random_mentions(rng, length, rng.randint(0, 3), CRF)}
        crf = [m for i, m in enumerate(crf) if not any(m.overlaps(o) for o in crf[:i])]
        result = one_step_iteration(crf, kg, store)
        spans = {m.span for m in result}
        crf_spans, kg_spans = {m.span for m in crf}, {m.span for m in kg}
        assert crf_spans <= spans <= crf_spans | kg_spans
        before = qed_metrics({"q": crf_spans}, {"q": gold}).recall
        after = qed_metrics({"q": spans}, {"q": gold}).recall
        assert after >= before
        for m in result:
            if m.span not in crf_spans:
                assert m.source == LEXICON_ITERATION
                assert not any(m.overlaps(c) for c in crf)


def test_iteration_requires_lexicon(worked_store):
    # 泡面 is a KG alias but not a lexicon word
    kg = [Mention(0, 2, "泡面", KG_RETRIEVAL), Mention(3, 5, "孕妇", KG_RETRIEVAL)]
    out = one_step_iteration([], kg, worked_store)
    assert [m.surface for m in out] == ["孕妇"]


def test_dedupe_keeps_pipeline_order():
    ms = [Mention(0, 2, "ab", KG_RETRIEVAL), Mention(0, 2, "ab", CRF), Mention(3, 4, "c", LEXICON_ITERATION)]
    assert dedupe(ms) == [Mention(0, 2, "ab", CRF), Mention(3, 4, "c", LEXICON_ITERATION)]


def test_gold_labels_worked():
    q = Question("1", "孕妇吃方便面好吗", (GoldMention(0, 2, "孕妇"), GoldMention(3, 6, "方便面")))
    assert gold_labels(q) == ["B", "E", "O", "B", "I", "E", "O", "O"]


def _toy_questions():
    texts = [("孕妇吃方便面好吗", [(0, 2), (3, 6)]), ("方便面好吗", [(0, 3)]), ("孕妇好吗", [(0, 2)]),
             ("吃方便面", [(1, 4)]), ("孕妇吃吗", [(0, 2)])]
    return [Question(str(i), t, tuple(GoldMention(s, e, t[s:e]) for s, e in spans))
            for i, (t, spans) in enumerate(texts)]


def test_crf_and_ensemble_models_differ_only_by_kg_block(worked_store):
    qs = _toy_questions()
    crf = train_qed(qs, worked_store, method="crf", epochs=5)
    ens = train_qed(qs, worked_store, method="ensemble", epochs=5)
    assert "kg" not in crf.groups and "kg" in ens.groups
    extra = set(ens.features) - set(crf.features)
    assert extra and all(f.startswith("kg") for f in extra)
    assert set(crf.features) <= set(ens.features)


def test_zero_epochs_zero_model(worked_store):
    model = train_qed(_toy_questions(), worked_store, epochs=0)
    assert not np.any(model.weights())


def test_training_deterministic(worked_store):
    a = train_qed(_toy_questions(), worked_store, epochs=10, seed=4)
    b = train_qed(_toy_questions(), worked_store, epochs=10, seed=4)
    assert a.to_dict() == b.to_dict()


def test_trained_ensemble_finds_worked_mentions(worked_store):
    model = train_qed(_toy_questions(), worked_store, epochs=100)
    found = Discoverer(worked_store, model)("孕妇吃方便面好吗", "iteration")
    assert {m.surface for m in found} >= {"孕妇", "方便面"}


def test_no_iteration_drops_lexicon_only_mention(worked_store):
    # a model that labels everything O: only the lexicon iteration contributes mentions
    model = CrfModel.zeros(["bias"])
    model.unary[model.features.index("bias"), LABEL_INDEX["O"]] = 5.0
    model.meta["method"] = "crf"
    d = Discoverer(worked_store, model)
    assert d("孕妇吃方便面好吗", "crf") == []
    with_iter = d("孕妇吃方便面好吗", "iteration")
    assert [(m.surface, m.source) for m in with_iter] == [("孕妇", LEXICON_ITERATION), ("方便面", LEXICON_ITERATION)]


def test_discoverer_errors(worked_store):
    d = Discoverer(worked_store)
    with pytest.raises(ValueError):
        d("孕妇", "crf")
    with pytest.raises(ValueError):
        d("孕妇", "bogus")
    assert [m.surface for m in d("孕妇", "kg")] == ["孕妇"]
