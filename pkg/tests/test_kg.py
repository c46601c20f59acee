import json
import unicodedata

import pytest
from hypothesis import given, strategies as st

from qedl.kg import KgEntity, KgError, KgStore, in_lexicon, load_kg, lookup_surface
from qedl.text import normalize


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_single_record(tmp_path):
    p = write_lines(tmp_path / "kg.jsonl", [json.dumps({"id": "E1", "name": "方便面"})])
    store = load_kg(p)
    assert len(store) == 1
    assert lookup_surface(store, "方便面") == {"E1"}
    assert store.entity("E1").popularity == 1


def test_empty_file(tmp_path):
    store = load_kg(write_lines(tmp_path / "kg.jsonl", []))
    assert len(store) == 0
    assert lookup_surface(store, "方便面") == set()
    assert lookup_surface(store, "") == set()


def test_malformed_line_reports_line_number(tmp_path):
    p = write_lines(tmp_path / "kg.jsonl", [json.dumps({"id": "a", "name": "x"}), "{oops"])
    with pytest.raises(KgError, match=r"kg.jsonl:2"):
        load_kg(p)


def test_duplicate_id(tmp_path):
    rec = json.dumps({"id": "a", "name": "x"})
    with pytest.raises(KgError, match="duplicate"):
        load_kg(write_lines(tmp_path / "kg.jsonl", [rec, rec]))


@pytest.mark.parametrize("rec", [{"id": "a"}, {"id": "a", "name": "  "}, {"id": "a", "name": "x", "popularity": -1},
                                 {"id": "a", "name": "x", "aliases": "y"}])
def test_invalid_records(tmp_path, rec):
    with pytest.raises(KgError):
        load_kg(write_lines(tmp_path / "kg.jsonl", [json.dumps(rec)]))


def test_two_candidates_for_ambiguous_surface(worked_store):
    assert lookup_surface(worked_store, "方便面") == {
        "方便面（快餐类面制食品）", "方便面（中国大陆歌手肖飞演唱歌曲）"}
    assert lookup_surface(worked_store, "不存在") == set()
    assert lookup_surface(worked_store, "  方便面 ") == lookup_surface(worked_store, normalize("  方便面 "))
    assert lookup_surface(worked_store, "  方便面 ") == lookup_surface(worked_store, "方便面")


def test_alias_lookup(worked_store):
    assert lookup_surface(worked_store, "泡面") == {"方便面（快餐类面制食品）"}


def test_lexicon(tmp_path):
    kg = write_lines(tmp_path / "kg.jsonl", [])
    lex = write_lines(tmp_path / "lex.txt", ["孕妇\tn", "方便面", "  "])
    stop = write_lines(tmp_path / "stop.txt", ["吗"])
    store = load_kg(kg, lex, stop)
    assert in_lexicon(store, "孕妇")
    assert in_lexicon(store, " 孕妇\t")
    assert in_lexicon(store, "方便面")
    assert store.lexicon_pos("方便面") is None
    assert store.lexicon_pos("孕妇") == "n"
    assert not in_lexicon(store, "")
    assert not in_lexicon(store, "吃")
    assert store.is_stopword("吗")


def test_normalize():
    assert normalize("  Hello,  World! ") == "hello_world_"
    assert normalize("a - b") == "a_b"
    assert normalize("Ｃafé") == normalize("Ｃafé")
    assert normalize("ÀB") == "àb"
    assert normalize("孕妇") == "孕妇"


def test_fixture_aliases_roundtrip(tmp_path):
    from qedl.fixtures import FixtureConfig, generate_fixture

    files = generate_fixture(FixtureConfig(seed=1, n_entities=50, n_questions=20), tmp_path)
    store = load_kg(files["kg"], files["lexicon"])
    assert len(store) >= 50
    for ent in store.entities.values():
        for surface in ent.surfaces():
            assert ent.id in lookup_surface(store, surface)


def test_deterministic_ingestion(tmp_path):
    from qedl.fixtures import FixtureConfig, generate_fixture

    files = generate_fixture(FixtureConfig(seed=2, n_entities=30, n_questions=10), tmp_path)
    a = load_kg(files["kg"], files["lexicon"], files["stopwords"])
    b = load_kg(files["kg"], files["lexicon"], files["stopwords"])
    assert dict(a.surface_index) == dict(b.surface_index)
    assert dict(a.lexicon) == dict(b.lexicon)
    assert list(a.entities) == list(b.entities)


surfaces = st.text(alphabet=st.sampled_from("ab 猫狗,!Ａ"), min_size=1, max_size=6)


@given(st.lists(surfaces, min_size=1, max_size=8), surfaces)
def test_lookup_properties(names, probe):
    ents = [KgEntity(f"e{i}", n) for i, n in enumerate(names) if n.strip()]
    store = KgStore(ents)
    for e in ents:
        if normalize(e.name):
            assert e.id in lookup_surface(store, e.name)
    # pure function of the normalized surface
    assert lookup_surface(store, probe) == lookup_surface(store, " " + probe + " ")
    assert lookup_surface(store, probe) == store.surface_index.get(normalize(probe), set())
    assert all(i in store.entities for ids in store.surface_index.values() for i in ids)


def test_nfc_applied():
    decomposed = unicodedata.normalize("NFD", "é")
    store = KgStore([KgEntity("x", "é")])
    assert lookup_surface(store, decomposed) == {"x"}
