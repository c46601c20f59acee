import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qedl.kg import KgEntity
from qedl.similarity import (
    CorpusModels,
    EmbeddingTable,
    IdfTable,
    NotFittedError,
    TextModelConfig,
    cosine,
    jacobi_svd,
    popularity_feature,
    saliency_bm25,
    semantic_similarity,
)

TOY = [["猫", "狗", "猫"], ["狗", "鱼"], ["鸟", "鱼", "鱼", "树"]]


def binary_bm25(q_terms, e_terms, idf, k1, b, avge):
    """Textbook BM25 with term frequency clipped to {0, 1}."""
    total = 0.0
    for w in q_terms:
        tf = 1.0 if w in e_terms else 0.0
        denom = tf + k1 * (1 - b + b * len(e_terms) / avge)
        total += idf.idf(w) * tf * (k1 + 1) / denom
    return total


def indicator_embeddings(vocab):
    return EmbeddingTable({w: np.eye(len(vocab))[i] for i, w in enumerate(vocab)})


# -- cosine / popularity ----------------------------------------------------


def test_cosine_examples():
    assert cosine([1, 0], [1, 0]) == 1.0
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 2, 3], [4, 5, 6]) == pytest.approx(32 / math.sqrt(14 * 77), abs=1e-15)
    assert cosine([1, 2, 3], [4, 5, 6]) == pytest.approx(0.974631846, abs=1e-9)
    assert cosine([0, 0], [1, 1]) == 0.0
    with pytest.raises(ValueError):
        cosine([1, 2], [1, 2, 3])


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
       st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_cosine_symmetric_and_bounded(u, v):
    assert cosine(u, v) == cosine(v, u)
    assert abs(cosine(u, v)) <= 1 + 1e-12


def test_popularity():
    assert popularity_feature(1370) == pytest.approx(3.1367, abs=1e-4)
    assert popularity_feature(447) == pytest.approx(2.6503, abs=1e-4)
    assert popularity_feature(KgEntity("x", "x", popularity=1)) == 0.0
    assert popularity_feature(1370) == math.log10(1370)


# -- semantic similarity ---------------------------------------------------------


def test_hand_computed_case():
    # IDF 1, sem 1, |e| = avge: 1 * 2.5 / (1 + 1.5 * 1) = 1
    assert saliency_bm25([1.0], [1.0], e_len=3, avge=3.0) == pytest.approx(1.0, abs=1e-12)
    idf = IdfTable(math.e - 1, {"w": 0})  # ln((N+1)/1) = 1
    emb = indicator_embeddings(["w", "x"])
    val = semantic_similarity(["w"], ["w", "x"], emb, idf, avge=2.0)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_zero_semantic_match():
    emb = indicator_embeddings(["a", "b", "c"])
    idf = IdfTable(10, {"a": 1, "b": 2, "c": 3})
    assert semantic_similarity(["a", "b"], ["c"], emb, idf, avge=1.0) == 0.0


def test_defaults_are_k1_1_5_b_0_75():
    emb = indicator_embeddings(["a", "b"])
    idf = IdfTable(10, {"a": 1})
    default = semantic_similarity(["a"], ["a", "b"], emb, idf, avge=3.0)
    explicit = semantic_similarity(["a"], ["a", "b"], emb, idf, k1=1.5, b=0.75, avge=3.0)
    assert default == explicit
    assert default == pytest.approx(idf.idf("a") * 2.5 / (1 + 1.5 * (0.25 + 0.75 * 2 / 3)), abs=1e-12)


def test_invalid_avge():
    emb = indicator_embeddings(["a"])
    with pytest.raises(ValueError):
        semantic_similarity(["a"], ["a"], emb, IdfTable(1, {}), avge=0.0)
    with pytest.raises(ValueError):
        semantic_similarity(["a"], [], emb, IdfTable(1, {}), avge=1.0)


def test_equals_binary_bm25_under_indicator_similarity():
    rng = random.Random(0)
    vocab = [f"w{i}" for i in range(12)]
    emb = indicator_embeddings(vocab)
    for _ in range(200):
        n_docs = rng.randint(1, 50)
        idf = IdfTable(n_docs, {w: rng.randint(0, n_docs) for w in vocab})
        q = rng.choices(vocab, k=rng.randint(1, 6))
        e = rng.choices(vocab, k=rng.randint(1, 6))
        k1, b, avge = rng.uniform(0.1, 3), rng.uniform(0, 1), rng.uniform(0.5, 8)
        got = semantic_similarity(q, e, emb, idf, k1, b, avge)
        assert abs(got - binary_bm25(q, e, idf, k1, b, avge)) <= 1e-12


def test_missing_vectors_fall_back_to_exact_match():
    emb = indicator_embeddings(["a"])
    idf = IdfTable(4, {})
    assert semantic_similarity(["zz"], ["zz"], emb, idf, avge=1.0) > 0
    assert semantic_similarity(["zz"], ["a"], emb, idf, avge=1.0) == 0.0


def test_negative_cosine_is_clamped():
    emb = EmbeddingTable({"a": [1.0, 0.0], "b": [-1.0, 0.0]})
    assert semantic_similarity(["a"], ["b"], emb, IdfTable(3, {}), avge=1.0) == 0.0


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=5), st.integers(0, 4),
       st.floats(0, 1), st.integers(1, 10), st.floats(0.5, 10))
def test_monotone_in_each_sem(sems, which, bump, e_len, avge):
    which %= len(sems)
    idfs = [1.0 + i for i in range(len(sems))]
    higher = list(sems)
    higher[which] = min(1.0, sems[which] + bump)
    assert saliency_bm25(higher, idfs, e_len, avge) >= saliency_bm25(sems, idfs, e_len, avge) - 1e-15


def test_embedding_file(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("2 3\n猫 1 0 0\n狗 0.5 0.5 0\n", encoding="utf-8")
    emb = EmbeddingTable.load(p)
    assert emb.dim == 3 and len(emb) == 2
    assert cosine(emb.get("猫"), emb.get("狗")) == pytest.approx(1 / math.sqrt(2))
    p.write_text("3 3\n猫 1 0 0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        EmbeddingTable.load(p)


# -- TF-IDF / LSI / LDA ---------------------------------------------------------


@pytest.fixture(scope="module")
def toy_models():
    return CorpusModels.fit(TOY, config=TextModelConfig(lsi_rank=100, lda_topics=2, lda_sweeps=50))


def test_tfidf_hand_computation(toy_models):
    # N = 3; df: 猫1 狗2 鱼2 鸟1 树1 -> idf ln(4/2), ln(4/3)
    i1, i2 = math.log(2), math.log(4 / 3)
    a = {"猫": 2 * i1, "狗": i2}
    b = {"狗": i2, "鱼": i2}
    dot = sum(a[t] * b.get(t, 0) for t in a)
    expected = dot / (math.sqrt(sum(v * v for v in a.values())) * math.sqrt(sum(v * v for v in b.values())))
    assert toy_models.tfidf_similarity(TOY[0], TOY[1]) == pytest.approx(expected, abs=1e-12)


def test_tfidf_edge_cases(toy_models):
    assert toy_models.tfidf_similarity(["猫", "狗"], ["猫", "狗"]) == pytest.approx(1.0, abs=1e-12)
    assert toy_models.tfidf_similarity(["猫"], ["树"]) == 0.0
    assert toy_models.tfidf_similarity([], ["树"]) == 0.0
    assert toy_models.tfidf_similarity(["未知"], ["未知"]) == 0.0


def test_unfitted_errors():
    m = CorpusModels()
    with pytest.raises(NotFittedError):
        m.tfidf_similarity(["a"], ["a"])
    with pytest.raises(NotFittedError):
        m.lsi_similarity(["a"], ["a"])
    with pytest.raises(NotFittedError):
        m.lda_similarity(["a"], ["a"])


def toy_matrix_corpus(seed=0, n_terms=10, n_docs=8):
    rng = random.Random(seed)
    vocab = [f"t{i}" for i in range(n_terms)]
    docs = []
    for _ in range(n_docs):
        docs.append(rng.choices(vocab, k=rng.randint(3, 9)))
    docs[0] = vocab[:]  # every term occurs so the matrix is 10 x 8
    return docs


def test_lsi_singular_values_match_dense_svd():
    docs = toy_matrix_corpus()
    m = CorpusModels.fit(docs, lda=False)
    A = m.term_document_matrix(docs)
    assert A.shape == (10, 8)
    oracle = np.linalg.svd(A, compute_uv=False)
    assert np.max(np.abs(m.singular_values - oracle)) <= 1e-8
    assert np.all(np.diff(m.singular_values) <= 0) and np.all(m.singular_values >= 0)


def test_full_rank_lsi_equals_tfidf():
    docs = toy_matrix_corpus(1)
    m = CorpusModels.fit(docs, lda=False)
    for a in docs:
        for b in docs:
            assert abs(m.lsi_similarity(a, b) - m.tfidf_similarity(a, b)) <= 1e-6
    assert m.lsi_similarity(docs[2], docs[2]) == pytest.approx(1.0, abs=1e-9)


def test_truncated_lsi_keeps_rank_k():
    docs = toy_matrix_corpus(2)
    m = CorpusModels.fit(docs, config=TextModelConfig(lsi_rank=3), lda=False)
    assert m.lsi_basis.shape == (10, 3)


@pytest.mark.parametrize("shape", [(10, 8), (8, 10), (25, 40), (6, 6)])
def test_jacobi_svd_reconstructs(shape):
    rng = np.random.default_rng(sum(shape))
    A = rng.normal(size=shape)
    A[:, 0] = A[:, -1]  # rank deficient
    U, s, Vt = jacobi_svd(A)
    assert np.allclose(U @ np.diag(s) @ Vt, A, atol=1e-12)
    assert np.allclose(s, np.linalg.svd(A, compute_uv=False), atol=1e-10)


def two_topic_corpus():
    rng = random.Random(5)
    red = [f"r{i}" for i in range(8)]
    blue = [f"b{i}" for i in range(8)]
    docs = [rng.choices(red, k=10) for _ in range(20)] + [rng.choices(blue, k=10) for _ in range(20)]
    return docs, red, blue


@pytest.fixture(scope="module")
def topic_models():
    docs, red, blue = two_topic_corpus()
    cfg = TextModelConfig(lda_topics=2, lda_seed=3, lda_sweeps=200, lda_infer_sweeps=50)
    return CorpusModels.fit(docs, config=cfg, lsi=False), red, blue


def test_lda_topic_vectors_are_distributions(topic_models):
    m, red, blue = topic_models
    for terms in (red[:3], blue[:5], red + blue):
        theta = m.topic_vector(terms)
        assert abs(theta.sum() - 1) <= 1e-9
        assert np.all(theta > 0)
    phi = m.lda.topic_word()
    assert np.allclose(phi.sum(axis=1), 1.0)


def test_lda_identical_texts(topic_models):
    m, red, _ = topic_models
    assert m.lda_similarity(red[:4], red[:4]) == pytest.approx(1.0, abs=1e-9)


def test_lda_separates_disjoint_topics(topic_models):
    m, red, blue = topic_models
    same = m.lda_similarity(red[:4], red[3:7])
    cross = m.lda_similarity(red[:4], blue[:4])
    assert cross < same


def test_lda_is_seed_deterministic():
    docs, red, _ = two_topic_corpus()
    cfg = TextModelConfig(lda_topics=3, lda_seed=11, lda_sweeps=30)
    a = CorpusModels.fit(docs, config=cfg, lsi=False)
    b = CorpusModels.fit(docs, config=cfg, lsi=False)
    assert np.array_equal(a.lda.nkw, b.lda.nkw)
    assert np.array_equal(a.topic_vector(red), b.topic_vector(red))


def test_lda_stopwords_removed():
    docs, red, _ = two_topic_corpus()
    m = CorpusModels.fit(docs, stopwords=set(red), config=TextModelConfig(lda_topics=2, lda_sweeps=10),
                         lsi=False)
    assert m.lda_similarity(red[:2], red[:2]) == 0.0  # nothing left after stopword removal


def test_models_roundtrip(tmp_path, toy_models):
    path = tmp_path / "sim.json"
    toy_models.save(path)
    loaded = CorpusModels.load(path)
    for a in TOY:
        for b in TOY:
            assert loaded.tfidf_similarity(a, b) == toy_models.tfidf_similarity(a, b)
            assert loaded.lsi_similarity(a, b) == toy_models.lsi_similarity(a, b)
            assert loaded.lda_similarity(a, b) == toy_models.lda_similarity(a, b)
