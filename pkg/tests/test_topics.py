import numpy as np
import pytest

from psmdetect.errors import EmptyCorpus, ModelFormatError
from psmdetect.topics import (
    TopicDistribution,
    infer_distribution,
    load_topic_model,
    save_topic_model,
    topic_feature_block,
    train_lda,
)


def planted_corpus(rng, n_docs=40, doc_len=30):
    """Two disjoint vocabularies; even docs draw from group A, odd from B."""
    vocab_a = [f"a{i:02d}" for i in range(40)]
    vocab_b = [f"b{i:02d}" for i in range(40)]
    docs, groups = [], []
    for d in range(n_docs):
        vocab = vocab_a if d % 2 == 0 else vocab_b
        docs.append([vocab[rng.integers(len(vocab))] for _ in range(doc_len)])
        groups.append(d % 2)
    return docs, groups


@pytest.fixture(scope="module")
def two_topic_model():
    rng = np.random.default_rng(3)
    docs, groups = planted_corpus(rng)
    model = train_lda(docs, k=2, alpha=1.0, beta=0.01, iterations=200, seed=5)
    return model, docs, groups


def test_k_topics_shape():
    docs = [[f"w{i}", f"w{i}"] for i in range(30)]
    model = train_lda(docs, k=25, alpha=2.0, beta=0.01, iterations=10, seed=0)
    assert model.k == 25
    assert model.topic_word_counts.shape == (25, len(model.vocab))
    assert model.topic_totals.shape == (25,)


def test_single_word_degenerate_mass():
    model = train_lda([["word", "word", "word"]], k=3, iterations=20, seed=1,
                      min_word_count=1)
    assert model.vocab == ["word"]
    # every populated topic gives the sole word probability 1 once the
    # beta smoothing is removed
    assert model.topic_totals.sum() == 3
    for t in range(3):
        assert model.topic_word_counts[t, 0] == model.topic_totals[t]


def test_counts_consistency(two_topic_model):
    model, _, _ = two_topic_model
    assert np.array_equal(model.topic_word_counts.sum(axis=1), model.topic_totals)


def test_topic_purity_on_disjoint_vocabularies(two_topic_model):
    model, _, _ = two_topic_model
    mass_a = model.topic_word_counts[:, [w.startswith("a") for w in model.vocab]].sum(axis=1)
    mass_b = model.topic_word_counts[:, [w.startswith("b") for w in model.vocab]].sum(axis=1)
    purity = (np.maximum(mass_a, mass_b)).sum() / model.topic_totals.sum()
    assert purity >= 0.9


def test_training_determinism_and_seed_sensitivity():
    rng = np.random.default_rng(9)
    docs, _ = planted_corpus(rng, n_docs=12, doc_len=15)
    a = train_lda(docs, k=4, iterations=30, seed=42)
    b = train_lda(docs, k=4, iterations=30, seed=42)
    assert np.array_equal(a.topic_word_counts, b.topic_word_counts)
    assert a.ll_start == b.ll_start and a.ll_end == b.ll_end
    c = train_lda(docs, k=4, iterations=30, seed=43)
    assert not np.array_equal(a.topic_word_counts, c.topic_word_counts)


def test_log_likelihood_trend(two_topic_model):
    model, _, _ = two_topic_model
    assert model.ll_end >= model.ll_start


def test_empty_corpus_raises():
    with pytest.raises(EmptyCorpus):
        train_lda([], k=2)
    with pytest.raises(EmptyCorpus):
        train_lda([["solo"]], k=2, min_word_count=2)  # nothing reaches the cut


def test_inferred_theta_is_simplex(two_topic_model):
    model, docs, _ = two_topic_model
    for doc in docs[:10]:
        theta = infer_distribution(model, doc, 30, seed=1).theta
        assert np.all(theta >= 0)
        assert abs(theta.sum() - 1.0) <= 1e-9


def test_empty_document_uniform(two_topic_model):
    model, _, _ = two_topic_model
    theta = infer_distribution(model, [], 30, seed=1).theta
    assert np.allclose(theta, 0.5)
    oov = infer_distribution(model, ["zz", "qq"], 30, seed=1).theta
    assert np.allclose(oov, 0.5)


def test_inference_assigns_planted_group(two_topic_model):
    model, docs, groups = two_topic_model
    mass_a = model.topic_word_counts[:, [w.startswith("a") for w in model.vocab]].sum(axis=1)
    topic_of_a = int(np.argmax(mass_a))
    hits = 0
    for doc, group in zip(docs, groups):
        theta = infer_distribution(model, doc, 30, seed=2).theta
        predicted_a = int(np.argmax(theta)) == topic_of_a
        hits += predicted_a == (group == 0)
    assert hits / len(docs) >= 0.9


def test_inference_does_not_mutate_model(two_topic_model):
    model, docs, _ = two_topic_model
    before = model.topic_word_counts.copy()
    totals = model.topic_totals.copy()
    infer_distribution(model, docs[0], 30, seed=3)
    assert np.array_equal(model.topic_word_counts, before)
    assert np.array_equal(model.topic_totals, totals)


def test_inference_deterministic(two_topic_model):
    model, docs, _ = two_topic_model
    a = infer_distribution(model, docs[0], 30, seed=4).theta
    b = infer_distribution(model, docs[0], 30, seed=4).theta
    assert np.array_equal(a, b)


def test_topic_feature_block():
    d1 = TopicDistribution(theta=np.array([0.2, 0.8]))
    d2 = TopicDistribution(theta=np.array([0.6, 0.4]))
    assert topic_feature_block([d1], 2) == [0.2, 0.8]
    mean = topic_feature_block([d1, d2], 2)
    assert mean == pytest.approx([0.4, 0.6])
    assert sum(mean) == pytest.approx(1.0)
    assert topic_feature_block([], 25) == [0.0] * 25


def test_save_load_roundtrip_and_magic(tmp_path, two_topic_model):
    model, _, _ = two_topic_model
    path = tmp_path / "model.ldamodel"
    save_topic_model(model, path)
    assert path.read_text(encoding="utf-8").startswith("LDAMODEL/1\n")
    loaded = load_topic_model(path)
    assert loaded.k == model.k and loaded.vocab == model.vocab
    assert np.array_equal(loaded.topic_word_counts, model.topic_word_counts)
    assert (loaded.alpha, loaded.beta, loaded.seed) == (model.alpha, model.beta, model.seed)

    bad = tmp_path / "bad.ldamodel"
    bad.write_text("WRONG/9\n{}", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        load_topic_model(bad)


def test_identical_seeds_byte_identical_artifacts(tmp_path):
    rng = np.random.default_rng(1)
    docs, _ = planted_corpus(rng, n_docs=10, doc_len=12)
    p1, p2 = tmp_path / "m1", tmp_path / "m2"
    save_topic_model(train_lda(docs, k=3, iterations=25, seed=7), p1)
    save_topic_model(train_lda(docs, k=3, iterations=25, seed=7), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_fewer_docs_than_topics_warns(caplog):
    import logging

    with caplog.at_level(logging.WARNING, logger="psmdetect.topics"):
        train_lda([["aa", "bb"], ["aa", "cc"]], k=5, iterations=5, seed=0,
                  min_word_count=1)
    assert any("topics may be unstable" in r.message for r in caplog.records)
