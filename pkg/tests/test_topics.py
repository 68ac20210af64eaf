"""
Tests for tokenization, collapsed Gibbs LDA and topic inference
"""
import numpy as np
import pytest

from modules.corpus import PaperRecord
from modules.errors import ConfigError, DataError
from modules.topics import (
    DocTopics,
    build_vocabulary,
    doc_topics_from_csv,
    doc_topics_to_csv,
    fit_lda,
    infer_doc_topics,
    load_topic_model,
    match_topics,
    save_topic_model,
    tokenize,
)

PLANTED = [[f"{prefix}{letter}" for letter in "abcdefghij"] for prefix in ("alpha", "beta", "gamma")]


def planted_corpus(seed=0, docs_per_topic=20, length=30):
    rng = np.random.default_rng(seed)
    docs, labels = [], []
    for topic, words in enumerate(PLANTED):
        for _ in range(docs_per_topic):
            docs.append([words[i] for i in rng.integers(len(words), size=length)])
            labels.append(topic)
    return docs, labels


@pytest.fixture(scope="module")
def planted_model():
    docs, labels = planted_corpus()
    model = fit_lda(docs, num_topics=3, alpha=0.1, beta=0.01, iterations=60, seed=1)
    return model, docs, labels


def test_tokenize_rules():
    assert tokenize(PaperRecord("1", title="A GCN-based Framework")) == ["gcn", "based", "framework"]
    assert tokenize(PaperRecord("1")) == []
    assert tokenize(PaperRecord("1", title="The the THE")) == []
    assert tokenize(PaperRecord("1", title="x 42 graphs", abstract="Graphs!")) == ["graphs", "graphs"]


def test_vocabulary_min_df():
    vocab = build_vocabulary([["b", "a"], ["a", "c"], ["a", "b"]], min_df=2)
    assert vocab == {"a": 0, "b": 1}


def test_topic_word_rows_are_simplexes(planted_model):
    model, _, _ = planted_model
    assert model.topic_word.shape == (3, 30)
    assert np.all(model.topic_word >= 0)
    np.testing.assert_allclose(model.topic_word.sum(axis=1), 1.0, atol=1e-9)


def test_planted_vocabularies_concentrate_in_distinct_topics(planted_model):
    model, _, _ = planted_model
    assignment, mass = match_topics(model, PLANTED)
    assert sorted(assignment.values()) == [0, 1, 2]
    for c, k in assignment.items():
        assert mass[c, k] / mass[c].sum() >= 0.8


def test_planted_documents_recover_their_topic(planted_model):
    model, docs, labels = planted_model
    assignment, _ = match_topics(model, PLANTED)
    doc_topics = infer_doc_topics(model, {str(i): doc for i, doc in enumerate(docs)}, iterations=20)
    hits = sum(doc_topics[str(i)][assignment[label]] >= 0.6 for i, label in enumerate(labels))
    assert hits >= 0.8 * len(docs)
    for pid in doc_topics:
        assert abs(doc_topics[pid].sum() - 1.0) < 1e-9


def test_fit_is_deterministic():
    docs, _ = planted_corpus(seed=3, docs_per_topic=5, length=10)
    first = fit_lda(docs, 3, 0.1, 0.01, iterations=10, seed=9)
    second = fit_lda(docs, 3, 0.1, 0.01, iterations=10, seed=9)
    assert np.array_equal(first.topic_word, second.topic_word)


def test_document_order_changes_topics_only_up_to_permutation():
    docs, _ = planted_corpus(seed=5)
    order = np.random.default_rng(2).permutation(len(docs))
    first = fit_lda(docs, 3, 0.1, 0.01, iterations=60, seed=4)
    second = fit_lda([docs[i] for i in order], 3, 0.1, 0.01, iterations=60, seed=4)
    match_first, _ = match_topics(first, PLANTED)
    match_second, _ = match_topics(second, PLANTED)
    for c in range(3):
        row_a = first.topic_word[match_first[c]]
        row_b = second.topic_word[match_second[c]]
        assert 0.5 * np.abs(row_a - row_b).sum() <= 0.1


def test_repeated_single_document():
    doc = ["graph", "network", "citation", "graph"]
    model = fit_lda([doc, doc], num_topics=2, alpha=0.5, beta=0.01, iterations=5, seed=0)
    np.testing.assert_allclose(model.topic_word.sum(axis=1), 1.0, atol=1e-9)


def test_fit_preconditions():
    with pytest.raises(DataError):
        fit_lda([[], []], 2, 0.1, 0.01, 5, 0)
    with pytest.raises(ConfigError):
        fit_lda([["a"], ["a"]], 1, 0.1, 0.01, 5, 0)


def test_empty_document_gets_uniform_vector(planted_model):
    model, _, _ = planted_model
    doc_topics = infer_doc_topics(model, {"empty": [], "unknown": ["zzz"]})
    np.testing.assert_allclose(doc_topics["empty"], np.full(3, 1 / 3))
    np.testing.assert_allclose(doc_topics["unknown"], np.full(3, 1 / 3))


def test_inference_does_not_depend_on_worker_count(planted_model):
    model, docs, _ = planted_model
    mapping = {str(i): doc for i, doc in enumerate(docs[:12])}
    serial = infer_doc_topics(model, mapping, iterations=5, workers=1)
    threaded = infer_doc_topics(model, mapping, iterations=5, workers=4)
    for pid in mapping:
        assert np.array_equal(serial[pid], threaded[pid])


def test_model_and_doc_topics_persistence(tmp_path, planted_model):
    model, docs, _ = planted_model
    sha = save_topic_model(model, tmp_path / "lda.bin")
    assert sha == save_topic_model(model, tmp_path / "lda2.bin")
    loaded = load_topic_model(tmp_path / "lda.bin")
    assert loaded.vocabulary == model.vocabulary
    assert np.array_equal(loaded.topic_word, model.topic_word)

    doc_topics = infer_doc_topics(model, {"p1": docs[0], "p2": docs[25]}, iterations=3)
    doc_topics_to_csv(doc_topics, tmp_path / "doc_topics.csv")
    restored = doc_topics_from_csv(tmp_path / "doc_topics.csv")
    assert list(restored) == ["p1", "p2"]
    assert np.array_equal(restored["p2"], doc_topics["p2"])


def test_doc_topics_csv_round_trip_is_exact_for_random_vectors(tmp_path, rng):
    vectors = {f"p{i}": rng.dirichlet(np.full(7, 0.3)) for i in range(40)}
    doc_topics_to_csv(DocTopics(7, vectors), tmp_path / "doc_topics.csv")
    restored = doc_topics_from_csv(tmp_path / "doc_topics.csv")
    assert restored.num_topics == 7
    assert all(np.array_equal(restored[pid], vec) for pid, vec in vectors.items())
