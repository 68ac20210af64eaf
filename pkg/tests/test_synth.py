"""
Tests for the synthetic corpus generator
"""
from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import chisquare

from modules.config import SynthConfig
from modules.corpus import clean, open_corpus
from modules.synth import (
    GROUND_TRUTH_COLUMNS,
    cohort_uniformity_expectation,
    generate,
    read_ground_truth,
    topic_vocabulary,
    write_corpus,
)


@pytest.fixture(scope="module")
def corpus():
    return generate(SynthConfig(num_papers=400, num_authors=80, num_years=5, horizon_years=2, seed=11))


def test_generation_is_deterministic(tiny_synth_config):
    first, second = generate(tiny_synth_config), generate(tiny_synth_config)
    assert first.records == second.records
    assert first.ground_truth.equals(second.ground_truth)
    other = generate(tiny_synth_config.model_copy(update={"seed": 8}))
    assert other.records != first.records


def test_references_point_strictly_backwards(corpus):
    year_of = {r.id: r.year for r in corpus.records}
    for r in corpus.records:
        assert len(set(r.references)) == len(r.references)
        assert all(year_of[ref] < r.year for ref in r.references)


def test_corpus_survives_cleaning_untouched(corpus):
    kept, report = clean(corpus.records)
    assert report.dropped == 0
    assert report.affiliations_filled == 0
    assert kept == corpus.records


def test_observed_and_future_years(corpus):
    years = Counter(r.year for r in corpus.records)
    assert sorted(years) == [2000, 2001, 2002, 2003, 2004, 2005, 2006]
    assert sum(years[y] for y in range(2000, 2005)) == 400
    assert years[2005] == years[2006] == 80
    assert corpus.last_observed_year == 2004
    assert [r.id for r in corpus.records[:3]] == ["1", "2", "3"]


def test_ground_truth_counts_match_the_records(corpus):
    truth = corpus.ground_truth
    assert tuple(truth.columns) == GROUND_TRUTH_COLUMNS
    assert len(truth) == 400
    snapshot, future = Counter(), Counter()
    for r in corpus.records:
        target = snapshot if r.year <= corpus.last_observed_year else future
        target.update(r.references)
    for row in truth.itertuples(index=False):
        assert row.snapshot_count == snapshot[row.paper_id]
        assert row.future_count == future[row.paper_id]
    assert (truth["fitness"] > 0).all()


def test_topic_vocabularies_are_disjoint_words():
    assert topic_vocabulary(0, 3) == ["zqa", "zqb", "zqc"]
    assert topic_vocabulary(1, 3) == ["zqd", "zqe", "zqf"]
    assert topic_vocabulary(0, 30)[26] == "zqba"
    words = [set(topic_vocabulary(k, 40)) for k in range(5)]
    assert sum(len(w) for w in words) == len(set().union(*words))


def test_uniform_attachment_matches_cohort_expectation():
    config = SynthConfig(
        num_papers=2000,
        num_years=10,
        horizon_years=0,
        attachment_strength=0.0,
        fitness_weight=0.0,
        same_topic_bias=1.0,
        seed=0,
    )
    observed, expected = cohort_uniformity_expectation(generate(config).records)
    assert observed.sum() == pytest.approx(expected.sum())
    _, p_value = chisquare(observed, expected)
    assert p_value > 0.01


def test_preferential_attachment_produces_a_heavy_tail():
    config = SynthConfig(num_papers=2000, attachment_strength=5.0, noise=0.5, seed=1)
    records = generate(config).records
    in_degree = Counter(ref for r in records for ref in r.references)
    counts = np.array([in_degree[r.id] for r in records])
    assert counts.max() >= 5 * max(np.median(counts), 1)


def test_written_corpus_parses_back(tmp_path, corpus):
    summary = write_corpus(corpus, tmp_path / "synth")
    assert summary["papers"] == len(corpus.records)
    assert summary["last_observed_year"] == 2004
    parsed = open_corpus(tmp_path / "synth" / "corpus.txt")
    assert parsed.diagnostics == []
    assert parsed.records == corpus.records
    truth = read_ground_truth(tmp_path / "synth" / "ground_truth.csv")
    assert truth["paper_id"].tolist() == corpus.ground_truth["paper_id"].tolist()
    np.testing.assert_array_equal(truth["fitness"].to_numpy(), corpus.ground_truth["fitness"].to_numpy())


def test_heavy_citing_topics_write_longer_lists_and_collect_more_citations():
    config = SynthConfig(
        num_papers=1500,
        num_years=3,
        horizon_years=1,
        num_topics=2,
        topic_refs=[2.0, 20.0],
        same_topic_bias=50.0,
        recency_decay=3.0,
        attachment_strength=0.0,
        fitness_weight=0.0,
        seed=4,
    )
    corpus = generate(config)
    truth = corpus.ground_truth.set_index("paper_id")
    lengths = {0: [], 1: []}
    for r in corpus.records:
        if 2001 <= r.year <= corpus.last_observed_year:
            lengths[int(truth.loc[r.id, "topic"])].append(len(r.references))
    assert np.mean(lengths[1]) > 5 * np.mean(lengths[0])
    window = truth[truth["year"] == corpus.last_observed_year]
    by_topic = window.groupby("topic")["future_count"].mean()
    assert by_topic[1] > 4 * by_topic[0]


def test_recency_decay_concentrates_references_on_the_previous_year():
    def previous_year_share(decay):
        config = SynthConfig(
            num_papers=1000,
            num_years=5,
            horizon_years=0,
            recency_decay=decay,
            attachment_strength=0.0,
            fitness_weight=0.0,
            same_topic_bias=1.0,
            seed=2,
        )
        records = generate(config).records
        year_of = {r.id: r.year for r in records}
        ages = [r.year - year_of[ref] for r in records if r.year >= 2002 for ref in r.references]
        return np.mean(np.asarray(ages) == 1)

    assert previous_year_share(3.0) > 0.85
    assert previous_year_share(0.0) < 0.5


@pytest.mark.parametrize("refs", [[1.0, 2.0], [1.0, -2.0, 3.0]])
def test_topic_refs_are_validated(refs):
    with pytest.raises(ValidationError):
        SynthConfig(num_topics=3, topic_refs=refs)
