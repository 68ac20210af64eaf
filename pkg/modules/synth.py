"""
Synthetic bibliographic corpora with planted citation dynamics

Papers arrive year by year. Each one picks a topic, one to five authors and a
venue, then cites strictly earlier papers with probability proportional to

    (1 + attachment_strength * in_degree) * fitness ** fitness_weight
        * topic_attention[topic] * (same_topic_bias if same topic else 1)
        * exp(-recency_decay * age)

A paper's fitness is a saturating function of the mean fitness of the papers
it cites, times log-normal noise, so future citations depend nonlinearly on
the neighbourhood. Reference-list length is Poisson with a per-topic mean
(topic_refs); with a strong same-topic bias, fields that cite heavily also
collect more citations per paper, a rate that is visible at the cutoff only
through the citation counts and reference lists around a paper. After the
observed years the process keeps running for horizon_years; citations
received in those years are the ground truth.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd

from modules.config import SynthConfig
from modules.corpus import PaperRecord, serialize_aminer

GROUND_TRUTH_COLUMNS = ("paper_id", "year", "topic", "fitness", "snapshot_count", "future_count")
MAX_AUTHORS = 5
_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class SynthCorpus:
    records: List[PaperRecord]
    ground_truth: pd.DataFrame
    topic_words: List[List[str]]
    last_observed_year: int


def topic_vocabulary(topic: int, size: int) -> List[str]:
    """Letter-only pseudo-words unique to one topic"""
    words = []
    for w in range(size):
        n = topic * size + w
        suffix = ""
        while True:
            n, r = divmod(n, 26)
            suffix = _LETTERS[r] + suffix
            if n == 0:
                break
        words.append("zq" + suffix)
    return words


def _venue_name(v: int) -> str:
    if v % 2 == 0:
        return f"Journal of Synthetic Studies {_LETTERS[v // 2 % 26].upper()}"
    return f"Proceedings of the Synthetic Conference {_LETTERS[v // 2 % 26].upper()}"


def _fitness(parent_mean: float, noise: float, rng: np.random.Generator) -> float:
    return float((0.5 + 1.5 * np.tanh(parent_mean)) * np.exp(noise * rng.standard_normal()))


def _text(rng: np.random.Generator, topic: int, count: int, vocab: Sequence[Sequence[str]]) -> str:
    # mostly on-topic words with a little cross-topic bleed
    words = []
    for _ in range(count):
        k = topic if rng.random() < 0.85 or len(vocab) == 1 else int(rng.integers(len(vocab)))
        words.append(vocab[k][int(rng.integers(len(vocab[k])))])
    return " ".join(words)


def generate(config: SynthConfig) -> SynthCorpus:
    """Simulate the corpus; identical configs give identical corpora"""
    rng = np.random.default_rng(config.seed)
    k_topics = config.num_topics
    if config.topic_weights is not None:
        weights = np.asarray(config.topic_weights, dtype=float)
        topic_share = weights / weights.sum()
    else:
        topic_share = np.full(k_topics, 1.0 / k_topics)
    attention = topic_share * k_topics
    if config.topic_refs is not None:
        refs_mean = np.asarray(config.topic_refs, dtype=float)
    else:
        refs_mean = np.full(k_topics, config.refs_per_paper)
    vocab = [topic_vocabulary(k, config.words_per_topic) for k in range(k_topics)]
    affiliations = [f"Institute {_LETTERS[a % 26].upper()}{a // 26}" for a in range(config.num_authors)]

    observed = [len(c) for c in np.array_split(np.arange(config.num_papers), config.num_years)]
    per_future_year = max(1, config.num_papers // config.num_years)
    year_sizes = observed + [per_future_year] * config.horizon_years
    last_observed = config.start_year + config.num_years - 1

    total = sum(year_sizes)
    topics = np.zeros(total, dtype=np.int64)
    fitness = np.zeros(total)
    years = np.zeros(total, dtype=np.int64)
    in_degree = np.zeros(total)
    snapshot_count = np.zeros(total, dtype=np.int64)
    future_count = np.zeros(total, dtype=np.int64)
    records: List[PaperRecord] = []

    idx = 0
    for offset, size in enumerate(year_sizes):
        year = config.start_year + offset
        earlier = idx
        for _ in range(size):
            topic = int(rng.choice(k_topics, p=topic_share))
            n_refs = min(int(rng.poisson(refs_mean[topic])), earlier)
            refs: np.ndarray = np.zeros(0, dtype=np.int64)
            if n_refs > 0:
                w = (1.0 + config.attachment_strength * in_degree[:earlier])
                w = w * fitness[:earlier] ** config.fitness_weight * attention[topics[:earlier]]
                w = np.where(topics[:earlier] == topic, w * config.same_topic_bias, w)
                if config.recency_decay > 0:
                    w = w * np.exp(-config.recency_decay * (year - years[:earlier]))
                refs = np.sort(rng.choice(earlier, size=n_refs, replace=False, p=w / w.sum()))
                in_degree[refs] += 1
                if year <= last_observed:
                    snapshot_count[refs] += 1
                else:
                    future_count[refs] += 1
            parent_mean = float(fitness[refs].mean()) if len(refs) else 1.0
            fitness[idx] = _fitness(parent_mean, config.noise, rng)
            topics[idx] = topic
            years[idx] = year

            team = int(rng.integers(1, MAX_AUTHORS + 1))
            team = min(team, config.num_authors)
            members = rng.choice(config.num_authors, size=team, replace=False)
            records.append(
                PaperRecord(
                    id=str(idx + 1),
                    title=_text(rng, topic, config.title_words, vocab),
                    abstract=_text(rng, topic, config.abstract_words, vocab),
                    authors=tuple(f"Author {int(a)}" for a in members),
                    affiliations=tuple(affiliations[int(a)] for a in members),
                    venue=_venue_name(int(rng.integers(config.num_venues))),
                    year=year,
                    references=tuple(str(int(r) + 1) for r in refs),
                )
            )
            idx += 1

    n_observed = sum(observed)
    truth = pd.DataFrame(
        {
            "paper_id": [str(i + 1) for i in range(n_observed)],
            "year": years[:n_observed],
            "topic": topics[:n_observed],
            "fitness": fitness[:n_observed],
            "snapshot_count": snapshot_count[:n_observed],
            "future_count": future_count[:n_observed],
        },
        columns=list(GROUND_TRUTH_COLUMNS),
    )
    return SynthCorpus(records, truth, vocab, last_observed)


def write_corpus(corpus: SynthCorpus, out_dir: Path) -> dict:
    """Write corpus.txt (AMiner v1) and ground_truth.csv into out_dir"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / "corpus.txt"
    truth_path = out_dir / "ground_truth.csv"
    with open(corpus_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_aminer(corpus.records))
    corpus.ground_truth.to_csv(truth_path, index=False, float_format="%.17g", lineterminator="\n")
    return {
        "corpus": str(corpus_path),
        "ground_truth": str(truth_path),
        "papers": len(corpus.records),
        "last_observed_year": corpus.last_observed_year,
    }


def read_ground_truth(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"paper_id": str}, float_precision="round_trip")


def cohort_uniformity_expectation(records: Sequence[PaperRecord]):
    """Observed and expected in-degree per arrival-year cohort under uniform attachment

    A paper citing k of the n strictly earlier papers contributes k/n expected
    citations to each of them. Cohorts with zero expectation are dropped.
    """
    ordered = sorted(records, key=lambda r: (r.year, int(r.id) if r.id.isdigit() else 0))
    year_of = {r.id: r.year for r in ordered}
    cohorts = sorted({r.year for r in ordered})
    cohort_size = {y: sum(1 for r in ordered if r.year == y) for y in cohorts}
    expected = {y: 0.0 for y in cohorts}
    observed = {y: 0 for y in cohorts}
    for r in ordered:
        earlier = [y for y in cohorts if y < r.year]
        n_earlier = sum(cohort_size[y] for y in earlier)
        if n_earlier == 0 or not r.references:
            continue
        share = len(r.references) / n_earlier
        for y in earlier:
            expected[y] += share * cohort_size[y]
        for ref in r.references:
            observed[year_of[ref]] += 1
    keep = [y for y in cohorts if expected[y] > 0]
    return np.array([observed[y] for y in keep], dtype=float), np.array([expected[y] for y in keep])
