"""
Feature engineering: article, author, venue and network families.

Every feature is computed through a CorpusSnapshot, so nothing dated after
the snapshot cutoff can reach a feature row.
"""
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import entr

from modules.corpus import CorpusSnapshot
from modules.errors import ConfigError, DataError
from modules.graph import CitationGraph
from modules.topics import DocTopics, tokenize

ARTICLE_COLUMNS = (
    "citation_quality",
    "popularity",
    "diversity",
    "reference_count",
    "title_length",
    "abstract_length",
)
AUTHOR_COLUMNS = (
    "first_author_papers",
    "max_h_index",
    "total_h_index",
    "mean_h_index",
    "first_author_h_index",
    "mean_author_citations",
    "first_author_citations",
    "max_author_citations",
    "mean_author_papers",
    "top_h_author_papers",
    "coauthor_count",
)
VENUE_COLUMNS = (
    "venue_avg_citations",
    "venue_h_index",
    "venue_paper_count",
    "venue_is_journal",
    "venue_is_conference",
    "venue_rank",
)
NETWORK_COLUMNS = ("times_cited_in_graph", "reference_count_in_graph")

JOURNAL_KEYWORDS = ("journal", "trans.", "transactions")
CONFERENCE_KEYWORDS = ("proc", "conf", "symp", "workshop")

CLAMP_LOW, CLAMP_HIGH = -1.0, 2.0


@dataclass(frozen=True)
class FeatureBlock:
    """Named columns for a set of papers; NaN marks a missing value in an imputable column"""

    name: str
    columns: Tuple[str, ...]
    rows: Dict[str, np.ndarray]
    imputable: FrozenSet[str] = frozenset()


@dataclass(frozen=True)
class NormStats:
    columns: Tuple[str, ...]
    minimum: np.ndarray
    maximum: np.ndarray

    def to_dict(self) -> dict:
        return {
            col: {"min": float(lo), "max": float(hi)}
            for col, lo, hi in zip(self.columns, self.minimum, self.maximum)
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, float]]) -> "NormStats":
        columns = tuple(data)
        return cls(
            columns,
            np.array([data[c]["min"] for c in columns], dtype=float),
            np.array([data[c]["max"] for c in columns], dtype=float),
        )


@dataclass(frozen=True)
class FeatureMatrix:
    node_ids: Tuple[str, ...]
    columns: Tuple[str, ...]
    values: np.ndarray
    norm_stats: Optional[NormStats] = None

    def rows_for(self, ids: Sequence[str]) -> np.ndarray:
        index = {pid: i for i, pid in enumerate(self.node_ids)}
        return self.values[[index[pid] for pid in ids]]

    def to_csv(self, path: Path):
        frame = pd.DataFrame(self.values, columns=list(self.columns), index=list(self.node_ids))
        frame.index.name = "paper_id"
        frame.to_csv(path, float_format="%.17g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path: Path) -> "FeatureMatrix":
        frame = pd.read_csv(path, dtype={"paper_id": str}, float_precision="round_trip").set_index("paper_id")
        return cls(tuple(frame.index), tuple(frame.columns), frame.to_numpy(dtype=float))


@dataclass(frozen=True)
class TopicPopularity:
    values: np.ndarray

    def __getitem__(self, topic: int) -> float:
        return float(self.values[topic])


def citation_quality(paper_id: str, snapshot: CorpusSnapshot) -> float:
    """Mean citation count of a paper's references; absent references count 0"""
    refs = snapshot.record(paper_id).references
    if not refs:
        return 0.0
    counts = snapshot.citation_counts()
    return float(np.mean([counts.get(ref, 0) for ref in refs]))


def topic_popularity(doc_topics: DocTopics, targets: Mapping[str, float], corpus_ids: Sequence[str]) -> TopicPopularity:
    """popularity(z) = (1/|D|) sum_d p(z|d) C_d over corpus_ids"""
    if not corpus_ids:
        raise DataError("topic popularity needs a non-empty corpus")
    missing = [pid for pid in corpus_ids if pid not in doc_topics]
    if missing:
        raise DataError(f"{len(missing)} papers have no topic distribution, e.g. {missing[0]}")
    total = np.zeros(doc_topics.num_topics)
    for pid in corpus_ids:
        total += doc_topics[pid] * float(targets[pid])
    return TopicPopularity(total / len(corpus_ids))


def paper_popularity(paper_id: str, doc_topics: DocTopics, topic_pop: TopicPopularity) -> float:
    p = doc_topics[paper_id]
    return float(np.dot(topic_pop.values, p) / len(p))


def paper_diversity(paper_id: str, doc_topics: DocTopics) -> float:
    """Per-topic-averaged Shannon entropy (nats) of p(z|d); 0 log 0 = 0"""
    p = doc_topics[paper_id]
    return float(entr(p).sum() / len(p))


def h_index(counts: Sequence[int]) -> int:
    ordered = np.sort(np.asarray(counts, dtype=np.int64))[::-1]
    ranks = np.arange(1, len(ordered) + 1)
    return int(np.count_nonzero(ordered >= ranks))


@dataclass(frozen=True)
class _AuthorStats:
    papers: int
    citations: int
    h: int


def _author_stats(author: str, snapshot: CorpusSnapshot, cache: Optional[Dict[str, _AuthorStats]]) -> _AuthorStats:
    if cache is not None and author in cache:
        return cache[author]
    counts = snapshot.citation_counts()
    paper_counts = [counts[e.paper_id] for e in snapshot.author_index.get(author, ())]
    stats = _AuthorStats(len(paper_counts), int(sum(paper_counts)), h_index(paper_counts))
    if cache is not None:
        cache[author] = stats
    return stats


def author_features(
    paper_id: str, snapshot: CorpusSnapshot, cache: Optional[Dict[str, _AuthorStats]] = None
) -> Dict[str, float]:
    """The eleven author features, aggregated over the paper's (deduplicated) author list

    Author paper counts include the paper itself.
    """
    authors = list(dict.fromkeys(snapshot.record(paper_id).authors))
    if not authors:
        raise DataError(f"paper {paper_id} has no authors")
    stats = [_author_stats(a, snapshot, cache) for a in authors]
    hs = [s.h for s in stats]
    citations = [s.citations for s in stats]
    top = int(np.argmax(hs))
    first = stats[0]
    return {
        "first_author_papers": float(first.papers),
        "max_h_index": float(max(hs)),
        "total_h_index": float(sum(hs)),
        "mean_h_index": float(np.mean(hs)),
        "first_author_h_index": float(first.h),
        "mean_author_citations": float(np.mean(citations)),
        "first_author_citations": float(first.citations),
        "max_author_citations": float(max(citations)),
        "mean_author_papers": float(np.mean([s.papers for s in stats])),
        "top_h_author_papers": float(stats[top].papers),
        "coauthor_count": float(len(authors) - 1),
    }


def venue_type(venue: str) -> str:
    name = venue.lower()
    if any(k in name for k in JOURNAL_KEYWORDS):
        return "journal"
    if any(k in name for k in CONFERENCE_KEYWORDS):
        return "conference"
    return "unknown"


def venue_features(
    paper_id: str, snapshot: CorpusSnapshot, venue_ranks: Optional[Mapping[str, float]] = None
) -> Dict[str, float]:
    """Venue citation statistics, inferred type and optional sidecar rank (NaN when missing)"""
    venue = snapshot.record(paper_id).venue
    counts = snapshot.citation_counts()
    venue_counts = [counts[pid] for pid in snapshot.venue_index.get(venue, ())]
    kind = venue_type(venue)
    rank = venue_ranks.get(venue) if venue_ranks else None
    return {
        "venue_avg_citations": float(np.mean(venue_counts)) if venue_counts else 0.0,
        "venue_h_index": float(h_index(venue_counts)),
        "venue_paper_count": float(len(venue_counts)),
        "venue_is_journal": 1.0 if kind == "journal" else 0.0,
        "venue_is_conference": 1.0 if kind == "conference" else 0.0,
        "venue_rank": float(rank) if rank is not None else float("nan"),
    }


def network_features(graph: CitationGraph, paper_id: str, index: Optional[Mapping[str, int]] = None) -> Dict[str, float]:
    """In-graph times cited (edges into the node) and references (edges out of it)"""
    i = (index or graph.index_of())[paper_id]
    return {
        "times_cited_in_graph": float(graph.in_degree[i]),
        "reference_count_in_graph": float(graph.out_degree[i]),
    }


def article_features(
    paper_id: str, snapshot: CorpusSnapshot, doc_topics: DocTopics, topic_pop: TopicPopularity
) -> Dict[str, float]:
    record = snapshot.record(paper_id)
    title_tokens = tokenize(replace(record, abstract=""))
    abstract_tokens = tokenize(replace(record, title=""))
    return {
        "citation_quality": citation_quality(paper_id, snapshot),
        "popularity": paper_popularity(paper_id, doc_topics, topic_pop),
        "diversity": paper_diversity(paper_id, doc_topics),
        "reference_count": float(len(record.references)),
        "title_length": float(len(title_tokens)),
        "abstract_length": float(len(abstract_tokens)),
    }


def _block(name: str, columns: Tuple[str, ...], values: Dict[str, Dict[str, float]], imputable=()) -> FeatureBlock:
    rows = {pid: np.array([v[c] for c in columns], dtype=float) for pid, v in values.items()}
    return FeatureBlock(name, columns, rows, frozenset(imputable))


def article_block(node_ids, snapshot, doc_topics, topic_pop) -> FeatureBlock:
    return _block(
        "article", ARTICLE_COLUMNS, {pid: article_features(pid, snapshot, doc_topics, topic_pop) for pid in node_ids}
    )


def author_block(node_ids, snapshot) -> FeatureBlock:
    cache: Dict[str, _AuthorStats] = {}
    return _block("author", AUTHOR_COLUMNS, {pid: author_features(pid, snapshot, cache) for pid in node_ids})


def venue_block(node_ids, snapshot, venue_ranks=None) -> FeatureBlock:
    return _block(
        "venue", VENUE_COLUMNS, {pid: venue_features(pid, snapshot, venue_ranks) for pid in node_ids},
        imputable=("venue_rank",),
    )


def network_block(node_ids, graph: CitationGraph) -> FeatureBlock:
    index = graph.index_of()
    return _block("network", NETWORK_COLUMNS, {pid: network_features(graph, pid, index) for pid in node_ids})


def assemble(node_ids: Sequence[str], *blocks: FeatureBlock) -> FeatureMatrix:
    """Concatenate blocks in the given order; imputed columns get a companion _missing flag"""
    node_ids = tuple(node_ids)
    if not blocks:
        raise ConfigError("assemble needs at least one feature block")
    parts: List[np.ndarray] = []
    columns: List[str] = []
    flags: List[np.ndarray] = []
    flag_columns: List[str] = []
    for block in blocks:
        gaps = [pid for pid in node_ids if pid not in block.rows]
        if gaps:
            raise DataError(f"feature block '{block.name}' is missing {len(gaps)} papers, e.g. {gaps[0]}")
        values = np.vstack([block.rows[pid] for pid in node_ids]) if node_ids else np.zeros((0, len(block.columns)))
        for j, col in enumerate(block.columns):
            if col in block.imputable:
                missing = np.isnan(values[:, j])
                values[:, j] = np.where(missing, 0.0, values[:, j])
                flags.append(missing.astype(float))
                flag_columns.append(f"{col}_missing")
        parts.append(values)
        columns.extend(block.columns)
    matrix = np.hstack(parts + [f[:, None] for f in flags])
    if not np.all(np.isfinite(matrix)):
        raise DataError("assembled features contain NaN or infinite values")
    return FeatureMatrix(node_ids, tuple(columns + flag_columns), matrix)


def apply_normalization(matrix: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    if tuple(stats.columns) != tuple(matrix.columns):
        raise DataError("normalization statistics were computed for different columns")
    span = stats.maximum - stats.minimum
    safe = np.where(span > 0, span, 1.0)
    scaled = (matrix.values - stats.minimum) / safe
    scaled[:, span <= 0] = 0.0
    scaled = np.clip(scaled, CLAMP_LOW, CLAMP_HIGH)
    return FeatureMatrix(matrix.node_ids, matrix.columns, scaled, stats)


def normalize(matrix: FeatureMatrix, train_rows: Sequence[int]) -> FeatureMatrix:
    """Min-max scale every column with statistics of train_rows only

    Constant columns map to 0; other rows are clamped to [-1, 2].
    """
    train_rows = list(train_rows)
    if not train_rows:
        raise ConfigError("normalization needs at least one training row")
    train = matrix.values[train_rows]
    stats = NormStats(matrix.columns, train.min(axis=0), train.max(axis=0))
    return apply_normalization(matrix, stats)


def save_norm_stats(stats: NormStats, path: Path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(stats.to_dict(), f, indent=2)


def load_norm_stats(path: Path) -> NormStats:
    with open(path, "r", encoding="utf-8") as f:
        return NormStats.from_dict(json.load(f))


def load_venue_ranks(path: Path) -> Dict[str, float]:
    """Sidecar CSV with columns venue,rank"""
    frame = pd.read_csv(path, dtype={"venue": str}, float_precision="round_trip")
    if not {"venue", "rank"} <= set(frame.columns):
        raise DataError(f"venue rank file {path} needs 'venue' and 'rank' columns")
    return {str(v): float(r) for v, r in zip(frame["venue"], frame["rank"]) if pd.notna(r)}


def audit_feature_leakage(matrix: FeatureMatrix, targets: Sequence[float], threshold: float = 0.999) -> List[str]:
    """Columns whose |Pearson r| with the target exceeds threshold"""
    y = np.asarray(targets, dtype=float)
    if len(y) != matrix.values.shape[0]:
        raise DataError("targets do not align with feature rows")
    if len(y) < 2 or np.std(y) == 0:
        return []
    flagged = []
    for j, col in enumerate(matrix.columns):
        x = matrix.values[:, j]
        if np.std(x) == 0:
            continue
        r = np.corrcoef(x, y)[0, 1]
        if abs(r) > threshold:
            flagged.append(col)
    return flagged


@dataclass
class FeatureInputs:
    """Everything needed to build the feature matrix for one experiment"""

    snapshot: CorpusSnapshot
    graph: CitationGraph
    doc_topics: DocTopics
    topic_pop: TopicPopularity
    venue_ranks: Optional[Mapping[str, float]] = None
    groups: Sequence[str] = field(default_factory=lambda: ("article", "author", "venue", "network"))


def build_feature_matrix(inputs: FeatureInputs) -> FeatureMatrix:
    """Assemble the selected groups in the documented column order for every graph node"""
    node_ids = inputs.graph.node_ids
    blocks = []
    if "article" in inputs.groups:
        blocks.append(article_block(node_ids, inputs.snapshot, inputs.doc_topics, inputs.topic_pop))
    if "author" in inputs.groups:
        blocks.append(author_block(node_ids, inputs.snapshot))
    if "venue" in inputs.groups:
        blocks.append(venue_block(node_ids, inputs.snapshot, inputs.venue_ranks))
    if "network" in inputs.groups:
        blocks.append(network_block(node_ids, inputs.graph))
    return assemble(node_ids, *blocks)
