"""
LDA topic model over titles and abstracts (collapsed Gibbs sampling).

Supplies the document-topic distributions p(z|d) used by the popularity and
diversity features.
"""
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment
from tqdm import tqdm

from modules import storage
from modules.corpus import PaperRecord
from modules.errors import ConfigError, DataError

TOPIC_MODEL_KIND = "topic-model"

_TOKEN_RE = re.compile(r"[^\W\d_]+")


def _load_stopwords() -> frozenset:
    path = Path(__file__).parent / "data" / "stopwords.txt"
    with open(path, "r", encoding="utf-8") as f:
        return frozenset(line.strip() for line in f if line.strip() and not line.startswith("#"))


STOPWORDS = _load_stopwords()


def tokenize(record: PaperRecord) -> List[str]:
    text = f"{record.title} {record.abstract}".lower()
    return [t for t in _TOKEN_RE.findall(text) if len(t) >= 2 and t not in STOPWORDS]


@dataclass(frozen=True)
class TopicModel:
    num_topics: int
    vocabulary: Dict[str, int]
    topic_word: np.ndarray
    alpha: float
    beta: float
    seed: int
    inference_iterations: int = 20


@dataclass(frozen=True)
class DocTopics:
    """Paper id -> length-K vector p(z|d)"""

    num_topics: int
    vectors: Dict[str, np.ndarray]

    def __getitem__(self, paper_id: str) -> np.ndarray:
        return self.vectors[paper_id]

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self) -> Iterator[str]:
        return iter(self.vectors)


def build_vocabulary(docs: Sequence[Sequence[str]], min_df: int = 2) -> Dict[str, int]:
    """Tokens present in at least min_df documents, indexed in sorted order"""
    df = Counter()
    for doc in docs:
        df.update(set(doc))
    kept = sorted(token for token, n in df.items() if n >= min_df)
    return {token: i for i, token in enumerate(kept)}


def _draw(weights: np.ndarray, u: float) -> int:
    cumulative = np.cumsum(weights)
    k = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
    return min(k, len(weights) - 1)


def fit_lda(
    docs: Sequence[Sequence[str]],
    num_topics: int,
    alpha: float,
    beta: float,
    iterations: int,
    seed: int,
    min_df: int = 2,
    inference_iterations: int = 20,
    verbose: bool = False,
) -> TopicModel:
    """Fit LDA by collapsed Gibbs sampling; deterministic for a fixed seed

    Args:
        docs: token lists, one per document
        num_topics: K, at least 2
        alpha: symmetric document-topic prior
        beta: symmetric topic-word prior
        iterations: number of full Gibbs sweeps
        seed: sampler seed
        min_df: vocabulary keeps tokens found in at least this many documents
    """
    if num_topics < 2:
        raise ConfigError("LDA needs at least 2 topics")
    if iterations < 1:
        raise ConfigError("LDA needs at least one Gibbs sweep")
    if not any(docs):
        raise DataError("cannot fit a topic model on an all-empty corpus")
    vocabulary = build_vocabulary(docs, min_df)
    if not vocabulary:
        raise DataError(f"no token appears in {min_df} or more documents")

    K, V = num_topics, len(vocabulary)
    words: List[int] = []
    doc_of: List[int] = []
    for d, doc in enumerate(docs):
        for token in doc:
            w = vocabulary.get(token)
            if w is not None:
                words.append(w)
                doc_of.append(d)

    rng = np.random.default_rng(seed)
    z = rng.integers(K, size=len(words))
    n_dk = np.zeros((len(docs), K))
    n_kw = np.zeros((K, V))
    n_k = np.zeros(K)
    for w, d, k in zip(words, doc_of, z):
        n_dk[d, k] += 1
        n_kw[k, w] += 1
        n_k[k] += 1

    v_beta = V * beta
    for _ in tqdm(range(iterations), desc="LDA sweeps", disable=not verbose):
        uniforms = rng.random(len(words))
        for i, (w, d) in enumerate(zip(words, doc_of)):
            k = z[i]
            n_dk[d, k] -= 1
            n_kw[k, w] -= 1
            n_k[k] -= 1
            p = (n_dk[d] + alpha) * (n_kw[:, w] + beta) / (n_k + v_beta)
            k = _draw(p, uniforms[i])
            z[i] = k
            n_dk[d, k] += 1
            n_kw[k, w] += 1
            n_k[k] += 1

    topic_word = (n_kw + beta) / (n_k[:, None] + v_beta)
    return TopicModel(
        num_topics=K,
        vocabulary=vocabulary,
        topic_word=topic_word,
        alpha=alpha,
        beta=beta,
        seed=seed,
        inference_iterations=inference_iterations,
    )


def _infer_one(model: TopicModel, position: int, tokens: Sequence[str], iterations: int) -> np.ndarray:
    K = model.num_topics
    words = [model.vocabulary[t] for t in tokens if t in model.vocabulary]
    if not words:
        return np.full(K, 1.0 / K)
    # Seeded by position so the result does not depend on which worker runs it
    rng = np.random.default_rng([model.seed, position])
    z = rng.integers(K, size=len(words))
    n_k = np.bincount(z, minlength=K).astype(float)
    phi = model.topic_word
    for _ in range(iterations):
        uniforms = rng.random(len(words))
        for i, w in enumerate(words):
            n_k[z[i]] -= 1
            k = _draw((n_k + model.alpha) * phi[:, w], uniforms[i])
            z[i] = k
            n_k[k] += 1
    return (n_k + model.alpha) / (len(words) + K * model.alpha)


def infer_doc_topics(
    model: TopicModel,
    docs: Mapping[str, Sequence[str]],
    iterations: Optional[int] = None,
    workers: int = 1,
) -> DocTopics:
    """Gibbs inference of p(z|d) with the topic-word matrix frozen

    Empty documents (after vocabulary filtering) get the uniform vector.
    """
    sweeps = iterations if iterations is not None else model.inference_iterations
    items = list(docs.items())

    def run(job: Tuple[int, Tuple[str, Sequence[str]]]) -> np.ndarray:
        position, (_, tokens) = job
        return _infer_one(model, position, tokens, sweeps)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vectors = list(pool.map(run, enumerate(items)))
    else:
        vectors = [run(job) for job in enumerate(items)]
    return DocTopics(model.num_topics, {pid: vec for (pid, _), vec in zip(items, vectors)})


def match_topics(model: TopicModel, planted_word_sets: Sequence[Sequence[str]]) -> Tuple[Dict[int, int], np.ndarray]:
    """Match planted word classes to fitted topics by maximum total word mass

    Returns the class -> topic assignment and the class x topic mass matrix.
    """
    mass = np.zeros((len(planted_word_sets), model.num_topics))
    for c, words in enumerate(planted_word_sets):
        columns = [model.vocabulary[w] for w in words if w in model.vocabulary]
        if columns:
            mass[c] = model.topic_word[:, columns].sum(axis=1)
    rows, cols = linear_sum_assignment(-mass)
    return {int(r): int(c) for r, c in zip(rows, cols)}, mass


def save_topic_model(model: TopicModel, path: Path) -> str:
    words = sorted(model.vocabulary, key=model.vocabulary.get)
    payload = {
        "num_topics": model.num_topics,
        "vocabulary": words,
        "topic_word": model.topic_word,
        "alpha": model.alpha,
        "beta": model.beta,
        "seed": model.seed,
        "inference_iterations": model.inference_iterations,
    }
    return storage.write_artifact(path, TOPIC_MODEL_KIND, payload)


def load_topic_model(path: Path) -> TopicModel:
    payload = storage.read_artifact(path, TOPIC_MODEL_KIND)
    return TopicModel(
        num_topics=payload["num_topics"],
        vocabulary={w: i for i, w in enumerate(payload["vocabulary"])},
        topic_word=payload["topic_word"],
        alpha=payload["alpha"],
        beta=payload["beta"],
        seed=payload["seed"],
        inference_iterations=payload["inference_iterations"],
    )


def doc_topics_to_csv(doc_topics: DocTopics, path: Path):
    columns = [f"p_{k}" for k in range(doc_topics.num_topics)]
    frame = pd.DataFrame(
        [vec for vec in doc_topics.vectors.values()], columns=columns, index=list(doc_topics.vectors)
    )
    frame.index.name = "paper_id"
    frame.to_csv(path, float_format="%.17g", lineterminator="\n")


def doc_topics_from_csv(path: Path) -> DocTopics:
    frame = pd.read_csv(path, dtype={"paper_id": str}, float_precision="round_trip").set_index("paper_id")
    vectors = {pid: row.to_numpy(dtype=float) for pid, row in frame.iterrows()}
    return DocTopics(frame.shape[1], vectors)
