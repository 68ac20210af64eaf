"""
End-to-end experiment pipeline: ingest, prepare (snapshot, split, graph,
topics, features, targets), train, evaluate, cross-validate and report.

Every stage runs inside run_log.stage(), so a failure is reported with the
stage name and the exit code of its cause. The pipeline is a pure function of
the input bytes, the experiment config and the seed.
"""
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from modules import baselines, gcn, storage
from modules.config import ExperimentConfig, Settings
from modules.corpus import (
    CleanReport,
    CorpusSnapshot,
    ParseDiagnostic,
    SplitSpec,
    build_snapshot,
    citation_count,
    clean,
    load_snapshot,
    open_corpus,
    save_snapshot,
    temporal_split,
)
from modules.errors import ConfigError, DataError, ParseError
from modules.evaluation import METRIC_COLUMNS, ROW_COLUMNS, MetricsReport, evaluate, kfold, summarize_folds
from modules.features import (
    FeatureInputs,
    FeatureMatrix,
    audit_feature_leakage,
    build_feature_matrix,
    load_venue_ranks,
    normalize,
    save_norm_stats,
    topic_popularity,
)
from modules.graph import (
    CitationGraph,
    NormalizedAdjacency,
    build_citation_graph,
    normalized_adjacency,
    write_edge_list,
)
from modules.run_log import stage, status
from modules.topics import DocTopics, TopicModel, doc_topics_to_csv, fit_lda, infer_doc_topics, save_topic_model, tokenize

LOWER_IS_BETTER = ("mae", "rmse", "mape")
SNAPSHOT_FILE = "snapshot.bin"


# ---------------------------------------------------------------------------
# Ingest
# ---------------------------------------------------------------------------


@dataclass
class IngestResult:
    snapshot_path: Path
    sha256: str
    report: CleanReport
    diagnostics: List[ParseDiagnostic]
    papers: int
    cutoff_year: int

    def to_dict(self) -> dict:
        return {
            "snapshot_path": str(self.snapshot_path),
            "sha256": self.sha256,
            "clean_report": self.report.to_dict(),
            "dropped": self.report.dropped,
            "diagnostics": [str(d) for d in self.diagnostics],
            "papers": self.papers,
            "cutoff_year": self.cutoff_year,
        }


def default_snapshot_path(settings: Optional[Settings] = None) -> Path:
    settings = settings or Settings()
    return settings.resolved_cache_dir() / SNAPSHOT_FILE


def ingest(
    paths: Sequence[Path],
    snapshot_path: Path,
    productivity_cap: int = 1000,
) -> IngestResult:
    """Parse, clean and cache a corpus snapshot covering every year present

    A file that yields no records at all is fatal; otherwise diagnostics are
    returned next to the cached snapshot.
    """
    if not paths:
        raise ConfigError("ingest needs at least one input path")
    with stage("ingest", inputs=[str(p) for p in paths]):
        records = []
        diagnostics: List[ParseDiagnostic] = []
        for path in paths:
            result = open_corpus(Path(path))
            diagnostics.extend(result.diagnostics)
            if not result.records:
                detail = "; ".join(str(d) for d in result.diagnostics[:5]) or "empty input"
                first_line = result.diagnostics[0].line if result.diagnostics else 0
                raise ParseError(f"{path}: no valid records ({detail})", line=first_line)
            records.extend(result.records)
        kept, report = clean(records, productivity_cap)
        if not kept:
            raise DataError("every record was removed by cleaning")
        cutoff = max(r.year for r in kept)
        snapshot = build_snapshot(kept, cutoff)
        sha = save_snapshot(snapshot, Path(snapshot_path), report)
    for d in diagnostics:
        status(f"⚠️  {d}")
    status(f"✅ Cached {len(snapshot)} papers (cutoff {cutoff}) at {snapshot_path}")
    return IngestResult(Path(snapshot_path), sha, report, diagnostics, len(snapshot), cutoff)


def resolve_snapshot(config: ExperimentConfig, settings: Optional[Settings] = None) -> CorpusSnapshot:
    """Load the cached snapshot, ingesting the config's inputs first when no cache exists"""
    path = Path(config.snapshot_path) if config.snapshot_path else default_snapshot_path(settings)
    if not path.exists():
        if not config.input_paths:
            raise DataError(f"no snapshot cache at {path}; run ingest first")
        ingest(config.input_paths, path, config.productivity_cap)
    with stage("load-snapshot", path=str(path)):
        snapshot, _ = load_snapshot(path)
    return snapshot


# ---------------------------------------------------------------------------
# Prepare
# ---------------------------------------------------------------------------


@dataclass
class Prepared:
    """Everything the models consume for one case"""

    config: ExperimentConfig
    case: str
    split: SplitSpec
    feature_snapshot: CorpusSnapshot
    graph: CitationGraph
    adjacency: NormalizedAdjacency
    topic_model: TopicModel
    doc_topics: DocTopics
    raw_features: FeatureMatrix
    features: FeatureMatrix
    targets: Dict[str, float]
    leaky_columns: List[str] = field(default_factory=list)

    @property
    def index(self) -> Dict[str, int]:
        return self.graph.index_of()

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        index = self.index
        return np.array([index[pid] for pid in ids], dtype=np.int64)

    def target_vector(self) -> np.ndarray:
        """Per-node targets; unlabelled nodes hold 0 and are never in a loss mask"""
        return np.array([self.targets.get(pid, 0.0) for pid in self.graph.node_ids])

    def targets_for(self, ids: Sequence[str]) -> np.ndarray:
        return np.array([self.targets[pid] for pid in ids], dtype=float)


def compute_targets(snapshot: CorpusSnapshot, ids: Sequence[str], horizon: int) -> Dict[str, float]:
    """Citations received in [year, year + horizon] for each paper"""
    targets = {}
    for pid in ids:
        year = snapshot.record(pid).year
        targets[pid] = float(citation_count(snapshot, pid, year, year + horizon))
    return targets


def prepare(config: ExperimentConfig, snapshot: CorpusSnapshot, verbose: bool = False) -> Prepared:
    window = config.case_window()
    case = config.case_label()
    target_cutoff = window.year_end + window.horizon_years
    if snapshot.cutoff_year < target_cutoff:
        raise DataError(
            f"case {case} needs citations through {target_cutoff}, corpus ends at {snapshot.cutoff_year}"
        )

    with stage("split", case=case):
        feature_snapshot = snapshot.restrict(window.year_end)
        split = temporal_split(feature_snapshot, case, config.seed, window=window)
        sample_ids = list(split.train_ids) + list(split.test_ids)
        targets = compute_targets(snapshot, sample_ids, window.horizon_years)

    with stage("graph", scope=config.graph_scope):
        if config.graph_scope == "snapshot":
            pool = feature_snapshot.papers
        else:
            pool = {pid: feature_snapshot.papers[pid] for pid in sample_ids}
        node_ids = [pid for _, pid in sorted((r.year, pid) for pid, r in pool.items())]
        graph = build_citation_graph(feature_snapshot, node_ids)
        adjacency = normalized_adjacency(graph)

    test = set(split.test_ids)
    fit_ids = [pid for pid in node_ids if pid not in test]

    with stage("topics", num_topics=config.lda.num_topics):
        docs = {pid: tokenize(feature_snapshot.record(pid)) for pid in node_ids}
        lda = config.lda
        topic_model = fit_lda(
            [docs[pid] for pid in node_ids],
            num_topics=lda.num_topics,
            alpha=lda.resolved_alpha(),
            beta=lda.beta,
            iterations=lda.iterations,
            seed=lda.seed,
            min_df=lda.min_df,
            inference_iterations=lda.inference_iterations,
            verbose=verbose,
        )
        doc_topics = infer_doc_topics(topic_model, docs, workers=lda.workers)

    with stage("features", groups=list(config.feature_groups)):
        venue_ranks = load_venue_ranks(config.venue_rank_path) if config.venue_rank_path else None
        topic_pop = topic_popularity(doc_topics, feature_snapshot.citation_counts(), fit_ids)
        raw = build_feature_matrix(
            FeatureInputs(feature_snapshot, graph, doc_topics, topic_pop, venue_ranks, tuple(config.feature_groups))
        )
        index = graph.index_of()
        features = normalize(raw, [index[pid] for pid in fit_ids])

    leaky: List[str] = []
    if config.leak_check != "off":
        with stage("leak-audit"):
            train_ids = list(split.train_ids)
            sub = FeatureMatrix(tuple(train_ids), features.columns, features.rows_for(train_ids))
            leaky = audit_feature_leakage(sub, [targets[pid] for pid in train_ids])
            if leaky and config.leak_check == "error":
                raise DataError(f"feature columns track the target almost exactly: {leaky}")
        for col in leaky:
            status(f"⚠️  Feature '{col}' correlates with the target above 0.999")

    return Prepared(
        config=config,
        case=case,
        split=split,
        feature_snapshot=feature_snapshot,
        graph=graph,
        adjacency=adjacency,
        topic_model=topic_model,
        doc_topics=doc_topics,
        raw_features=raw,
        features=features,
        targets=targets,
        leaky_columns=leaky,
    )


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


def fit_model(name: str, prepared: Prepared, train_ids: Sequence[str], verbose: bool = False):
    """Train one model on train_ids; the GCN sees the whole graph and masks the loss"""
    config = prepared.config
    x_all = prepared.features.values
    if name == "GCN":
        trained = gcn.train(
            prepared.adjacency,
            x_all,
            prepared.target_vector(),
            prepared.rows(train_ids),
            config.train,
            verbose=verbose,
        )
        return replace(trained, norm_stats=prepared.features.norm_stats.to_dict())
    x = x_all[prepared.rows(train_ids)]
    y = prepared.targets_for(train_ids)
    b = config.baselines
    if name == "LR":
        return baselines.fit_linear(x, y, b.linear.ridge_lambda, log_target=b.log_target)
    if name == "RF":
        return baselines.fit_random_forest(x, y, b.forest, config.seed, log_target=b.log_target)
    if name == "GBT":
        return baselines.fit_gbt(x, y, b.boosting, config.seed, log_target=b.log_target)
    if name == "DNN":
        return baselines.fit_dnn(x, y, b.dnn, config.seed, log_target=b.log_target, verbose=verbose)
    raise ConfigError(f"unknown model {name}")


def predict_model(name: str, model, prepared: Prepared, ids: Sequence[str]) -> np.ndarray:
    if name == "GCN":
        return gcn.predict(model, prepared.adjacency, prepared.features.values)[prepared.rows(ids)]
    return baselines.predict_baseline(model, prepared.features.values[prepared.rows(ids)])


def train_models(prepared: Prepared, verbose: bool = False) -> Dict[str, object]:
    trained = {}
    for name in prepared.config.models:
        with stage(f"train-{name}", case=prepared.case):
            trained[name] = fit_model(name, prepared, prepared.split.train_ids, verbose)
        status(f"✅ Trained {name}")
    return trained


def evaluate_models(prepared: Prepared, trained: Mapping[str, object]) -> Tuple[List[MetricsReport], pd.DataFrame]:
    """Test-split metrics per model plus a per-paper prediction table"""
    test_ids = list(prepared.split.test_ids)
    y = prepared.targets_for(test_ids)
    p = len(prepared.features.columns)
    reports = []
    predictions = pd.DataFrame({"paper_id": test_ids, "target": y})
    for name in prepared.config.models:
        if name not in trained:
            raise DataError(f"no trained {name} model available")
        with stage(f"evaluate-{name}", case=prepared.case):
            y_hat = predict_model(name, trained[name], prepared, test_ids)
            reports.append(evaluate(y, y_hat, p, model=name, case=prepared.case, fold="test", strict=False))
        predictions[name] = y_hat
    return reports, predictions


def cross_validate(prepared: Prepared, verbose: bool = False) -> List[MetricsReport]:
    """k-fold CV inside the training ids; one report per model and fold"""
    k = prepared.config.cv_folds
    train_ids = list(prepared.split.train_ids)
    if k < 2:
        return []
    if len(train_ids) < k:
        status(f"⚠️  Skipping {k}-fold CV: only {len(train_ids)} training papers")
        return []
    p = len(prepared.features.columns)
    reports = []
    folds = kfold(train_ids, k, prepared.config.seed)
    for name in prepared.config.models:
        with stage(f"cv-{name}", folds=k):
            for fold, (fit_ids, held_out) in enumerate(folds):
                model = fit_model(name, prepared, fit_ids, verbose)
                y_hat = predict_model(name, model, prepared, held_out)
                reports.append(
                    evaluate(
                        prepared.targets_for(held_out), y_hat, p,
                        model=name, case=prepared.case, fold=str(fold), strict=False,
                    )
                )
    return reports


def summarize_cv(reports: Sequence[MetricsReport]) -> Dict[str, Dict[str, Optional[float]]]:
    """Fold-averaged metrics per model"""
    by_model: Dict[str, List[MetricsReport]] = {}
    for r in reports:
        by_model.setdefault(r.model, []).append(r)
    return {model: summarize_folds(group) for model, group in by_model.items()}


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------


def metrics_frame(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in reports], columns=list(ROW_COLUMNS))


def write_metrics_csv(reports: Sequence[MetricsReport], path: Path):
    metrics_frame(reports).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def model_path(out_dir: Path, name: str) -> Path:
    return Path(out_dir) / "models" / f"{name}.bin"


def save_models(trained: Mapping[str, object], out_dir: Path, columns: Sequence[str]) -> Dict[str, str]:
    hashes = {}
    for name, model in trained.items():
        path = model_path(out_dir, name)
        path.parent.mkdir(parents=True, exist_ok=True)
        if name == "GCN":
            hashes[name] = gcn.save_trained(model, path)
            gcn.write_loss_history(model.loss_history, Path(out_dir) / "gcn_loss.csv")
        else:
            hashes[name] = baselines.save_baseline(model, path)
            if name in ("RF", "GBT"):
                baselines.write_feature_importance(model, columns, Path(out_dir) / f"feature_importance_{name}.csv")
    return hashes


def load_models(out_dir: Path, names: Sequence[str]) -> Dict[str, object]:
    trained = {}
    for name in names:
        path = model_path(out_dir, name)
        if not path.exists():
            raise DataError(f"no trained {name} model at {path}; run train first")
        trained[name] = gcn.load_trained(path) if name == "GCN" else baselines.load_baseline(path)
    return trained


def write_topic_outputs(prepared: Prepared, out_dir: Path) -> str:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc_topics_to_csv(prepared.doc_topics, out_dir / "doc_topics.csv")
    return save_topic_model(prepared.topic_model, out_dir / "topic_model.bin")


def write_feature_outputs(prepared: Prepared, out_dir: Path):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prepared.raw_features.to_csv(out_dir / "features_raw.csv")
    prepared.features.to_csv(out_dir / "features.csv")
    save_norm_stats(prepared.features.norm_stats, out_dir / "norm_stats.json")
    write_edge_list(prepared.graph, out_dir / "edges.tsv")
    with open(out_dir / "split.json", "w", encoding="utf-8") as f:
        json.dump(prepared.split.to_dict(), f, indent=2)
    targets = pd.DataFrame(
        {"paper_id": list(prepared.targets), "target": list(prepared.targets.values())}
    )
    targets.to_csv(out_dir / "targets.csv", index=False, float_format="%.17g", lineterminator="\n")


def output_dir_for(config: ExperimentConfig, settings: Optional[Settings] = None) -> Path:
    if config.output_dir is not None:
        return Path(config.output_dir)
    settings = settings or Settings()
    return settings.output_dir / config.case_label()


@dataclass
class RunResult:
    out_dir: Path
    reports: List[MetricsReport]
    cv_reports: List[MetricsReport]
    metrics_path: Path
    leaky_columns: List[str]
    metrics_sha256: str = ""
    cv_summary: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "out_dir": str(self.out_dir),
            "metrics_csv": str(self.metrics_path),
            "metrics_sha256": self.metrics_sha256,
            "metrics": [json.loads(r.to_json()) for r in self.reports],
            "cv_folds": len({r.fold for r in self.cv_reports}),
            "cv_summary": self.cv_summary,
            "leaky_columns": self.leaky_columns,
        }


def run_experiment(
    config: ExperimentConfig, settings: Optional[Settings] = None, verbose: bool = False
) -> RunResult:
    """Prepare the case, train and evaluate every configured model and write the report files"""
    snapshot = resolve_snapshot(config, settings)
    out_dir = output_dir_for(config, settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    prepared = prepare(config, snapshot, verbose)
    write_topic_outputs(prepared, out_dir)
    write_feature_outputs(prepared, out_dir)

    trained = train_models(prepared, verbose)
    save_models(trained, out_dir, prepared.features.columns)
    reports, predictions = evaluate_models(prepared, trained)
    cv_reports = cross_validate(prepared, verbose)
    cv_summary = summarize_cv(cv_reports)

    with stage("write-report", out_dir=str(out_dir)):
        metrics_path = out_dir / "metrics.csv"
        write_metrics_csv(reports, metrics_path)
        if cv_reports:
            write_metrics_csv(cv_reports, out_dir / "cv_metrics.csv")
            with open(out_dir / "cv_summary.json", "w", encoding="utf-8") as f:
                json.dump(cv_summary, f, indent=2, sort_keys=True)
        predictions.to_csv(out_dir / "predictions.csv", index=False, float_format="%.17g", lineterminator="\n")
        with open(out_dir / "metrics.json", "w", encoding="utf-8") as f:
            json.dump([json.loads(r.to_json()) for r in reports], f, indent=2, sort_keys=True)
        with open(out_dir / "config.json", "w", encoding="utf-8") as f:
            f.write(config.model_dump_json(indent=2))
    status(f"✅ Wrote {metrics_path}")
    return RunResult(
        out_dir, reports, cv_reports, metrics_path, prepared.leaky_columns,
        metrics_sha256=storage.file_sha256(metrics_path),
        cv_summary=cv_summary,
    )


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class ComparisonReport:
    table: pd.DataFrame
    best: Dict[str, Dict[str, List[str]]]
    gcn_r2_gain: Dict[str, Dict[str, Optional[float]]]

    def to_dict(self) -> dict:
        rows = json.loads(self.table.to_json(orient="records"))
        return {"rows": rows, "best": self.best, "gcn_r2_gain_percent": self.gcn_r2_gain}

    def to_text(self) -> str:
        shown = self.table.copy()
        for metric in METRIC_COLUMNS:
            shown[metric] = [
                f"{v:.4f}{' *' if flag else ''}"
                for v, flag in zip(self.table[metric], self.table[f"best_{metric}"])
            ]
        columns = ["case", "model", "fold"] + list(METRIC_COLUMNS) + ["n"]
        lines = [shown[columns].to_string(index=False), "", "* best value for the case"]
        for case, gains in self.gcn_r2_gain.items():
            for other, gain in gains.items():
                shown_gain = "n/a" if gain is None else f"{gain:+.2f}%"
                lines.append(f"{case}: GCN R² gain over {other}: {shown_gain}")
        return "\n".join(lines) + "\n"


def read_metrics_csv(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"model": str, "case": str, "fold": str}, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot read metrics file {path}: {e}") from e
    if tuple(frame.columns) != ROW_COLUMNS:
        raise DataError(f"{path} does not have the metrics schema {list(ROW_COLUMNS)}")
    return frame


def _gain(gcn_r2: float, other_r2: float) -> Optional[float]:
    if pd.isna(gcn_r2) or pd.isna(other_r2) or other_r2 == 0:
        return None
    return float((gcn_r2 - other_r2) / abs(other_r2) * 100.0)


def merge_reports(paths: Sequence[Path]) -> ComparisonReport:
    """Merge metrics CSVs, sort by case then model and flag the best value per metric

    Merging the same file twice gives the same table.
    """
    if not paths:
        raise ConfigError("report needs at least one metrics CSV")
    frame = pd.concat([read_metrics_csv(Path(p)) for p in paths], ignore_index=True)
    frame = frame.drop_duplicates().sort_values(["case", "model", "fold"], kind="mergesort").reset_index(drop=True)

    best: Dict[str, Dict[str, List[str]]] = {}
    for metric in METRIC_COLUMNS:
        flags = np.zeros(len(frame), dtype=bool)
        for (case, fold), group in frame.groupby(["case", "fold"], sort=True):
            values = group[metric].dropna()
            if values.empty:
                continue
            target = values.min() if metric in LOWER_IS_BETTER else values.max()
            winners = group.index[group[metric] == target]
            flags[winners] = True
            if fold == "test":
                best.setdefault(case, {})[metric] = sorted(frame.loc[winners, "model"])
        frame[f"best_{metric}"] = flags

    gains: Dict[str, Dict[str, Optional[float]]] = {}
    test_rows = frame[frame["fold"] == "test"]
    for case, group in test_rows.groupby("case", sort=True):
        gcn_rows = group[group["model"] == "GCN"]
        if gcn_rows.empty:
            continue
        gcn_r2 = gcn_rows["r2"].iloc[0]
        gains[case] = {
            row.model: _gain(gcn_r2, row.r2) for row in group.itertuples() if row.model != "GCN"
        }
    return ComparisonReport(frame, best, gains)


def write_report(report: ComparisonReport, out_dir: Path) -> Dict[str, str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text_path = out_dir / "report.txt"
    json_path = out_dir / "report.json"
    with open(text_path, "w", encoding="utf-8") as f:
        f.write(report.to_text())
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    return {"text": str(text_path), "json": str(json_path)}
