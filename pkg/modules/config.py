"""
Configuration models for the citation prediction toolkit

Experiment files are JSON validated by pydantic; process-level settings come
from the environment (and a `.env` file) through pydantic-settings.
"""
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from modules.errors import ConfigError

# Load environment variables from .env file at the repository root
env_path = Path(__file__).parent.parent / ".env"
load_dotenv(dotenv_path=env_path)

MODEL_NAMES = ("LR", "RF", "GBT", "DNN", "GCN")
FEATURE_GROUPS = ("article", "author", "venue", "network")


class Settings(BaseSettings):
    """Process-wide settings read from CITEPRED_* environment variables"""

    model_config = SettingsConfigDict(env_prefix="CITEPRED_", extra="ignore")

    cache_dir: Path = Path("~/.citepred")
    output_dir: Path = Path("runs")
    run_log: Path = Path("~/.citepred/run_log.json")
    verbose: bool = False

    def resolved_cache_dir(self) -> Path:
        return self.cache_dir.expanduser()

    def resolved_run_log(self) -> Path:
        return self.run_log.expanduser()


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CaseWindow(_Strict):
    """Publication window and prediction horizon of one temporal case"""

    year_start: int = Field(gt=0)
    year_end: int = Field(gt=0)
    horizon_years: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.year_end < self.year_start:
            raise ValueError("year_end must not precede year_start")
        return self


# Standard publication windows; a custom window replaces them for synthetic corpora
CASES: Dict[str, CaseWindow] = {
    "1yr": CaseWindow(year_start=2010, year_end=2010, horizon_years=1),
    "5yr": CaseWindow(year_start=2006, year_end=2006, horizon_years=5),
    "10yr": CaseWindow(year_start=2001, year_end=2001, horizon_years=10),
}


class LdaConfig(_Strict):
    num_topics: int = Field(default=50, ge=2)
    alpha: Optional[float] = Field(default=None, gt=0)
    beta: float = Field(default=0.01, gt=0)
    iterations: int = Field(default=200, ge=1)
    inference_iterations: int = Field(default=20, ge=1)
    min_df: int = Field(default=2, ge=1)
    workers: int = Field(default=1, ge=1)
    seed: int = 0

    def resolved_alpha(self) -> float:
        return self.alpha if self.alpha is not None else 50.0 / self.num_topics


class AdamConfig(_Strict):
    learning_rate: float = Field(default=0.001, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)


class TrainConfig(_Strict):
    """GCN training settings"""

    learning_rate: float = Field(default=0.001, gt=0)
    epochs: int = Field(default=200, ge=1)
    dropout_rate: float = Field(default=0.2, ge=0, lt=1)
    hidden: int = Field(default=64, ge=1)
    hidden2: int = Field(default=64, ge=1)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    log_target: bool = True
    seed: int = 0

    def adam(self) -> AdamConfig:
        return AdamConfig(
            learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon
        )


class LinearConfig(_Strict):
    ridge_lambda: float = Field(default=1e-8, ge=0)


class ForestConfig(_Strict):
    n_estimators: int = Field(default=500, ge=1)
    max_depth: int = Field(default=2, ge=1)
    min_samples_split: int = Field(default=2, ge=2)
    n_jobs: int = Field(default=1, ge=1)


class BoostingConfig(_Strict):
    learning_rate: float = Field(default=0.001, gt=0, le=1)
    min_samples_split: int = Field(default=2, ge=2)
    max_depth: int = Field(default=4, ge=1)
    n_estimators: int = Field(default=500, ge=1)


class DnnConfig(_Strict):
    batch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=0.001, gt=0)
    hidden: int = Field(default=512, ge=1)
    dropout_rate: float = Field(default=0.2, ge=0, lt=1)
    epochs: int = Field(default=200, ge=1)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)

    def adam(self) -> AdamConfig:
        return AdamConfig(
            learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon
        )


class BaselineConfig(_Strict):
    """Hyperparameters of the four comparison models"""

    linear: LinearConfig = LinearConfig()
    forest: ForestConfig = ForestConfig()
    boosting: BoostingConfig = BoostingConfig()
    dnn: DnnConfig = DnnConfig()
    log_target: bool = True


class SynthConfig(_Strict):
    num_papers: int = Field(default=2000, ge=1)
    num_authors: int = Field(default=400, ge=1)
    num_venues: int = Field(default=20, ge=1)
    num_topics: int = Field(default=5, ge=1)
    start_year: int = Field(default=2000, gt=0)
    num_years: int = Field(default=10, ge=1)
    horizon_years: int = Field(default=1, ge=0)
    refs_per_paper: float = Field(default=6.0, ge=0)
    topic_refs: Optional[List[float]] = None
    recency_decay: float = Field(default=0.0, ge=0)
    attachment_strength: float = Field(default=1.0, ge=0)
    same_topic_bias: float = Field(default=3.0, ge=1)
    fitness_weight: float = Field(default=1.0, ge=0)
    topic_weights: Optional[List[float]] = None
    noise: float = Field(default=0.3, ge=0)
    words_per_topic: int = Field(default=30, ge=2)
    title_words: int = Field(default=6, ge=1)
    abstract_words: int = Field(default=40, ge=0)
    seed: int = 0

    @field_validator("topic_weights")
    @classmethod
    def _positive_weights(cls, weights):
        if weights is not None and (not weights or any(w < 0 for w in weights) or sum(weights) <= 0):
            raise ValueError("topic_weights must be non-negative with a positive sum")
        return weights

    @field_validator("topic_refs")
    @classmethod
    def _non_negative_refs(cls, refs):
        if refs is not None and any(r < 0 for r in refs):
            raise ValueError("topic_refs must be non-negative")
        return refs

    @model_validator(mode="after")
    def _lists_match_topics(self):
        if self.topic_weights is not None and len(self.topic_weights) != self.num_topics:
            raise ValueError("topic_weights needs one entry per topic")
        if self.topic_refs is not None and len(self.topic_refs) != self.num_topics:
            raise ValueError("topic_refs needs one entry per topic")
        return self


class ExperimentConfig(_Strict):
    """One end-to-end experiment: corpus, temporal case, models and their settings"""

    input_paths: List[Path] = Field(default_factory=list)
    snapshot_path: Optional[Path] = None
    case: Literal["1yr", "5yr", "10yr"] = "1yr"
    window: Optional[CaseWindow] = None
    models: List[str] = Field(default_factory=lambda: list(MODEL_NAMES))
    train: TrainConfig = TrainConfig()
    baselines: BaselineConfig = BaselineConfig()
    lda: LdaConfig = LdaConfig()
    seed: int = 0
    output_dir: Optional[Path] = None
    cv_folds: int = Field(default=10, ge=0)
    graph_scope: Literal["snapshot", "window"] = "snapshot"
    feature_groups: List[str] = Field(default_factory=lambda: list(FEATURE_GROUPS))
    venue_rank_path: Optional[Path] = None
    productivity_cap: int = Field(default=1000, ge=1)
    leak_check: Literal["off", "warn", "error"] = "warn"

    @field_validator("models")
    @classmethod
    def _known_models(cls, models):
        if not models:
            raise ValueError("at least one model is required")
        unknown = [m for m in models if m not in MODEL_NAMES]
        if unknown:
            raise ValueError(f"unknown models {unknown}; choose from {list(MODEL_NAMES)}")
        if len(set(models)) != len(models):
            raise ValueError("models must not repeat")
        return models

    @field_validator("feature_groups")
    @classmethod
    def _known_groups(cls, groups):
        if not groups:
            raise ValueError("at least one feature group is required")
        unknown = [g for g in groups if g not in FEATURE_GROUPS]
        if unknown:
            raise ValueError(f"unknown feature groups {unknown}")
        return groups

    @field_validator("cv_folds")
    @classmethod
    def _fold_count(cls, folds):
        if folds == 1:
            raise ValueError("cv_folds must be 0 (disabled) or at least 2")
        return folds

    def case_window(self) -> CaseWindow:
        return self.window if self.window is not None else CASES[self.case]

    def case_label(self) -> str:
        if self.window is None:
            return self.case
        w = self.window
        return f"{w.year_start}-{w.year_end}+{w.horizon_years}"

    def with_overrides(
        self,
        seed: Optional[int] = None,
        case: Optional[str] = None,
        models: Optional[List[str]] = None,
        output_dir: Optional[Path] = None,
    ) -> "ExperimentConfig":
        """Apply CLI flag overrides; a seed override reaches every seeded component"""
        data = self.model_dump()
        if seed is not None:
            data["seed"] = seed
            data["train"]["seed"] = seed
            data["lda"]["seed"] = seed
        if case is not None:
            data["case"] = case
            data["window"] = None
        if models is not None:
            data["models"] = models
        if output_dir is not None:
            data["output_dir"] = output_dir
        return _validate(ExperimentConfig, data, "command-line overrides")


def _validate(model_cls, data, source: str):
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration in {source}: {e}") from e


def _read_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e


def load_experiment_config(path: Optional[Path]) -> ExperimentConfig:
    """Load an experiment file; no path means all defaults"""
    if path is None:
        return ExperimentConfig()
    return _validate(ExperimentConfig, _read_json(Path(path)), str(path))


def load_synth_config(path: Optional[Path]) -> SynthConfig:
    if path is None:
        return SynthConfig()
    return _validate(SynthConfig, _read_json(Path(path)), str(path))


def seed_pair(seed: int) -> Tuple[int, int]:
    """Two independent child seeds (initialisation stream, sampling stream)"""
    children = np.random.SeedSequence(seed).spawn(2)
    return int(children[0].generate_state(1)[0]), int(children[1].generate_state(1)[0])
