"""
Shared fixtures for the citation prediction tests
"""
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from modules import run_log
from modules.config import CaseWindow, ExperimentConfig, SynthConfig
from modules.corpus import PaperRecord

SAMPLE_BLOCK = "#index 5\n#* A Title\n#@ A. One;B. Two\n#t 2006\n#c VLDB\n#% 3\n#! Some abstract"


@pytest.fixture(autouse=True)
def isolated_run_log(tmp_path, monkeypatch):
    """Keep the stage log and the cache directory inside the test's tmp dir"""
    monkeypatch.setenv("CITEPRED_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("CITEPRED_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("CITEPRED_RUN_LOG", str(tmp_path / "run_log.json"))
    run_log.configure(tmp_path / "run_log.json")
    yield
    run_log.configure(None)


def paper(pid, year, refs=(), authors=("Author A",), venue="Journal of Tests", title="", abstract=""):
    return PaperRecord(
        id=str(pid),
        title=title,
        abstract=abstract,
        authors=tuple(authors),
        affiliations=tuple("Lab" for _ in authors),
        venue=venue,
        year=year,
        references=tuple(str(r) for r in refs),
    )


@pytest.fixture
def make_paper():
    return paper


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_synth_config():
    """Small corpus that still exercises every pipeline stage"""
    return SynthConfig(
        num_papers=240,
        num_authors=60,
        num_venues=6,
        num_topics=3,
        start_year=2000,
        num_years=6,
        horizon_years=1,
        refs_per_paper=4.0,
        words_per_topic=12,
        title_words=5,
        abstract_words=20,
        seed=7,
    )


@pytest.fixture
def tiny_corpus_dir(tmp_path, tiny_synth_config):
    from modules.synth import generate, write_corpus

    out = tmp_path / "corpus"
    write_corpus(generate(tiny_synth_config), out)
    return out


@pytest.fixture
def fast_experiment(tmp_path, tiny_corpus_dir):
    """Experiment config with every model shrunk to run in seconds"""

    def build(models=("LR", "GCN"), out_name="run", **overrides):
        data = {
            "input_paths": [str(tiny_corpus_dir / "corpus.txt")],
            "snapshot_path": str(tmp_path / "cache" / "snapshot.bin"),
            "window": CaseWindow(year_start=2005, year_end=2005, horizon_years=1).model_dump(),
            "models": list(models),
            "seed": 3,
            "output_dir": str(tmp_path / out_name),
            "cv_folds": 0,
            "lda": {"num_topics": 3, "alpha": 0.1, "iterations": 5, "inference_iterations": 3},
            "train": {"epochs": 20, "hidden": 8, "hidden2": 8, "learning_rate": 0.01},
            "baselines": {
                "linear": {"ridge_lambda": 0.01},
                "forest": {"n_estimators": 10},
                "boosting": {"n_estimators": 10, "learning_rate": 0.1},
                "dnn": {"hidden": 16, "epochs": 5, "batch_size": 32},
            },
        }
        data.update(overrides)
        return ExperimentConfig.model_validate(data)

    return build
