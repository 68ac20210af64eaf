"""
Tests for experiment configuration loading and environment settings
"""
import json

import pytest

from modules.config import (
    CASES,
    CaseWindow,
    ExperimentConfig,
    LdaConfig,
    Settings,
    SynthConfig,
    load_experiment_config,
    load_synth_config,
    seed_pair,
)
from modules.errors import ConfigError


def test_defaults_follow_the_reference_setup():
    config = ExperimentConfig()
    assert config.models == ["LR", "RF", "GBT", "DNN", "GCN"]
    assert config.train.learning_rate == 0.001
    assert config.train.epochs == 200
    assert config.train.dropout_rate == 0.2
    assert config.baselines.forest.n_estimators == 500 and config.baselines.forest.max_depth == 2
    assert config.baselines.boosting.max_depth == 4
    assert config.baselines.dnn.hidden == 512 and config.baselines.dnn.batch_size == 256
    assert config.cv_folds == 10
    assert LdaConfig(num_topics=25).resolved_alpha() == 2.0


def test_cases_and_custom_windows():
    assert CASES["1yr"] == CaseWindow(year_start=2010, year_end=2010, horizon_years=1)
    assert CASES["5yr"].horizon_years == 5 and CASES["10yr"].year_start == 2001
    config = ExperimentConfig(window=CaseWindow(year_start=2003, year_end=2004, horizon_years=2))
    assert config.case_label() == "2003-2004+2"
    assert config.case_window().year_end == 2004
    with pytest.raises(ValueError):
        CaseWindow(year_start=2005, year_end=2004, horizon_years=1)


def test_load_experiment_config_errors(tmp_path):
    assert load_experiment_config(None) == ExperimentConfig()
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        load_experiment_config(broken)
    for bad in ({"models": []}, {"models": ["LR", "LR"]}, {"cv_folds": 1}, {"feature_groups": ["style"]},
                {"train": {"learning_rate": 0}}, {"unknown_key": 1}):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ConfigError):
            load_experiment_config(path)


def test_overrides_reach_every_seeded_component():
    config = ExperimentConfig(window=CaseWindow(year_start=2003, year_end=2003, horizon_years=1))
    overridden = config.with_overrides(seed=9, case="5yr", models=["GCN"])
    assert overridden.seed == overridden.train.seed == overridden.lda.seed == 9
    assert overridden.window is None and overridden.case_label() == "5yr"
    assert overridden.models == ["GCN"]
    with pytest.raises(ConfigError):
        config.with_overrides(models=["GCN", "BERT"])


def test_synth_config_validation(tmp_path):
    assert load_synth_config(None) == SynthConfig()
    with pytest.raises(ValueError):
        SynthConfig(num_topics=2, topic_weights=[1.0])
    with pytest.raises(ValueError):
        SynthConfig(num_topics=2, topic_weights=[0.0, 0.0])
    path = tmp_path / "synth.json"
    path.write_text(json.dumps({"same_topic_bias": 0.5}))
    with pytest.raises(ConfigError):
        load_synth_config(path)


def test_settings_read_the_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("CITEPRED_VERBOSE", "true")
    settings = Settings()
    assert settings.verbose is True
    assert settings.resolved_cache_dir() == tmp_path / "cache"


def test_seed_pair_is_stable_and_distinct():
    assert seed_pair(3) == seed_pair(3)
    first, second = seed_pair(3)
    assert first != second
    assert seed_pair(4) != seed_pair(3)
