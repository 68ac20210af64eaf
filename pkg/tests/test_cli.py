"""
Tests for the click command-line interface and its exit codes
"""
import json

import pytest
from click.testing import CliRunner

from citation_cli import cli
from modules import run_log


@pytest.fixture
def runner():
    # click >= 8.2 always keeps stderr separate and dropped the flag
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        return CliRunner()


def write_json(path, data):
    path.write_text(json.dumps(data))
    return path


def test_synth_then_ingest(runner, tmp_path):
    config = write_json(tmp_path / "synth.json", {"num_papers": 60, "num_years": 3, "num_topics": 2, "seed": 4})
    result = runner.invoke(cli, ["synth", "--config", str(config), "--out", str(tmp_path / "corpus")])
    assert result.exit_code == 0, result.stderr
    summary = json.loads(result.stdout)
    assert summary["papers"] == 80
    assert summary["last_observed_year"] == 2002

    result = runner.invoke(cli, ["ingest", summary["corpus"], "--out", str(tmp_path / "snap.bin")])
    assert result.exit_code == 0, result.stderr
    assert json.loads(result.stdout)["dropped"] == 0
    assert (tmp_path / "snap.bin").exists()


def test_ingest_of_a_corrupt_file_exits_with_data_error(runner, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("#index 1\n#t never\n")
    result = runner.invoke(cli, ["ingest", str(bad), "--out", str(tmp_path / "snap.bin")])
    assert result.exit_code == 3
    assert "ingest" in result.stderr
    assert not (tmp_path / "snap.bin").exists()


def test_configuration_errors_exit_with_two(runner, tmp_path):
    missing = runner.invoke(cli, ["run", "--config", str(tmp_path / "nope.json")])
    assert missing.exit_code == 2
    bad_model = write_json(tmp_path / "exp.json", {"models": ["SVM"]})
    assert runner.invoke(cli, ["features", "--config", str(bad_model)]).exit_code == 2
    assert runner.invoke(cli, ["run", "--models", "LR,XGB"]).exit_code == 2
    assert runner.invoke(cli, ["report"]).exit_code == 2


def test_run_then_report(runner, tmp_path, fast_experiment):
    config = fast_experiment(models=("LR", "GCN"))
    path = tmp_path / "exp.json"
    path.write_text(config.model_dump_json())
    result = runner.invoke(cli, ["run", "--config", str(path)])
    assert result.exit_code == 0, result.stderr
    summary = json.loads(result.stdout)
    assert [m["model"] for m in summary["metrics"]] == ["LR", "GCN"]

    result = runner.invoke(cli, ["report", summary["metrics_csv"], "--json", "--out", str(tmp_path / "report")])
    assert result.exit_code == 0, result.stderr
    merged = json.loads(result.stdout)
    assert {row["model"] for row in merged["rows"]} == {"LR", "GCN"}
    assert (tmp_path / "report" / "report.txt").exists()

    status = runner.invoke(cli, ["status"])
    assert status.exit_code == 0
    assert "Last stage: write-report" in status.stdout


def test_train_then_evaluate_reuses_saved_models(runner, tmp_path, fast_experiment):
    path = tmp_path / "exp.json"
    path.write_text(fast_experiment(models=("LR",), out_name="staged").model_dump_json())
    assert runner.invoke(cli, ["train", "--config", str(path)]).exit_code == 0
    result = runner.invoke(cli, ["evaluate", "--config", str(path)])
    assert result.exit_code == 0, result.stderr
    assert json.loads(result.stdout)[0]["model"] == "LR"
    assert (tmp_path / "staged" / "metrics.csv").exists()


def test_evaluate_without_trained_models_is_a_data_error(runner, tmp_path, fast_experiment):
    path = tmp_path / "exp.json"
    path.write_text(fast_experiment(models=("RF",), out_name="empty").model_dump_json())
    assert runner.invoke(cli, ["evaluate", "--config", str(path)]).exit_code == 3


def test_status_without_history(runner):
    result = runner.invoke(cli, ["status"])
    assert result.exit_code == 0
    assert "No pipeline runs recorded yet" in result.stdout
    assert run_log.read_log() == []
