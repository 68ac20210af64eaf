#!/usr/bin/env python3
"""
Command-line entry point for the citation prediction pipeline.

Each subcommand prints its result as JSON (or a text table) on stdout;
progress and warnings go to stderr. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numeric failure.
"""
import functools
import json
import sys
from pathlib import Path
from typing import Optional

import click

from modules import pipeline, run_log
from modules.config import CASES, MODEL_NAMES, ExperimentConfig, Settings, load_experiment_config, load_synth_config
from modules.errors import CitePredError, ConfigError
from modules.synth import generate, write_corpus


def _fail(error: CitePredError):
    click.echo(f"❌ {error}", err=True)
    sys.exit(error.exit_code)


def handle_errors(command):
    """Map the exception hierarchy onto process exit codes"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except CitePredError as e:
            _fail(e)

    return wrapper


def _models(value: Optional[str]):
    if not value:
        return None
    return [m.strip() for m in value.split(",") if m.strip()]


def experiment_options(command):
    command = click.option("--out", "out", type=click.Path(path_type=Path), help="Output directory")(command)
    command = click.option("--models", help=f"Comma-separated subset of {','.join(MODEL_NAMES)}")(command)
    command = click.option("--case", type=click.Choice(sorted(CASES)), help="Temporal case")(command)
    command = click.option("--seed", type=int, help="Seed for split, topics and models")(command)
    command = click.option(
        "--config", "config_path", type=click.Path(path_type=Path), help="JSON experiment config"
    )(command)
    return command


def _experiment(config_path, seed, case, models, out) -> ExperimentConfig:
    config = load_experiment_config(config_path)
    return config.with_overrides(seed=seed, case=case, models=_models(models), output_dir=out)


def _echo_json(data):
    click.echo(json.dumps(data, indent=2, sort_keys=True))


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Show progress bars and stage traces")
@click.pass_context
def cli(ctx, verbose):
    """Citation-count prediction with graph convolution and four baselines"""
    settings = Settings()
    run_log.configure(settings.resolved_run_log(), verbose or settings.verbose)
    ctx.obj = {"settings": settings, "verbose": verbose or settings.verbose}


@cli.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--out", "out", type=click.Path(path_type=Path), help="Snapshot cache file")
@click.option("--productivity-cap", default=1000, show_default=True, help="Max papers per author-year")
@click.pass_context
@handle_errors
def ingest(ctx, paths, out, productivity_cap):
    """Parse, clean and cache a corpus snapshot"""
    target = out or pipeline.default_snapshot_path(ctx.obj["settings"])
    result = pipeline.ingest(list(paths), target, productivity_cap)
    _echo_json(result.to_dict())


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="JSON synthesis config")
@click.option("--seed", type=int, help="Overrides the config seed")
@click.option("--out", "out", required=True, type=click.Path(path_type=Path), help="Output directory")
@handle_errors
def synth(config_path, seed, out):
    """Generate a synthetic corpus and its ground-truth table"""
    config = load_synth_config(config_path)
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    _echo_json(write_corpus(generate(config), out))


@cli.command()
@experiment_options
@click.pass_context
@handle_errors
def topics(ctx, config_path, seed, case, models, out):
    """Fit the topic model and write per-paper topic distributions"""
    config = _experiment(config_path, seed, case, models, out)
    settings = ctx.obj["settings"]
    prepared = pipeline.prepare(config, pipeline.resolve_snapshot(config, settings), ctx.obj["verbose"])
    out_dir = pipeline.output_dir_for(config, settings)
    sha = pipeline.write_topic_outputs(prepared, out_dir)
    _echo_json({"out_dir": str(out_dir), "topic_model_sha256": sha, "documents": len(prepared.doc_topics)})


@cli.command()
@experiment_options
@click.pass_context
@handle_errors
def features(ctx, config_path, seed, case, models, out):
    """Build, normalize and write the feature matrix, split and citation graph"""
    config = _experiment(config_path, seed, case, models, out)
    settings = ctx.obj["settings"]
    prepared = pipeline.prepare(config, pipeline.resolve_snapshot(config, settings), ctx.obj["verbose"])
    out_dir = pipeline.output_dir_for(config, settings)
    pipeline.write_feature_outputs(prepared, out_dir)
    _echo_json(
        {
            "out_dir": str(out_dir),
            "nodes": prepared.graph.num_nodes,
            "edges": prepared.graph.num_edges,
            "columns": list(prepared.features.columns),
            "train": len(prepared.split.train_ids),
            "test": len(prepared.split.test_ids),
            "leaky_columns": prepared.leaky_columns,
        }
    )


@cli.command()
@experiment_options
@click.pass_context
@handle_errors
def train(ctx, config_path, seed, case, models, out):
    """Train the configured models and save them under <out>/models"""
    config = _experiment(config_path, seed, case, models, out)
    settings = ctx.obj["settings"]
    prepared = pipeline.prepare(config, pipeline.resolve_snapshot(config, settings), ctx.obj["verbose"])
    out_dir = pipeline.output_dir_for(config, settings)
    trained = pipeline.train_models(prepared, ctx.obj["verbose"])
    hashes = pipeline.save_models(trained, out_dir, prepared.features.columns)
    _echo_json({"out_dir": str(out_dir), "models": hashes})


@cli.command()
@experiment_options
@click.pass_context
@handle_errors
def evaluate(ctx, config_path, seed, case, models, out):
    """Evaluate saved models on the held-out split"""
    config = _experiment(config_path, seed, case, models, out)
    settings = ctx.obj["settings"]
    prepared = pipeline.prepare(config, pipeline.resolve_snapshot(config, settings), ctx.obj["verbose"])
    out_dir = pipeline.output_dir_for(config, settings)
    trained = pipeline.load_models(out_dir, config.models)
    reports, _ = pipeline.evaluate_models(prepared, trained)
    pipeline.write_metrics_csv(reports, out_dir / "metrics.csv")
    _echo_json([json.loads(r.to_json()) for r in reports])


@cli.command()
@experiment_options
@click.pass_context
@handle_errors
def run(ctx, config_path, seed, case, models, out):
    """Run the whole pipeline for one case and write the report files"""
    config = _experiment(config_path, seed, case, models, out)
    result = pipeline.run_experiment(config, ctx.obj["settings"], ctx.obj["verbose"])
    _echo_json(result.summary())


@cli.command()
@click.argument("csv_paths", nargs=-1, type=click.Path(path_type=Path))
@click.option("--out", "out", type=click.Path(path_type=Path), help="Directory for report.txt and report.json")
@click.option("--json", "as_json", is_flag=True, help="Print JSON instead of the text table")
@handle_errors
def report(csv_paths, out, as_json):
    """Merge metrics CSVs into one comparison table"""
    if not csv_paths:
        raise ConfigError("report needs at least one metrics CSV")
    merged = pipeline.merge_reports(list(csv_paths))
    if out:
        pipeline.write_report(merged, out)
    if as_json:
        _echo_json(merged.to_dict())
    else:
        click.echo(merged.to_text(), nl=False)


@cli.command()
@click.option("--hours", default=24, show_default=True, help="Failure look-back window")
def status(hours):
    """Show the latest stage attempts and recent failures"""
    entries = run_log.read_log()
    if not entries:
        click.echo("📭 No pipeline runs recorded yet")
        return
    last = entries[-1]
    mark = "✅" if last["success"] else "❌"
    click.echo(f"{mark} Last stage: {last['stage']} at {last['timestamp']}")
    failures = run_log.recent_failures(hours)
    if failures:
        click.echo(f"⚠️  {len(failures)} failures in the last {hours}h:")
        for entry in failures[-3:]:
            click.echo(f"   • {entry['timestamp']} {entry['stage']}: {entry['error']}")
    else:
        click.echo(f"✅ No failures in the last {hours}h")


if __name__ == "__main__":
    cli()
