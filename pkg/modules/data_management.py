"""
Corpus management tools for the Citation Prediction MCP Server
"""
import json
from pathlib import Path
from typing import List, Optional

from modules import pipeline
from modules.config import Settings, load_synth_config
from modules.corpus import citation_count, load_snapshot
from modules.synth import generate, write_corpus

# The settings will be set by the main file
settings: Optional[Settings] = None


def configure(server_settings: Settings):
    """Configure the module with the server settings"""
    global settings
    settings = server_settings


def _snapshot_path(snapshot_path: Optional[str]) -> Path:
    if snapshot_path:
        return Path(snapshot_path).expanduser()
    return pipeline.default_snapshot_path(settings)


def register_tools(app):
    """Register all corpus management tools with the MCP server app"""

    @app.tool()
    async def ingest_corpus(paths: List[str], snapshot_path: Optional[str] = None, productivity_cap: int = 1000) -> str:
        """Parse and clean AMiner or JSON-Lines corpora into the snapshot cache

        Args:
            paths: Corpus files (.txt AMiner v1 or .jsonl, optionally gzipped)
            snapshot_path: Where to write the snapshot cache (defaults to the cache directory)
            productivity_cap: Maximum papers per author-year before an author's records are dropped
        """
        try:
            result = pipeline.ingest([Path(p) for p in paths], _snapshot_path(snapshot_path), productivity_cap)
            return json.dumps(result.to_dict(), indent=2)
        except Exception as e:
            return f"Error ingesting corpus: {str(e)}"

    @app.tool()
    async def generate_synthetic_corpus(out_dir: str, config_path: Optional[str] = None, seed: Optional[int] = None) -> str:
        """Generate a synthetic corpus with known future citation counts

        Args:
            out_dir: Directory that receives corpus.txt and ground_truth.csv
            config_path: Optional JSON synthesis config
            seed: Overrides the config seed
        """
        try:
            config = load_synth_config(Path(config_path) if config_path else None)
            if seed is not None:
                config = config.model_copy(update={"seed": seed})
            written = write_corpus(generate(config), Path(out_dir))
            return json.dumps(written, indent=2)
        except Exception as e:
            return f"Error generating synthetic corpus: {str(e)}"

    @app.tool()
    async def get_citation_count(paper_id: str, from_year: int, to_year: int, snapshot_path: Optional[str] = None) -> str:
        """Count citations a paper received between two years (inclusive)

        Args:
            paper_id: Paper identifier as it appears after #index
            from_year: First year of the window
            to_year: Last year of the window
            snapshot_path: Snapshot cache to query (defaults to the cache directory)
        """
        try:
            snapshot, _ = load_snapshot(_snapshot_path(snapshot_path))
            count = citation_count(snapshot, paper_id, from_year, to_year)
            return f"Paper {paper_id} received {count} citations in {from_year}-{to_year}."
        except Exception as e:
            return f"Error retrieving citation count: {str(e)}"

    @app.tool()
    async def get_snapshot_summary(snapshot_path: Optional[str] = None) -> str:
        """Summarize the cached snapshot: size, year range and cleaning report"""
        try:
            path = _snapshot_path(snapshot_path)
            snapshot, report = load_snapshot(path)
            if not len(snapshot):
                return f"Snapshot at {path} is empty."
            years = [r.year for r in snapshot.papers.values()]
            summary = {
                "path": str(path),
                "papers": len(snapshot),
                "first_year": min(years),
                "cutoff_year": snapshot.cutoff_year,
                "authors": len(snapshot.author_index),
                "venues": len(snapshot.venue_index),
                "clean_report": report.to_dict() if report else None,
            }
            return json.dumps(summary, indent=2)
        except Exception as e:
            return f"Error retrieving snapshot summary: {str(e)}"

    return app
