"""
Reporting and status tools for the Citation Prediction MCP Server
"""
import json
from pathlib import Path
from typing import List, Optional

from modules import pipeline, run_log
from modules.config import Settings

# The settings will be set by the main file
settings: Optional[Settings] = None


def configure(server_settings: Settings):
    """Configure the module with the server settings"""
    global settings
    settings = server_settings


def register_tools(app):
    """Register reporting tools with the MCP server app"""

    @app.tool()
    async def compare_reports(csv_paths: List[str], out_dir: Optional[str] = None) -> str:
        """Merge metrics CSVs into one comparison table with the best values flagged

        Args:
            csv_paths: metrics.csv files from one or more runs
            out_dir: When given, report.txt and report.json are written there
        """
        try:
            report = pipeline.merge_reports([Path(p) for p in csv_paths])
            if out_dir:
                pipeline.write_report(report, Path(out_dir))
            return report.to_text()
        except Exception as e:
            return f"Error comparing reports: {str(e)}"

    @app.tool()
    async def get_metrics(out_dir: str) -> str:
        """Get the test metrics of a finished run

        Args:
            out_dir: Run directory written by run_experiment
        """
        try:
            path = Path(out_dir) / "metrics.json"
            if not path.exists():
                return f"No metrics found in {out_dir}."
            with open(path, "r", encoding="utf-8") as f:
                return json.dumps(json.load(f), indent=2)
        except Exception as e:
            return f"Error retrieving metrics: {str(e)}"

    @app.tool()
    async def pipeline_status(hours: int = 24) -> str:
        """Check recent pipeline stage attempts and failures

        Args:
            hours: How far back to look for failures
        """
        try:
            entries = run_log.read_log()
            if not entries:
                return "No pipeline runs recorded yet."
            failures = run_log.recent_failures(hours)
            last = entries[-1]
            result = f"Last stage: {last['stage']} ({'ok' if last['success'] else 'failed'}) at {last['timestamp']}\n"
            result += f"Failures in the last {hours}h: {len(failures)}\n"
            for entry in failures[-5:]:
                result += f"  {entry['timestamp']} {entry['stage']}: {entry['error']}\n"
            return result
        except Exception as e:
            return f"Error retrieving pipeline status: {str(e)}"

    return app
