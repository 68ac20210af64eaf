"""
Training and evaluation tools for the Citation Prediction MCP Server
"""
import json
from pathlib import Path
from typing import List, Optional

import pandas as pd

from modules import pipeline
from modules.config import Settings, load_experiment_config

# The settings will be set by the main file
settings: Optional[Settings] = None


def configure(server_settings: Settings):
    """Configure the module with the server settings"""
    global settings
    settings = server_settings


def register_tools(app):
    """Register all training-related tools with the MCP server app"""

    @app.tool()
    async def run_experiment(
        config_path: Optional[str] = None,
        case: Optional[str] = None,
        models: Optional[List[str]] = None,
        seed: Optional[int] = None,
        out_dir: Optional[str] = None,
    ) -> str:
        """Run the full pipeline for one case and return the test metrics

        Args:
            config_path: JSON experiment config (defaults apply when omitted)
            case: Temporal case, one of 1yr, 5yr, 10yr
            models: Subset of LR, RF, GBT, DNN, GCN
            seed: Seed for the split, the models and topic inference
            out_dir: Output directory for metrics, models and intermediate files
        """
        try:
            config = load_experiment_config(Path(config_path) if config_path else None)
            config = config.with_overrides(
                seed=seed, case=case, models=models, output_dir=Path(out_dir) if out_dir else None
            )
            result = pipeline.run_experiment(config, settings)
            return json.dumps(result.summary(), indent=2)
        except Exception as e:
            return f"Error running experiment: {str(e)}"

    @app.tool()
    async def get_loss_history(out_dir: str, last: int = 10) -> str:
        """Get the tail of the GCN training loss curve from a run directory

        Args:
            out_dir: Run directory written by run_experiment
            last: Number of final epochs to show
        """
        try:
            path = Path(out_dir) / "gcn_loss.csv"
            if not path.exists():
                return f"No GCN loss history found in {out_dir}."
            history = pd.read_csv(path, float_precision="round_trip")
            result = f"GCN loss over {len(history)} epochs (last {min(last, len(history))}):\n"
            for row in history.tail(last).itertuples():
                result += f"epoch {row.epoch}: {row.loss:.6f}\n"
            return result
        except Exception as e:
            return f"Error retrieving loss history: {str(e)}"

    @app.tool()
    async def get_feature_importance(out_dir: str, model: str = "RF", top: int = 10) -> str:
        """Get split-count feature importance of a tree model

        Args:
            out_dir: Run directory written by run_experiment
            model: RF or GBT
            top: Number of features to list
        """
        try:
            path = Path(out_dir) / f"feature_importance_{model}.csv"
            if not path.exists():
                return f"No feature importance for {model} found in {out_dir}."
            frame = pd.read_csv(path).sort_values("split_count", ascending=False, kind="mergesort")
            result = f"Top {top} features of {model} by split count:\n"
            for row in frame.head(top).itertuples():
                result += f"{row.feature}: {row.split_count}\n"
            return result
        except Exception as e:
            return f"Error retrieving feature importance: {str(e)}"

    return app
