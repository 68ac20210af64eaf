"""
Modular MCP Server for citation-count prediction
"""
import sys
from pathlib import Path

from dotenv import load_dotenv
from mcp.server.fastmcp import FastMCP

# Load environment variables from .env file
env_path = Path(__file__).parent / ".env"
load_dotenv(dotenv_path=env_path)

from modules import data_management, reporting, run_log, training
from modules.config import Settings


def build_app(settings: Settings) -> FastMCP:
    """Create the MCP app and register every tool module"""
    app = FastMCP("Citation Prediction v1.0")

    # Configure all modules with the shared settings
    data_management.configure(settings)
    training.configure(settings)
    reporting.configure(settings)

    # Register tools from all modules
    app = data_management.register_tools(app)
    app = training.register_tools(app)
    app = reporting.register_tools(app)
    return app


def main():
    """Initialize the MCP server and register all tools"""
    settings = Settings()
    run_log.configure(settings.resolved_run_log(), settings.verbose)
    app = build_app(settings)

    sys.stderr.write(f"Citation prediction server ready (cache: {settings.resolved_cache_dir()}).\n")
    sys.stderr.flush()

    # Run the MCP server with stdio transport
    app.run(transport='stdio')


if __name__ == "__main__":
    main()
