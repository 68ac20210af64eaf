"""
Status output and stage-attempt log for pipeline runs.

Status lines go to stderr so stdout stays free for the stdio MCP transport
and for JSON emitted by the CLI.
"""
import json
import sys
from contextlib import contextmanager
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, Iterator, List, Optional

from modules.errors import CitePredError, StageError

MAX_ENTRIES = 50

# Set by configure(); None disables the persistent log
log_file: Optional[Path] = None
verbose = False


def configure(path: Optional[Path], be_verbose: bool = False):
    """Point the run log at a JSON file"""
    global log_file, verbose
    log_file = Path(path).expanduser() if path is not None else None
    verbose = be_verbose


def status(message: str):
    sys.stderr.write(message + "\n")
    sys.stderr.flush()


def debug(message: str):
    if verbose:
        status(message)


def log_stage_attempt(success: bool, stage: str, error: Optional[str] = None, detail: Optional[dict] = None):
    """Append one stage attempt to the run log, keeping the last MAX_ENTRIES"""
    if log_file is None:
        return
    log_entry = {
        "timestamp": datetime.now().isoformat(),
        "success": success,
        "stage": stage,
        "error": error,
        "detail": detail or {},
    }
    try:
        if log_file.exists():
            with open(log_file, "r") as f:
                logs = json.load(f)
        else:
            logs = []
        logs.append(log_entry)
        logs = logs[-MAX_ENTRIES:]
        log_file.parent.mkdir(parents=True, exist_ok=True)
        with open(log_file, "w") as f:
            json.dump(logs, f, indent=2)
    except (OSError, ValueError):
        # A broken log must never fail the stage
        pass


def read_log() -> List[Dict]:
    if log_file is None or not log_file.exists():
        return []
    try:
        with open(log_file, "r") as f:
            return json.load(f)
    except (OSError, ValueError):
        return []


def recent_failures(hours: int = 24) -> List[Dict]:
    cutoff = datetime.now() - timedelta(hours=hours)
    return [
        entry
        for entry in read_log()
        if not entry.get("success") and datetime.fromisoformat(entry["timestamp"]) >= cutoff
    ]


@contextmanager
def stage(name: str, **detail) -> Iterator[None]:
    """Run a pipeline stage: log the attempt and tag any failure with the stage name"""
    debug(f"▶ {name}")
    try:
        yield
    except StageError:
        raise
    except CitePredError as e:
        log_stage_attempt(False, name, str(e), detail)
        raise StageError(name, e) from e
    except (ValueError, ArithmeticError, OSError, KeyError) as e:
        log_stage_attempt(False, name, f"{type(e).__name__}: {e}", detail)
        raise StageError(name, e) from e
    log_stage_attempt(True, name, None, detail)
