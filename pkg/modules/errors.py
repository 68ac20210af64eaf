"""
Exception hierarchy for the citation prediction toolkit.

Every error carries the process exit code the CLI reports for it.
"""


class CitePredError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


class ConfigError(CitePredError, ValueError):
    """Invalid configuration or violated call precondition"""

    exit_code = 2


class DataError(CitePredError):
    """Input data cannot support the requested operation"""

    exit_code = 3


class ParseError(DataError):
    """Fatal problem while reading a corpus stream"""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class UnknownPaperError(DataError, KeyError):
    """Paper id not present in the snapshot"""

    def __init__(self, paper_id: str):
        self.paper_id = paper_id
        super().__init__(f"unknown paper id {paper_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class ShapeError(DataError, ValueError):
    """Array dimensions do not line up"""


class FingerprintMismatchError(DataError):
    """Prediction graph differs from the graph the model was trained on"""


class NumericError(CitePredError, ArithmeticError):
    """Non-finite values or singular systems"""

    exit_code = 4


class StageError(CitePredError):
    """A pipeline stage failed; keeps the stage name and the cause's exit code"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"stage '{stage}' failed: {cause}")
