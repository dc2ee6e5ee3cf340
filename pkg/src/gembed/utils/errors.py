"""
Error types shared across the engine.
"""

from typing import Optional


class GembedError(Exception):
    """Base class for every error raised by gembed."""


class ConfigError(GembedError, ValueError):
    """Invalid run configuration or hyper-parameters."""


class IngestError(GembedError, ValueError):
    """Malformed or empty raw edge list."""

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line_number is not None:
                location += f":{line_number}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line_number = line_number


class GraphFormatError(GembedError, ValueError):
    """On-disk file does not match the dataset manifest."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class PlanMismatchError(GembedError, ValueError):
    """Ordering plan does not fit the storage or buffer it is used with."""


class PartitionIOError(GembedError, IOError):
    """Reading or writing a node partition failed."""

    def __init__(self, partition_id: int, cause: Optional[BaseException] = None):
        message = f"IO failure on partition {partition_id}"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)
        self.partition_id = partition_id
        self.cause = cause


class BufferCapacityError(GembedError, RuntimeError):
    """Every resident block is pinned, nothing can be evicted."""


class NonFiniteScoreError(GembedError, FloatingPointError):
    """A score or loss went to inf/nan."""

    def __init__(self, batch_id: int, detail: str = ""):
        message = f"non-finite score in batch {batch_id}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self.batch_id = batch_id


class PipelineError(GembedError, RuntimeError):
    """A pipeline worker failed and the epoch was aborted."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"pipeline stage '{stage}' failed: {cause!r}")
        self.stage = stage
        self.cause = cause


class EvaluationError(GembedError, ValueError):
    """Nothing to evaluate, or the parameters do not cover the requested split."""
