"""
Utilities module for gembed functionality.
"""

from .errors import (
    BufferCapacityError,
    ConfigError,
    EvaluationError,
    GembedError,
    GraphFormatError,
    IngestError,
    NonFiniteScoreError,
    PartitionIOError,
    PipelineError,
    PlanMismatchError,
)
from .utils import (
    configure_logging,
    dump_json_file,
    dump_yaml_file,
    load_json_file,
    load_yaml_file,
    write_rows_csv,
)

__all__ = [
    "BufferCapacityError",
    "ConfigError",
    "EvaluationError",
    "GembedError",
    "GraphFormatError",
    "IngestError",
    "NonFiniteScoreError",
    "PartitionIOError",
    "PipelineError",
    "PlanMismatchError",
    "configure_logging",
    "dump_json_file",
    "dump_yaml_file",
    "load_json_file",
    "load_yaml_file",
    "write_rows_csv",
]
