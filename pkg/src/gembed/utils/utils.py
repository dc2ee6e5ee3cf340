"""
Utility functions for gembed.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

import pandas as pd
import yaml

PathLike = Union[str, Path]

_LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def load_yaml_file(file_path: PathLike) -> Dict[str, Any]:
    """
    Load a YAML mapping from a file.

    Args:
        file_path: Path to the YAML file

    Returns:
        Dictionary with the loaded mapping (empty for an empty file)
    """
    yaml_file = Path(file_path)

    if not yaml_file.exists():
        raise FileNotFoundError(f"Config file not found: {file_path}")

    with open(yaml_file, "r", encoding="utf-8") as f:
        content = yaml.safe_load(f)

    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ValueError(f"Expected a mapping at the top of {file_path}")
    return content


def dump_yaml_file(data: Mapping[str, Any], file_path: PathLike) -> Path:
    """Write a mapping as YAML, keeping key order."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(dict(data), f, sort_keys=False)
    return path


def load_json_file(file_path: PathLike) -> Dict[str, Any]:
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"JSON file not found: {file_path}")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def dump_json_file(data: Any, file_path: PathLike) -> Path:
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=4)
    return path


def write_rows_csv(rows: Iterable[Mapping[str, Any]], file_path: PathLike, append: bool = False) -> Path:
    """
    Write a list of flat dict rows to CSV with pandas.

    Args:
        rows: Flat mappings, one per CSV row
        file_path: Destination path
        append: Append to an existing file (header written only once)

    Returns:
        The destination path
    """
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(list(rows))
    write_header = not (append and path.exists())
    df.to_csv(path, mode="a" if append else "w", header=write_header, index=False)
    return path


def configure_logging(level: Optional[str] = None) -> None:
    """Install a single stream handler; level from argument or GEMBED_LOG_LEVEL."""
    level_name = (level or os.getenv("GEMBED_LOG_LEVEL") or "INFO").upper()
    root = logging.getLogger("gembed")
    root.setLevel(getattr(logging, level_name, logging.INFO))
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        root.addHandler(handler)
