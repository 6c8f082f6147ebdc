"""
Deterministic file storage for run outputs.

This module handles:
- CSV tables with a '# key: value' header block carrying the config hash
- JSON reports with the config hash as a top-level key
- Readers for both formats (used by the rates subcommand and the tests)

Tables go through pandas. Floats are written with settings.float_format and
read back with the round-trip parser, booleans as 0/1, NaN as 'nan', and
every line ends in '\n', so repeated runs of one config are byte-identical.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from config import settings
from errors import StorageError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
NAN_TEXT = "nan"


@dataclass
class CsvTable:
    """A CSV file read back: header metadata plus named columns."""

    columns: List[str]
    data: Dict[str, np.ndarray]
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def config_hash(self) -> Optional[str]:
        return self.metadata.get("config_hash")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]


def ensure_directory(path: PathLike) -> Path:
    """
    Create an output directory (and its parents) if needed.

    Args:
        path: Directory to create

    Returns:
        Path: The directory

    Raises:
        StorageError: If the directory cannot be created
    """
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"Cannot create output directory {directory}: {e}") from e
    return directory


# ============== CSV ==============

def _frame_column(values: Sequence[Any]) -> np.ndarray:
    column = np.asarray(values)
    if column.dtype == bool:
        return column.astype(int)
    if column.dtype == object and all(isinstance(v, (bool, np.bool_)) for v in column):
        return column.astype(int)
    return column


def write_csv(
    path: PathLike,
    columns: Sequence[str],
    data: Mapping[str, Sequence[Any]],
    config_hash: str,
    metadata: Optional[Mapping[str, Any]] = None,
) -> Path:
    """
    Write named columns as a CSV table.

    Args:
        path: Output file
        columns: Column order; every name must be a key of data
        data: Equal-length columns (numbers, booleans or strings)
        config_hash: Hash of the config that produced the data
        metadata: Extra header entries

    Returns:
        Path: The written file

    Raises:
        StorageError: If a column is missing, lengths differ, or the write fails
    """
    missing = [name for name in columns if name not in data]
    if missing:
        raise StorageError(f"Missing columns for {path}: {', '.join(missing)}")
    lengths = {len(data[name]) for name in columns}
    if len(lengths) > 1:
        raise StorageError(f"Columns of {path} have different lengths: {sorted(lengths)}")

    frame = pd.DataFrame({name: _frame_column(data[name]) for name in columns}, columns=list(columns))
    header = {"config_hash": config_hash, **(metadata or {})}

    target = Path(path)
    try:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            for key, value in header.items():
                fh.write(f"# {key}: {value}\n")
            frame.to_csv(
                fh,
                index=False,
                float_format=f"%{settings.float_format}",
                na_rep=NAN_TEXT,
                lineterminator="\n",
            )
    except OSError as e:
        raise StorageError(f"Failed to write {target}: {e}") from e
    logger.debug(f"Wrote {len(frame)} rows to {target}")
    return target


def read_csv(path: PathLike) -> CsvTable:
    """
    Read a CSV written by write_csv.

    Args:
        path: CSV file with an optional '# key: value' header block

    Returns:
        CsvTable: Numeric columns as float arrays, other columns as string arrays

    Raises:
        StorageError: If the file is missing or malformed
    """
    metadata: Dict[str, str] = {}
    header_lines = 0
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].partition(":")
                metadata[key.strip()] = value.strip()
                header_lines += 1
        frame = pd.read_csv(
            path,
            skiprows=header_lines,
            float_precision="round_trip",
            keep_default_na=False,
            na_values=[NAN_TEXT, "NaN"],
        )
    except OSError as e:
        raise StorageError(f"Failed to read {path}: {e}") from e
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise StorageError(f"{path} is not a valid table: {e}") from e

    data: Dict[str, np.ndarray] = {}
    for name in frame.columns:
        column = frame[name]
        if pd.api.types.is_numeric_dtype(column):
            data[name] = column.to_numpy(dtype=float)
        else:
            data[name] = column.astype(str).to_numpy(dtype=str)
    return CsvTable(columns=[str(name) for name in frame.columns], data=data, metadata=metadata)


# ============== JSON ==============

def write_json(path: PathLike, payload: Mapping[str, Any], config_hash: str) -> Path:
    """
    Write a JSON report with sorted keys and the config hash at the top level.

    Raises:
        StorageError: If the write fails
    """
    target = Path(path)
    document = {"config_hash": config_hash, **payload}
    try:
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(document, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    except (OSError, TypeError) as e:
        raise StorageError(f"Failed to write {target}: {e}") from e
    logger.debug(f"Wrote report {target}")
    return target


def read_json(path: PathLike) -> Dict[str, Any]:
    """
    Load a JSON report.

    Args:
        path: File written by write_json

    Returns:
        Dict: The decoded document, config_hash included

    Raises:
        StorageError: If the file is missing or not valid JSON
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise StorageError(f"Failed to read {path}: {e}") from e


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
