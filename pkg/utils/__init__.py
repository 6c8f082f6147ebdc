"""
Utilities package for helper functions and tools.

This package provides:
- Logging configuration
- Deterministic CSV/JSON storage
"""

from utils.logger import setup_logging
from utils.storage import read_csv, read_json, write_csv, write_json

__all__ = [
    "setup_logging",
    "read_csv",
    "read_json",
    "write_csv",
    "write_json",
]
