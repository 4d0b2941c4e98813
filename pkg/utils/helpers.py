"""
Utility Helper Functions
"""

import csv
import json
import re
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np


def sanitize_filename(filename: str) -> str:
    """
    Sanitize a run label so it can be used as a file or directory name

    Args:
        filename: Original name (benchmark label, config stem, ...)

    Returns:
        Sanitized name
    """
    filename = Path(filename).name
    filename = re.sub(r'[^\w\s\-\.]', '', filename)
    filename = re.sub(r'[\s]+', '_', filename)
    return filename


def save_matrix_csv(path: Path, matrix: np.ndarray, header: Optional[Sequence[str]] = None) -> Path:
    """
    Write a matrix with full double precision

    Args:
        path: Destination file
        matrix: 2-D array (a vector is written as one column)
        header: Optional column names

    Returns:
        The path written
    """
    path = Path(path)
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    np.savetxt(
        path,
        matrix,
        delimiter=",",
        fmt="%.17g",
        header=",".join(header) if header else "",
        comments="",
    )
    return path


def load_matrix_csv(path: Path, has_header: bool = True) -> np.ndarray:
    """
    Read a matrix written by save_matrix_csv

    Returns:
        2-D array; an empty (0, k) array when the file holds only a header
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")
    with open(path) as f:
        first = f.readline().strip()
    width = len(first.split(",")) if first else 0
    data = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    if data.size == 0:
        return np.empty((0, width))
    return data


def write_rows_csv(path: Path, rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str]) -> Path:
    """Write dict rows with a fixed column order."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_cell(v) for k, v in row.items()})
    return path


def _format_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    """Write JSON, converting numpy arrays and scalars to plain Python values."""
    path = Path(path)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, default=_to_builtin)
    return path


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def calculate_processing_time(start_time: float, end_time: float) -> str:
    """
    Calculate and format processing time

    Args:
        start_time: Start timestamp
        end_time: End timestamp

    Returns:
        Formatted time string (e.g., "3.2s")
    """
    duration = end_time - start_time

    if duration < 1:
        return f"{duration * 1000:.0f}ms"
    else:
        return f"{duration:.1f}s"
