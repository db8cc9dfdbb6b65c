"""CSV and summary loading with named-column validation."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["FigureDataError", "load_columns", "load_summary", "require_columns"]


class FigureDataError(Exception):
    """Missing files, missing columns, or malformed experiment outputs."""


def load_columns(path: Path) -> dict[str, np.ndarray]:
    """Read a headered CSV into {column name: float array}."""
    if not path.is_file():
        raise FigureDataError(f"missing input file: {path}")
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureDataError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise FigureDataError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as err:
        raise FigureDataError(f"{path}: non-numeric cell ({err})") from err
    if data.shape[1] != len(header):
        raise FigureDataError(f"{path}: ragged rows")
    return {name: data[:, i] for i, name in enumerate(header)}


def require_columns(columns: dict[str, np.ndarray], names: tuple[str, ...],
                    path: Path) -> None:
    missing = [n for n in names if n not in columns]
    if missing:
        raise FigureDataError(f"{path}: missing columns: {', '.join(missing)}")


def load_summary(input_dir: Path) -> dict:
    path = input_dir / "summary.json"
    if not path.is_file():
        raise FigureDataError(f"missing input file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise FigureDataError(f"{path}: invalid JSON ({err})") from err
