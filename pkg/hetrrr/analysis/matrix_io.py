"""
CSV matrix and JSON report I/O.
"""

import json
import math
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DimensionMismatch, NonFiniteEntry

PathLike = Union[str, Path]


def _is_numeric_row(values: Sequence[str]) -> bool:
    try:
        [float(v) for v in values if isinstance(v, str) and v.strip() != ""]
    except ValueError:
        return False
    return True


def read_matrix_csv(path: PathLike) -> np.ndarray:
    """
    Read a rectangular numeric CSV; a non-numeric first row is taken as the header.

    Raises:
        DimensionMismatch: ragged rows
        NonFiniteEntry: non-numeric cells
        OSError: unreadable file
    """
    try:
        raw = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, encoding="utf-8")
    except pd.errors.ParserError as exc:
        raise DimensionMismatch(f"{path}: rows have different lengths ({exc})") from exc
    except pd.errors.EmptyDataError as exc:
        raise DimensionMismatch(f"{path}: file is empty") from exc

    if not _is_numeric_row(list(raw.iloc[0])):
        raw = raw.iloc[1:]
    try:
        values = raw.apply(pd.to_numeric).to_numpy(dtype=float)
    except ValueError as exc:
        raise NonFiniteEntry(f"{path}: non-numeric entry ({exc})") from exc
    if values.shape[0] == 0:
        raise DimensionMismatch(f"{path}: no data rows")
    return values


def write_matrix_csv(path: PathLike, M: np.ndarray, prefix: Optional[str] = None) -> None:
    """Write M row-major; with prefix the header is prefix1..prefixN."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    columns = [f"{prefix}{j + 1}" for j in range(M.shape[1])] if prefix else None
    pd.DataFrame(M, columns=columns).to_csv(path, index=False, header=columns is not None)


def to_jsonable(value: Any) -> Any:
    """numpy values to plain Python; NaN and infinities become None."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: PathLike, payload: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_jsonable(payload), fh, indent=2, sort_keys=False, allow_nan=False)
        fh.write("\n")
