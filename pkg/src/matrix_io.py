"""
Matrix JSON format
{"dim": n, "entries": [[re, im], ...]} with n^2 pairs in row-major order.
Floats are written with Python's shortest round-trip repr, so a write/read cycle is bitwise exact.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from errors import InvalidMatrix
from linalg_core import CMatrix, as_cmatrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def matrix_to_json(m: CMatrix) -> Dict[str, Any]:
    m = as_cmatrix(m)
    flat = m.reshape(-1)
    return {
        "dim": int(m.shape[0]),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(data: Dict[str, Any]) -> CMatrix:
    try:
        n = int(data["dim"])
        entries = data["entries"]
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidMatrix(f"Matrix JSON needs integer 'dim' and list 'entries': {e}") from e
    if not isinstance(entries, list):
        raise InvalidMatrix(f"Matrix entries must be a list, got {type(entries).__name__}")
    if n < 1:
        raise InvalidMatrix(f"Matrix dimension must be at least 1, got {n}")
    if len(entries) != n * n:
        raise InvalidMatrix(f"Expected {n * n} entries for dim {n}, got {len(entries)}")
    try:
        values = np.array([complex(float(re), float(im)) for re, im in entries], dtype=np.complex128)
    except (TypeError, ValueError) as e:
        raise InvalidMatrix(f"Entries must be [re, im] number pairs: {e}") from e
    return as_cmatrix(values.reshape(n, n))


def finite_or_none(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None


# -----------------------------
# File helpers
# -----------------------------
def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_json(path: PathLike, data: Any) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, allow_nan=False)
        f.write("\n")
    logger.debug(f"Wrote {path}")


def read_matrix(path: PathLike) -> CMatrix:
    try:
        data = read_json(path)
    except json.JSONDecodeError as e:
        raise InvalidMatrix(f"{path} is not valid JSON: {e}") from e
    return matrix_from_json(data)


def write_matrix(path: PathLike, m: CMatrix) -> None:
    write_json(path, matrix_to_json(m))


def dumps_matrix(m: CMatrix) -> str:
    return json.dumps(matrix_to_json(m), allow_nan=False)


# -----------------------------
# Rectangular arrays (Sylvester right-hand sides and solutions)
# -----------------------------
def array_to_json(x: np.ndarray) -> Dict[str, Any]:
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 2 and x.shape[0] == x.shape[1]:
        return matrix_to_json(x)
    return {
        "rows": int(x.shape[0]),
        "cols": int(x.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in x.reshape(-1)],
    }


def array_from_json(data: Dict[str, Any]) -> np.ndarray:
    """Accepts the square {"dim", ...} form or {"rows", "cols", "entries"}"""
    if isinstance(data, dict) and "dim" in data:
        return matrix_from_json(data)
    try:
        rows, cols = int(data["rows"]), int(data["cols"])
        entries = data["entries"]
        values = np.array([complex(float(re), float(im)) for re, im in entries], dtype=np.complex128)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidMatrix(f"Array JSON needs 'rows', 'cols' and [re, im] 'entries': {e}") from e
    if rows < 1 or cols < 1 or values.size != rows * cols:
        raise InvalidMatrix(f"Expected {rows} x {cols} entries, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise InvalidMatrix("Array has NaN or infinite entries")
    return values.reshape(rows, cols)


def read_array(path: PathLike) -> np.ndarray:
    try:
        data = read_json(path)
    except json.JSONDecodeError as e:
        raise InvalidMatrix(f"{path} is not valid JSON: {e}") from e
    return array_from_json(data)
