"""
Elementwise and row-wise numerics shared by every network in the laboratory.

All arrays are float64. A Matrix is a 2-D float64 ndarray (batch x features).
"""

import numpy as np

from app.core.errors import DegenerateInputError, NumericError, ShapeError

Matrix = np.ndarray


def as_matrix(x, cols: int | None = None, name: str = "x") -> Matrix:
    """Coerce to a 2-D float64 array, checking the column count when given."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional", details=f"got shape {arr.shape}")
    if cols is not None and arr.shape[1] != cols:
        raise ShapeError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return arr


def ensure_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"Non-finite values in {name}")
    return arr


def relu(u: np.ndarray) -> np.ndarray:
    return np.maximum(u, 0.0)


def relu_grad(u: np.ndarray) -> np.ndarray:
    return (u > 0.0).astype(np.float64)


def softmax(scores) -> np.ndarray:
    """Numerically stable softmax of a vector (max subtraction)."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ShapeError("softmax needs a non-empty vector", details=f"got shape {s.shape}")
    ensure_finite(s, "softmax scores")
    e = np.exp(s - s.max())
    return e / e.sum()


def softmax_rows(scores: Matrix) -> Matrix:
    """Row-wise softmax, identical numerics to softmax() on each row."""
    if scores.ndim != 2 or scores.shape[1] == 0:
        raise ShapeError("softmax_rows needs a non-empty matrix", details=f"got shape {scores.shape}")
    ensure_finite(scores, "softmax scores")
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def l2_normalize(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        raise DegenerateInputError("Cannot normalize a zero vector")
    return arr / norm


def l2_normalize_rows(m: Matrix) -> tuple[Matrix, np.ndarray]:
    """Normalize each row; returns (normalized rows, row norms) for the backward pass."""
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError("Cannot normalize a zero row", details=f"rows {np.flatnonzero(norms == 0.0).tolist()}")
    return m / norms[:, None], norms


def l2_normalize_rows_backward(normalized: Matrix, norms: np.ndarray, upstream: Matrix) -> Matrix:
    """Gradient of v / ||v|| given the normalized rows: (g - n (n . g)) / ||v||."""
    dots = np.sum(normalized * upstream, axis=1, keepdims=True)
    return (upstream - normalized * dots) / norms[:, None]
