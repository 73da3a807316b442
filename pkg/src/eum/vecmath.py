"""Vector primitives shared by every other module.

All arithmetic is done in 64-bit floats regardless of the dtype handed in;
file formats downcast to 32-bit only at the storage boundary.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, EmptyBatch, ZeroVector

ZERO_NORM_THRESHOLD = 1e-12


def _as_f64(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float64)


def l2_normalize(v) -> np.ndarray:
    """Scale a vector to unit euclidean norm."""
    v = _as_f64(v)
    norm = float(np.linalg.norm(v))
    if norm <= ZERO_NORM_THRESHOLD:
        raise ZeroVector(f"cannot normalize vector with norm {norm:g}")
    return v / norm


def normalize_rows(m) -> np.ndarray:
    """Normalize every row of an N x d matrix to unit norm."""
    m = _as_f64(m)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms <= ZERO_NORM_THRESHOLD):
        bad = int(np.argmax(norms <= ZERO_NORM_THRESHOLD))
        raise ZeroVector(f"row {bad} has norm {norms[bad]:g}")
    return m / norms[:, None]


def sq_euclid(x, y) -> float:
    """Squared euclidean distance between two normalized vectors."""
    x = _as_f64(x)
    y = _as_f64(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} vs {y.shape}")
    diff = x - y
    return float(np.dot(diff, diff))


def cosine_similarity(x, y) -> float:
    """Cosine of the angle between two nonzero vectors, in [-1, 1]."""
    x = _as_f64(x)
    y = _as_f64(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} vs {y.shape}")
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx <= ZERO_NORM_THRESHOLD or ny <= ZERO_NORM_THRESHOLD:
        raise ZeroVector("cosine undefined for zero vector")
    return float(np.dot(x, y) / (nx * ny))


def batch_mean(values) -> float:
    """Arithmetic mean of a nonempty array."""
    values = _as_f64(values)
    if values.size == 0:
        raise EmptyBatch("mean of empty array")
    return float(np.mean(values))
