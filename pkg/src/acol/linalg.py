"""Minimal dense float64 kernels used by every other module."""

import numpy as np


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def relu(z) -> np.ndarray:
    """Entry-wise max(0, z)."""
    return np.maximum(0.0, as_matrix(z))


def softmax_rows(z) -> np.ndarray:
    """Row-wise softmax, stable under large inputs via row-max subtraction."""
    z = as_matrix(z)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def require_finite(a, name: str = "matrix") -> np.ndarray:
    """Reject NaN/Inf entries; used where corrupt values must not propagate."""
    arr = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr
