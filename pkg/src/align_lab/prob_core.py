"""Elementwise operations on probability vectors.

Every function takes array-likes and returns fresh float64 arrays; inputs
are never modified.
"""

import numpy as np

from .errors import DimensionMismatch, InvalidTemperature, NegativeEntry, ZeroSum

DEFAULT_EPS = 1e-8


def _as_vec(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float64).reshape(-1)


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension {a.shape[0]} != {b.shape[0]}")


def normalize(v) -> np.ndarray:
    v = _as_vec(v)
    if np.any(v < 0):
        raise NegativeEntry(f"negative entry in {v!r}")
    total = v.sum()
    if not total > 0:
        raise ZeroSum("cannot normalize a vector with zero sum")
    return v / total


def hadamard_mul(a, b) -> np.ndarray:
    a, b = _as_vec(a), _as_vec(b)
    _same_dim(a, b)
    return a * b


def hadamard_div(a, b, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Elementwise ``a / b`` with the denominator floored at ``eps``."""
    a, b = _as_vec(a), _as_vec(b)
    _same_dim(a, b)
    return a / np.maximum(b, eps)


def temp_scale(p, T: float) -> np.ndarray:
    """Raise ``p`` to the power ``T`` elementwise and renormalize.

    Zero entries stay zero (0**T is taken as 0). ``T`` must lie in (0, 1];
    smaller values push the result toward uniform over the support of ``p``.
    """
    if not 0.0 < T <= 1.0:
        raise InvalidTemperature(f"temperature must be in (0, 1], got {T}")
    p = _as_vec(p)
    if T == 1.0:
        return normalize(p)
    powered = np.zeros_like(p)
    pos = p > 0
    powered[pos] = p[pos] ** T
    return normalize(powered)


def argmax_class(p) -> int:
    # np.argmax already returns the first maximal index
    return int(np.argmax(_as_vec(p)))
