"""Class-specific and class-agnostic distribution alignment of pseudo-labels."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroSum
from .prob_core import DEFAULT_EPS, argmax_class, hadamard_div, hadamard_mul, normalize
from .tracker import DEFAULT_T_MIN, ClassStats, scaled_labeled_marginal


@dataclass(frozen=True)
class AlignedGuess:
    q_tilde: np.ndarray
    source_class: int
    raw: np.ndarray


def class_ratio(stats: ClassStats, i: int, eps: float = DEFAULT_EPS, t_min: float = DEFAULT_T_MIN,
                temperature: float | None = None) -> np.ndarray:
    """Ratio vector between the scaled labeled and the unlabeled marginal of class ``i``."""
    return hadamard_div(scaled_labeled_marginal(stats, i, t_min, temperature),
                        stats.unlabeled_marginal[i], eps)


def align_csda(q, stats: ClassStats, eps: float = DEFAULT_EPS, t_min: float = DEFAULT_T_MIN,
               temperature: float | None = None) -> AlignedGuess:
    """Align one prediction with the marginals of its MAP class.

    The marginal pair is selected by the MAP class of the raw prediction;
    the aligned guess may end up with a different argmax.
    """
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != stats.n:
        raise DimensionMismatch(f"prediction has {q.shape[0]} classes, stats have {stats.n}")
    i = argmax_class(q)
    ratio = class_ratio(stats, i, eps, t_min, temperature)
    return AlignedGuess(q_tilde=normalize(hadamard_mul(q, ratio)), source_class=i, raw=q)


def align_da(q, labeled_global, unlabeled_global, eps: float = DEFAULT_EPS) -> np.ndarray:
    return normalize(hadamard_mul(q, hadamard_div(labeled_global, unlabeled_global, eps)))


def ratio_matrix(stats: ClassStats, eps: float = DEFAULT_EPS, t_min: float = DEFAULT_T_MIN,
                 temperature: float | None = None) -> np.ndarray:
    return np.stack([class_ratio(stats, i, eps, t_min, temperature) for i in range(stats.n)])


def _normalize_rows(raw: np.ndarray) -> np.ndarray:
    sums = raw.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ZeroSum("aligned prediction has zero mass")
    return raw / sums


def align_csda_batch(Q, stats: ClassStats, eps: float = DEFAULT_EPS, t_min: float = DEFAULT_T_MIN,
                     temperature: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`align_csda`; returns ``(aligned, source_classes)``."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != stats.n:
        raise DimensionMismatch(f"expected (K, {stats.n}) predictions, got {Q.shape}")
    src = np.argmax(Q, axis=1)
    R = ratio_matrix(stats, eps, t_min, temperature)
    return _normalize_rows(Q * R[src]), src


def align_da_batch(Q, labeled_global, unlabeled_global, eps: float = DEFAULT_EPS) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    ratio = hadamard_div(labeled_global, unlabeled_global, eps)
    if Q.ndim != 2 or Q.shape[1] != ratio.shape[0]:
        raise DimensionMismatch(f"expected (K, {ratio.shape[0]}) predictions, got {Q.shape}")
    return _normalize_rows(Q * ratio)


def class_distance_matrix(stats: ClassStats) -> tuple[np.ndarray, float]:
    """Per-class L2 distance between labeled and unlabeled marginals, plus the Frobenius total.

    Distances use the unscaled labeled marginals.
    """
    diff = stats.labeled_marginal - stats.unlabeled_marginal
    d = np.sqrt(np.sum(diff * diff, axis=1))
    return d, float(np.sqrt(np.sum(d * d)))
