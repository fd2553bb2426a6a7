"""Imbalance-robust evaluation metrics: macro one-vs-rest AUC, MCA, confusion."""

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyEvalSet, UndefinedMetric


def _check(scores, truth):
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise EmptyEvalSet("evaluation batch is empty")
    if scores.shape[0] != truth.shape[0]:
        raise ValueError("scores and truth disagree on sample count")
    return scores, truth


def binary_auc(scores, positive) -> float:
    """Mann-Whitney AUC: P(pos > neg) + 0.5 P(tie), from average ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUC needs at least one positive and one negative")
    ranks = rankdata(scores)
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def per_class_auc(scores, truth) -> dict[int, float]:
    scores, truth = _check(scores, truth)
    out = {}
    for i in range(scores.shape[1]):
        pos = truth == i
        if pos.any() and not pos.all():
            out[i] = binary_auc(scores[:, i], pos)
    return out


def auc_macro(scores, truth) -> float:
    """Unweighted mean of one-vs-rest AUC over classes with both positives and negatives."""
    aucs = per_class_auc(scores, truth)
    if not aucs:
        raise UndefinedMetric("no class has both positive and negative samples")
    return float(np.mean(list(aucs.values())))


def confusion(scores, truth) -> np.ndarray:
    """Counts indexed ``[true, predicted]``; prediction is the row argmax."""
    scores, truth = _check(scores, truth)
    n = scores.shape[1]
    pred = np.argmax(scores, axis=1)
    cm = np.zeros((n, n), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


def mca_from_confusion(cm) -> float:
    cm = np.asarray(cm)
    counts = cm.sum(axis=1)
    present = counts > 0
    return float(np.mean(np.diag(cm)[present] / counts[present]))


def mca(scores, truth) -> float:
    """Mean per-class recall over the classes present in ``truth``."""
    scores, truth = _check(scores, truth)
    pred = np.argmax(scores, axis=1)
    recalls = [np.mean(pred[truth == c] == c) for c in np.unique(truth)]
    return float(np.mean(recalls))


def histogram_entropy(counts) -> float:
    """Shannon entropy (nats) of a count histogram; 0 for an empty histogram."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log(p)))
