"""Running per-class marginal predictions and mean class confidences.

Each class ``i`` keeps an EMA of the mean prediction over samples that
belong to it, separately for labeled data (membership by true label) and
unlabeled data (membership by MAP estimate). The own-class entry of a
marginal is that class's mean confidence. Class-agnostic marginals over the
whole batch are tracked alongside for plain distribution alignment.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyBatch, InvalidClassCount, InvalidOmega, NegativeEntry, OutOfRange
from .prob_core import DEFAULT_EPS, normalize, temp_scale

DEFAULT_OMEGA = 0.95
DEFAULT_T_MIN = 0.05


@dataclass
class ClassStats:
    n: int
    labeled_marginal: np.ndarray  # (n, n), row i is the marginal of class i
    unlabeled_marginal: np.ndarray
    labeled_conf: np.ndarray  # (n,)
    unlabeled_conf: np.ndarray
    omega: float = DEFAULT_OMEGA
    labeled_global: np.ndarray = field(default=None)
    unlabeled_global: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.labeled_global is None:
            self.labeled_global = np.full(self.n, 1.0 / self.n)
        if self.unlabeled_global is None:
            self.unlabeled_global = np.full(self.n, 1.0 / self.n)

    def copy(self) -> "ClassStats":
        return ClassStats(
            n=self.n,
            labeled_marginal=self.labeled_marginal.copy(),
            unlabeled_marginal=self.unlabeled_marginal.copy(),
            labeled_conf=self.labeled_conf.copy(),
            unlabeled_conf=self.unlabeled_conf.copy(),
            omega=self.omega,
            labeled_global=self.labeled_global.copy(),
            unlabeled_global=self.unlabeled_global.copy(),
        )

    def to_json(self) -> dict:
        return {
            "labeled_marginal": self.labeled_marginal.tolist(),
            "unlabeled_marginal": self.unlabeled_marginal.tolist(),
            "labeled_conf": self.labeled_conf.tolist(),
            "unlabeled_conf": self.unlabeled_conf.tolist(),
            "labeled_global": self.labeled_global.tolist(),
            "unlabeled_global": self.unlabeled_global.tolist(),
            "omega": self.omega,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ClassStats":
        lm = np.asarray(obj["labeled_marginal"], dtype=np.float64)
        return cls(
            n=lm.shape[0],
            labeled_marginal=lm,
            unlabeled_marginal=np.asarray(obj["unlabeled_marginal"], dtype=np.float64),
            labeled_conf=np.asarray(obj["labeled_conf"], dtype=np.float64),
            unlabeled_conf=np.asarray(obj["unlabeled_conf"], dtype=np.float64),
            omega=float(obj.get("omega", DEFAULT_OMEGA)),
            labeled_global=np.asarray(obj["labeled_global"], dtype=np.float64)
            if "labeled_global" in obj else None,
            unlabeled_global=np.asarray(obj["unlabeled_global"], dtype=np.float64)
            if "unlabeled_global" in obj else None,
        )


def init_stats(n: int, omega: float = DEFAULT_OMEGA) -> ClassStats:
    if int(n) != n or n < 2:
        raise InvalidClassCount(f"need at least 2 classes, got {n}")
    if not 0.0 < omega < 1.0:
        raise InvalidOmega(f"omega must be in (0, 1), got {omega}")
    n = int(n)
    uniform = np.full((n, n), 1.0 / n)
    return ClassStats(
        n=n,
        labeled_marginal=uniform,
        unlabeled_marginal=uniform.copy(),
        labeled_conf=np.full(n, 1.0 / n),
        unlabeled_conf=np.full(n, 1.0 / n),
        omega=float(omega),
    )


def _check_batch(stats: ClassStats, probs, classes):
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise EmptyBatch("batch must contain at least one prediction")
    if probs.shape[1] != stats.n:
        raise DimensionMismatch(f"predictions have {probs.shape[1]} classes, stats have {stats.n}")
    if classes is None:
        classes = np.argmax(probs, axis=1)
    classes = np.asarray(classes, dtype=np.int64).reshape(-1)
    if classes.shape[0] != probs.shape[0]:
        raise DimensionMismatch("one class index per prediction is required")
    if np.any((classes < 0) | (classes >= stats.n)):
        raise OutOfRange("class index out of range")
    return probs, classes


def _ema_rows(marginal, conf, probs, classes, omega):
    """EMA-update the rows of classes present in the batch; returns the presence mask."""
    n = marginal.shape[0]
    counts = np.bincount(classes, minlength=n)
    present = counts > 0
    sums = np.zeros_like(marginal)
    np.add.at(sums, classes, probs)
    rows = np.flatnonzero(present)
    blended = marginal[rows] * omega + (sums[rows] / counts[rows, None]) * (1.0 - omega)
    if np.any(blended < 0):
        raise NegativeEntry("negative probability in batch")
    marginal[rows] = blended / blended.sum(axis=1, keepdims=True)
    conf[rows] = marginal[rows, rows]
    return present


def update_labeled(stats: ClassStats, probs, labels) -> ClassStats:
    """EMA step for labeled marginals using true labels; absent classes are untouched."""
    probs, labels = _check_batch(stats, probs, labels)
    out = stats.copy()
    _ema_rows(out.labeled_marginal, out.labeled_conf, probs, labels, out.omega)
    out.labeled_global = normalize(
        out.labeled_global * out.omega + probs.mean(axis=0) * (1.0 - out.omega))
    return out


def fallback_factor(stats: ClassStats, eps: float = DEFAULT_EPS) -> float:
    """Average ratio converting labeled confidences into unlabeled ones."""
    return float(np.mean(stats.unlabeled_conf / np.maximum(stats.labeled_conf, eps)))


def update_unlabeled(stats: ClassStats, probs, classes=None, eps: float = DEFAULT_EPS) -> ClassStats:
    """EMA step for unlabeled marginals, class membership by MAP estimate.

    A class that is the MAP class of no sample in the batch would otherwise
    never move; instead its confidence is set to its labeled confidence times
    the average unlabeled/labeled confidence ratio (taken from the statistics
    before this batch), and its marginal is rebuilt from the labeled marginal
    in the same way.
    """
    probs, classes = _check_batch(stats, probs, classes)
    factor = fallback_factor(stats, eps)
    out = stats.copy()
    present = _ema_rows(out.unlabeled_marginal, out.unlabeled_conf, probs, classes, out.omega)
    for i in np.flatnonzero(~present):
        out.unlabeled_conf[i] = stats.labeled_conf[i] * factor
        scaled = stats.labeled_marginal[i] * factor
        if scaled.sum() > 0:
            out.unlabeled_marginal[i] = normalize(scaled)
    out.unlabeled_global = normalize(
        out.unlabeled_global * out.omega + probs.mean(axis=0) * (1.0 - out.omega))
    return out


def class_temperature(stats: ClassStats, i: int, t_min: float = DEFAULT_T_MIN) -> float:
    return float(np.clip(1.0 - stats.labeled_conf[i], t_min, 1.0))


def scaled_labeled_marginal(stats: ClassStats, i: int, t_min: float = DEFAULT_T_MIN,
                            temperature: float | None = None) -> np.ndarray:
    """Temperature-scaled labeled marginal of class ``i``.

    With ``temperature=None`` the temperature is class adaptive,
    ``1 - labeled_conf[i]`` clamped to ``[t_min, 1]``; otherwise the given
    constant is used for every class.
    """
    T = class_temperature(stats, i, t_min) if temperature is None else temperature
    return temp_scale(stats.labeled_marginal[i], T)
