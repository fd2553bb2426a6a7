"""Variable condition queue: per-class bounded FIFOs of pseudo-labeled samples."""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .data import jitter
from .errors import AllZeroConfidence, EmptyQueue, InvalidSpec
from .tracker import ClassStats


@dataclass(frozen=True)
class VcqConfig:
    L: int = 512
    gamma: float = 1.0
    delta: float = 0.25

    def validate(self, n: int) -> None:
        if self.L < n:
            raise InvalidSpec(f"queue capacity L={self.L} is smaller than the class count {n}")
        if self.gamma < 0:
            raise InvalidSpec(f"gamma must be >= 0, got {self.gamma}")
        if not 0.0 < self.delta < 1.0:
            raise InvalidSpec(f"delta must be in (0, 1), got {self.delta}")


@dataclass
class QueueItem:
    features: np.ndarray
    soft_label: np.ndarray
    enqueue_epoch: int = 0


def compute_lengths(stats: ClassStats, cfg: VcqConfig) -> np.ndarray:
    """Per-class capacities ``floor(L * c_i**gamma / sum_k c_k**gamma)``, with 0**0 = 1."""
    conf = np.asarray(stats.labeled_conf, dtype=np.float64)
    weights = np.power(conf, cfg.gamma)  # numpy gives 0.0**0 == 1.0
    total = weights.sum()
    if not total > 0:
        raise AllZeroConfidence("all labeled confidences are zero")
    return np.floor(cfg.L * weights / total).astype(np.int64)


def compute_threshold(stats: ClassStats, i: int, cfg: VcqConfig) -> float:
    return float(min(stats.unlabeled_conf[i], cfg.delta))


class Vcq:
    """``n`` FIFO queues whose capacities and admission thresholds follow the class statistics.

    Call :meth:`refresh` after every statistics update; it recomputes the
    capacities and thresholds and drops the oldest items of any queue that
    no longer fits.
    """

    def __init__(self, n: int, cfg: VcqConfig | None = None):
        self.n = n
        self.cfg = cfg or VcqConfig()
        self.cfg.validate(n)
        self.queues: list[deque] = [deque() for _ in range(n)]
        self.lengths = np.full(n, self.cfg.L // n, dtype=np.int64)
        self.tau = np.full(n, min(1.0 / n, self.cfg.delta))

    def refresh(self, stats: ClassStats) -> None:
        self.lengths = compute_lengths(stats, self.cfg)
        self.tau = np.array([compute_threshold(stats, i, self.cfg) for i in range(self.n)])
        for i, q in enumerate(self.queues):
            while len(q) > self.lengths[i]:
                q.popleft()

    def offer(self, item: QueueItem) -> bool:
        label = np.asarray(item.soft_label)
        i = int(np.argmax(label))
        if not label[i] > self.tau[i]:
            return False
        q = self.queues[i]
        q.append(item)
        while len(q) > self.lengths[i]:
            q.popleft()
        return True

    def offer_many(self, features: np.ndarray, soft_labels: np.ndarray,
                   epoch: int = 0) -> np.ndarray:
        """Offer rows in order; same outcome as calling :meth:`offer` per row.

        Returns the boolean acceptance mask. Only accepted items that would
        survive FIFO eviction are materialized.
        """
        soft_labels = np.asarray(soft_labels, dtype=np.float64)
        cls = np.argmax(soft_labels, axis=1)
        top = soft_labels[np.arange(len(cls)), cls]
        accepted = top > self.tau[cls]
        for i in range(self.n):
            rows = np.flatnonzero(accepted & (cls == i))
            cap = int(self.lengths[i])
            q = self.queues[i]
            keep = rows[max(len(rows) - cap, 0):] if cap > 0 else rows[:0]
            for r in keep:
                q.append(QueueItem(features[r].copy(), soft_labels[r].copy(), epoch))
            while len(q) > cap:
                q.popleft()
        return accepted

    def occupancy(self) -> np.ndarray:
        return np.array([len(q) for q in self.queues], dtype=np.int64)

    def __len__(self) -> int:
        return sum(len(q) for q in self.queues)

    def items(self) -> list[QueueItem]:
        return [item for q in self.queues for item in q]

    def sample_batch(self, count: int, rng: np.random.Generator,
                     sigma_aug: float = 0.0) -> list[QueueItem]:
        """Draw up to ``count`` stored items uniformly without replacement, features jittered.

        Returned items are copies; the queue contents are left in place.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        pool = self.items()
        if not pool:
            raise EmptyQueue("no pseudo-labeled items stored")
        idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
        return [QueueItem(jitter(pool[k].features, sigma_aug, rng), pool[k].soft_label,
                          pool[k].enqueue_epoch) for k in idx]

    def sample_arrays(self, count: int, rng: np.random.Generator,
                      sigma_aug: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        batch = self.sample_batch(count, rng, sigma_aug)
        return (np.stack([it.features for it in batch]),
                np.stack([it.soft_label for it in batch]))
