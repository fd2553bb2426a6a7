"""Self-training loop with aligned pseudo-labels and a variable condition queue.

Epoch 1 is supervised only. At the end of every epoch the class statistics
are refreshed from full-set predictions, all unlabeled samples are
re-aligned, and the queue is refreshed and re-filled; later epochs mix
labeled batches with batches drawn from the queue.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .alignment import align_csda_batch, align_da_batch, class_distance_matrix
from .data import DatasetSplit
from .errors import EmptyEvalSet, EmptyLabeledSet, OutOfRange
from .metrics import auc_macro, confusion, mca
from .model import (TwoStream, ema_couple, forward, init_params, loss_and_grads, lr_at,
                    sgd_step)
from .prob_core import DEFAULT_EPS
from .tracker import DEFAULT_OMEGA, DEFAULT_T_MIN, ClassStats, init_stats, update_labeled, update_unlabeled
from .vcq import Vcq, VcqConfig

ALIGNMENT_MODES = ("none", "da", "csda")


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 256
    labeled_batch: int = 128
    unlabeled_batch: int = 128
    base_lr: float = 1e-4
    decay_epochs: tuple = (50, 125)
    seed: int = 0
    hidden: int = 32
    sigma_aug: float = 0.0

    def validate(self) -> None:
        if self.epochs < 1 or self.labeled_batch < 1 or self.unlabeled_batch < 1:
            raise ValueError("epochs and batch sizes must be >= 1")
        if not self.base_lr > 0 or self.hidden < 1 or self.sigma_aug < 0:
            raise ValueError("need base_lr > 0, hidden >= 1, sigma_aug >= 0")


@dataclass(frozen=True)
class MethodConfig:
    """Which pseudo-labeling variant to run.

    ``temperature=None`` selects class-adaptive temperatures; a number fixes
    the same temperature for every class.
    """
    alignment: str = "csda"
    temperature: float | None = None
    t_min: float = DEFAULT_T_MIN
    eps: float = DEFAULT_EPS
    use_unlabeled: bool = True

    def validate(self) -> None:
        if self.alignment not in ALIGNMENT_MODES:
            raise ValueError(f"alignment must be one of {ALIGNMENT_MODES}, got {self.alignment!r}")
        if self.temperature is not None and not 0 < self.temperature <= 1:
            raise ValueError(f"constant temperature must be in (0, 1], got {self.temperature}")


@dataclass
class EpochRecord:
    epoch: int
    eta: float
    supervised_loss: float
    unsupervised_loss: float
    val_auc: float
    val_mca: float
    pseudo_label_histogram: tuple
    frobenius_distance: float


@dataclass
class Diagnostics:
    """Per-epoch side outputs that do not belong in :class:`EpochRecord`."""
    stats: list = field(default_factory=list)
    class_distances: list = field(default_factory=list)  # (epoch, d per class, total)
    frobenius_pre: list = field(default_factory=list)
    queue: list = field(default_factory=list)  # (epoch, capacity, occupancy, tau)
    trace: list = field(default_factory=list)  # (epoch, event)

    def event(self, epoch: int, name: str) -> None:
        self.trace.append((epoch, name))


def eta(epoch_t: int, epochs: int) -> float:
    """Unsupervised loss weight, ramping linearly to 1 at the final epoch."""
    if not 1 <= epoch_t <= epochs:
        raise OutOfRange(f"epoch {epoch_t} outside [1, {epochs}]")
    return epoch_t / epochs


def evaluate(ts: TwoStream, X, y) -> tuple[float, float, np.ndarray]:
    """AUC, MCA and confusion matrix of encoder2 + head on a labeled set."""
    if len(y) == 0:
        raise EmptyEvalSet("evaluation set is empty")
    probs = forward(ts.model(2), X)
    try:
        auc = auc_macro(probs, y)
    except ValueError:
        auc = float("nan")
    return auc, mca(probs, y), confusion(probs, y)


def align_predictions(probs: np.ndarray, stats: ClassStats, method: MethodConfig) -> np.ndarray:
    if method.alignment == "none":
        return probs.copy()
    if method.alignment == "da":
        return align_da_batch(probs, stats.labeled_global, stats.unlabeled_global, method.eps)
    aligned, _ = align_csda_batch(probs, stats, method.eps, method.t_min, method.temperature)
    return aligned


def self_train(data: DatasetSplit, schedule: TrainSchedule, vcq_cfg: VcqConfig | None = None,
               omega: float = DEFAULT_OMEGA, method: MethodConfig | None = None,
               diagnostics: Diagnostics | None = None) -> tuple[TwoStream, list[EpochRecord]]:
    vcq_cfg = vcq_cfg or VcqConfig()
    method = method or MethodConfig()
    schedule.validate()
    method.validate()
    diag = diagnostics if diagnostics is not None else Diagnostics()

    lab, unl = data.labeled, data.unlabeled
    if len(lab) == 0:
        raise EmptyLabeledSet("labeled set is empty")
    n, d = lab.n, lab.d
    use_unl = method.use_unlabeled and len(unl) > 0

    init_rng, shuffle_rng, sweep_rng, sample_rng = np.random.default_rng(schedule.seed).spawn(4)
    params = init_params(d, schedule.hidden, n, init_rng)
    stats = init_stats(n, omega)
    vcq = Vcq(n, vcq_cfg)
    ts = None
    steps = math.ceil(len(lab) / schedule.labeled_batch)
    empty_x, empty_q = np.zeros((0, d)), np.zeros((0, n))
    records = []

    for epoch in range(1, schedule.epochs + 1):
        lr = lr_at(epoch, schedule.base_lr, schedule.decay_epochs)
        w = eta(epoch, schedule.epochs)
        order = shuffle_rng.permutation(len(lab))
        sup_sum = unsup_sum = 0.0
        unsup_steps = 0
        diag.event(epoch, "train")
        for step in range(steps):
            idx = order[step * schedule.labeled_batch:(step + 1) * schedule.labeled_batch]
            x_lab, y_lab = lab.features[idx], lab.labels[idx]
            if epoch > 1 and use_unl and len(vcq) > 0:
                x_unl, q_unl = vcq.sample_arrays(schedule.unlabeled_batch, sample_rng,
                                                 schedule.sigma_aug)
                unsup_steps += 1
            else:
                x_unl, q_unl = empty_x, empty_q
            probs_lab = forward(params, x_lab)
            loss, grads = loss_and_grads(params, x_lab, y_lab, x_unl, q_unl,
                                         w if epoch > 1 else 0.0, n)
            params = sgd_step(params, grads, lr)
            stats = update_labeled(stats, probs_lab, y_lab)
            sup_sum += loss.supervised
            unsup_sum += loss.unsupervised

        if epoch == 1:
            ts = TwoStream.from_params(params, omega)
        else:
            ts.set_trained(params)
            diag.event(epoch, "ema_couple")
            ts = ema_couple(ts)

        diag.frobenius_pre.append(class_distance_matrix(stats)[1])
        diag.event(epoch, "update_stats")
        stats = update_labeled(stats, forward(params, lab.features), lab.labels)
        hist = np.zeros(n, dtype=np.int64)
        if use_unl:
            probs_unl = forward(params, unl.features)
            perm = sweep_rng.permutation(len(unl))
            for start in range(0, len(perm), schedule.unlabeled_batch):
                chunk = perm[start:start + schedule.unlabeled_batch]
                stats = update_unlabeled(stats, probs_unl[chunk], eps=method.eps)
            diag.event(epoch, "align")
            aligned = align_predictions(probs_unl, stats, method)
            diag.event(epoch, "refresh_vcq")
            vcq.refresh(stats)
            diag.event(epoch, "offer")
            accepted = vcq.offer_many(unl.features[perm], aligned[perm], epoch)
            hist = np.bincount(np.argmax(aligned[perm][accepted], axis=1), minlength=n)
            diag.queue.append((epoch, vcq.lengths.copy(), vcq.occupancy(), vcq.tau.copy()))

        dist, total = class_distance_matrix(stats)
        diag.class_distances.append((epoch, dist, total))
        diag.stats.append((epoch, stats.to_json()))
        diag.event(epoch, "evaluate")
        val_auc, val_mca, _ = evaluate(ts, data.val.features, data.val.labels)
        records.append(EpochRecord(
            epoch=epoch,
            eta=w,
            supervised_loss=sup_sum / steps,
            unsupervised_loss=unsup_sum / unsup_steps if unsup_steps else 0.0,
            val_auc=val_auc,
            val_mca=val_mca,
            pseudo_label_histogram=tuple(int(c) for c in hist),
            frobenius_distance=total,
        ))
    return ts, records
