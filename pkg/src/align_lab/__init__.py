"""Class-specific distribution alignment and variable condition queues for imbalanced self-training."""

from .alignment import AlignedGuess, align_csda, align_da, class_distance_matrix
from .data import Dataset, DatasetSplit, SynthSpec, gen_synthetic, load_csv, split
from .engine import EpochRecord, MethodConfig, TrainSchedule, evaluate, self_train
from .tracker import ClassStats, init_stats, update_labeled, update_unlabeled
from .vcq import Vcq, VcqConfig

__version__ = "0.1.0"

__all__ = [
    "AlignedGuess", "ClassStats", "Dataset", "DatasetSplit", "EpochRecord", "MethodConfig",
    "SynthSpec", "TrainSchedule", "Vcq", "VcqConfig", "align_csda", "align_da",
    "class_distance_matrix", "evaluate", "gen_synthetic", "init_stats", "load_csv",
    "self_train", "split", "update_labeled", "update_unlabeled",
]
