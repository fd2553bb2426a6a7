"""One-hidden-layer ReLU classifier with hand-written backprop and two-stream encoders.

Shapes: ``W1`` (h, d), ``b1`` (h,), ``W2`` (n, h), ``b2`` (n,). Batches are
row-major, ``X`` has shape (K, d).
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, ParseError, ShapeMismatch

LOG_CLAMP = 1e-12
MAGIC = b"ALAB1"


@dataclass
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        h, d = self.W1.shape
        return d, h, self.W2.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return self.W1, self.b1, self.W2, self.b2

    def copy(self) -> "MlpParams":
        return MlpParams(*(a.copy() for a in self.arrays()))


def init_params(d: int, h: int, n: int, rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    a1 = np.sqrt(6.0 / (d + h))
    a2 = np.sqrt(6.0 / (h + n))
    return MlpParams(
        W1=rng.uniform(-a1, a1, size=(h, d)),
        b1=np.zeros(h),
        W2=rng.uniform(-a2, a2, size=(n, h)),
        b2=np.zeros(n),
    )


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(params: MlpParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != params.W1.shape[1]:
        raise DimensionMismatch(f"input dimension {X.shape[1]} != {params.W1.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("input contains NaN or inf")
    return X


def forward(params: MlpParams, X) -> np.ndarray:
    """Class probabilities; a single vector in gives a single vector out."""
    single = np.asarray(X).ndim == 1
    X = _as_batch(params, X)
    hidden = np.maximum(X @ params.W1.T + params.b1, 0.0)
    p = softmax(hidden @ params.W2.T + params.b2)
    return p[0] if single else p


def cross_entropy(targets: np.ndarray, probs: np.ndarray) -> np.ndarray:
    return -np.sum(targets * np.log(np.maximum(probs, LOG_CLAMP)), axis=-1)


class Loss(NamedTuple):
    total: float
    supervised: float
    unsupervised: float


def loss_and_grads(params: MlpParams, x_lab, y_lab, x_unl, q_unl, eta: float,
                   n: int | None = None) -> tuple[Loss, MlpParams]:
    """Supervised plus ``eta``-weighted soft-label cross entropy, with exact gradients.

    Either batch may be empty and then contributes zero. Below the log clamp
    the loss is flat in the probability, so the gradient through that entry
    is exactly zero.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    n = params.W2.shape[0] if n is None else n
    d = params.W1.shape[1]
    x_lab = np.asarray(x_lab, dtype=np.float64).reshape(-1, d)
    y_lab = np.asarray(y_lab, dtype=np.int64).reshape(-1)
    x_unl = np.asarray(x_unl, dtype=np.float64).reshape(-1, d)
    q_unl = np.asarray(q_unl, dtype=np.float64).reshape(-1, n)
    if x_lab.shape[0] != y_lab.shape[0] or x_unl.shape[0] != q_unl.shape[0]:
        raise DimensionMismatch("features and targets disagree on batch size")

    k_lab, k_unl = x_lab.shape[0], x_unl.shape[0]
    targets = np.concatenate([np.eye(n)[y_lab], q_unl])
    weights = np.concatenate([
        np.full(k_lab, 1.0 / k_lab) if k_lab else np.zeros(0),
        np.full(k_unl, eta / k_unl) if k_unl else np.zeros(0),
    ])
    X = np.concatenate([x_lab, x_unl])

    pre = X @ params.W1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    probs = softmax(hidden @ params.W2.T + params.b2)

    ce = cross_entropy(targets, probs)
    sup = float(ce[:k_lab].mean()) if k_lab else 0.0
    unsup = float(ce[k_lab:].mean()) if k_unl else 0.0

    live = probs >= LOG_CLAMP
    dprobs = np.where(live, -targets / np.where(live, probs, 1.0), 0.0)
    dlogits = probs * (dprobs - np.sum(dprobs * probs, axis=1, keepdims=True))
    dlogits *= weights[:, None]
    dW2 = dlogits.T @ hidden
    db2 = dlogits.sum(axis=0)
    dpre = (dlogits @ params.W2) * (pre > 0)
    dW1 = dpre.T @ X
    db1 = dpre.sum(axis=0)
    return Loss(sup + eta * unsup, sup, unsup), MlpParams(dW1, db1, dW2, db2)


def sgd_step(params: MlpParams, grads: MlpParams, lr: float) -> MlpParams:
    if not lr > 0:
        raise ValueError("learning rate must be > 0")
    return MlpParams(*(p - lr * g for p, g in zip(params.arrays(), grads.arrays())))


def lr_at(epoch: int, base_lr: float, decay_epochs=(50, 125), factor: float = 0.1) -> float:
    """Step-decayed learning rate for a 1-based epoch index."""
    drops = sum(1 for e in decay_epochs if epoch >= e)
    return base_lr * factor ** drops


@dataclass
class TwoStream:
    """Two encoder parameter sets sharing one classification head.

    ``encoder2`` is trained by SGD; ``encoder1`` only follows it by EMA.
    Encoders are ``(W1, b1)`` pairs and the head is ``(W2, b2)``.
    """
    encoder1: tuple[np.ndarray, np.ndarray]
    encoder2: tuple[np.ndarray, np.ndarray]
    head: tuple[np.ndarray, np.ndarray]
    omega: float = 0.95

    @classmethod
    def from_params(cls, params: MlpParams, omega: float = 0.95) -> "TwoStream":
        enc = (params.W1.copy(), params.b1.copy())
        return cls(enc, (enc[0].copy(), enc[1].copy()), (params.W2.copy(), params.b2.copy()), omega)

    def model(self, which: int = 2) -> MlpParams:
        enc = self.encoder2 if which == 2 else self.encoder1
        return MlpParams(enc[0], enc[1], self.head[0], self.head[1])

    def set_trained(self, params: MlpParams) -> None:
        self.encoder2 = (params.W1, params.b1)
        self.head = (params.W2, params.b2)


def ema_couple(ts: TwoStream) -> TwoStream:
    """Move encoder1 toward encoder2 by one EMA step; encoder2 and head are shared, not copied."""
    for a, b in zip(ts.encoder1, ts.encoder2):
        if a.shape != b.shape:
            raise ShapeMismatch(f"encoder shapes differ: {a.shape} vs {b.shape}")
    w = ts.omega
    enc1 = tuple(a * w + b * (1.0 - w) for a, b in zip(ts.encoder1, ts.encoder2))
    return TwoStream(enc1, ts.encoder2, ts.head, w)


def save_two_stream(ts: TwoStream, path) -> None:
    """Little-endian binary: magic, uint32 d/h/n, then float64 arrays.

    Order is encoder1 (W1, b1), encoder2 (W1, b1), head (W2, b2), matrices
    row-major.
    """
    h, d = ts.encoder1[0].shape
    n = ts.head[0].shape[0]
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<3I", d, h, n))
        for arr in (*ts.encoder1, *ts.encoder2, *ts.head):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_two_stream(path, omega: float = 0.95) -> TwoStream:
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise ParseError("not an ALAB1 parameter file")
    d, h, n = struct.unpack_from("<3I", raw, 5)
    shapes = [(h, d), (h,), (h, d), (h,), (n, h), (n,)]
    expected = 17 + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(raw) != expected:
        raise ParseError(f"parameter file has {len(raw)} bytes, expected {expected}")
    arrays, offset = [], 17
    for s in shapes:
        count = int(np.prod(s))
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(s).copy())
        offset += 8 * count
    return TwoStream((arrays[0], arrays[1]), (arrays[2], arrays[3]), (arrays[4], arrays[5]), omega)
