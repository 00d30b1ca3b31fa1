"""Self-contained multinomial logistic regression for the FL simulator.

A linear softmax classifier trained by plain mini-batch SGD is enough to
express convergence-speed differences between energy policies without
pulling in an ML framework. Data comes either from a seeded synthetic
Gaussian-blob generator or from IDX-format image/label files.
"""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, InputFormatError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n, d) with integer labels (n,)."""

    x: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.ndim != 1 or len(self.x) != len(self.y):
            raise DomainError(
                f"expected (n, d) features with n labels, got {self.x.shape} / {self.y.shape}"
            )
        if self.n_classes < 2:
            raise DomainError(f"need at least 2 classes, got {self.n_classes}")

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.x[indices], self.y[indices], self.n_classes)


def synthetic_blobs(
    n_train: int,
    n_test: int,
    n_classes: int,
    dim: int,
    separation: float,
    seed_seq: np.random.SeedSequence,
    anisotropy: float = 1.0,
) -> tuple[Dataset, Dataset]:
    """Gaussian blobs around random class means with shared diagonal noise.

    ``separation`` scales the class means relative to the (geometric mean)
    within-class noise and controls the accuracy plateau of a linear model.
    ``anisotropy`` spreads the per-dimension noise variances geometrically
    over [1/a, a] around 1. With anisotropy above 1 the optimal boundary
    weights dimensions by inverse variance, which SGD has to learn over many
    steps, so the accuracy trajectory stretches over rounds instead of
    peaking immediately; 1 gives the isotropic special case.
    """
    if min(n_train, n_test) <= 0:
        raise DomainError("n_train and n_test must be positive")
    if separation <= 0:
        raise DomainError(f"separation must be positive, got {separation!r}")
    if anisotropy < 1:
        raise DomainError(f"anisotropy must be at least 1, got {anisotropy!r}")
    rng = np.random.default_rng(seed_seq)
    means = rng.standard_normal((n_classes, dim))
    scales = np.geomspace(1.0 / math.sqrt(anisotropy), math.sqrt(anisotropy), dim)
    n = n_train + n_test
    y = rng.integers(0, n_classes, size=n)
    x = separation * means[y] + scales * rng.standard_normal((n, dim))
    train = Dataset(x[:n_train], y[:n_train], n_classes)
    test = Dataset(x[n_train:], y[n_train:], n_classes)
    return train, test


_IDX_DTYPES = {
    0x08: np.dtype(np.uint8),
    0x09: np.dtype(np.int8),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def load_idx(path: str | Path) -> np.ndarray:
    """One IDX-format array (gzip transparent via a .gz suffix)."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[0] != 0 or data[1] != 0:
        raise InputFormatError(f"{path}: bad idx magic")
    code, ndim = data[2], data[3]
    dtype = _IDX_DTYPES.get(code)
    if dtype is None:
        raise InputFormatError(f"{path}: unknown idx dtype code {code:#x}")
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise InputFormatError(f"{path}: truncated idx header")
    shape = struct.unpack(f">{ndim}I", data[4:header_end])
    arr = np.frombuffer(data, dtype=dtype, offset=header_end)
    expected = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    if arr.size != expected:
        raise InputFormatError(
            f"{path}: payload holds {arr.size} values, header promises {expected}"
        )
    return arr.reshape(shape)


def load_idx_dataset(
    train_images: str | Path,
    train_labels: str | Path,
    test_images: str | Path,
    test_labels: str | Path,
) -> tuple[Dataset, Dataset]:
    """MNIST-style image/label file quadruple as flattened float features."""

    def build(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
        images = load_idx(images_path)
        labels = load_idx(labels_path)
        if images.ndim < 2 or labels.ndim != 1 or len(images) != len(labels):
            raise InputFormatError(
                f"{images_path} / {labels_path}: image and label counts disagree"
            )
        x = images.reshape(len(images), -1).astype(np.float64) / 255.0
        return x, labels.astype(np.int64)

    xtr, ytr = build(train_images, train_labels)
    xte, yte = build(test_images, test_labels)
    n_classes = int(max(ytr.max(), yte.max())) + 1
    return Dataset(xtr, ytr, n_classes), Dataset(xte, yte, n_classes)


class SoftmaxRegressor:
    """Multinomial logistic regression with zero-initialized parameters."""

    def __init__(self, dim: int, n_classes: int):
        self.w = np.zeros((dim, n_classes))
        self.b = np.zeros(n_classes)

    def copy(self) -> "SoftmaxRegressor":
        clone = SoftmaxRegressor(*self.w.shape)
        clone.w = self.w.copy()
        clone.b = self.b.copy()
        return clone

    def _proba(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.w + self.b
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(x @ self.w + self.b, axis=1)

    def accuracy(self, data: Dataset) -> float:
        return float(np.mean(self.predict(data.x) == data.y))

    def log_loss(self, x: np.ndarray, y: np.ndarray) -> float:
        p = self._proba(x)
        return float(-np.mean(np.log(p[np.arange(len(y)), y] + 1e-300)))

    def train_epoch(
        self,
        x: np.ndarray,
        y: np.ndarray,
        lr: float,
        batch_size: int,
        rng: np.random.Generator,
    ) -> float:
        """One shuffled pass of mini-batch SGD; returns the mean batch loss."""
        n = len(y)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb = x[idx], y[idx]
            p = self._proba(xb)
            total += -np.log(p[np.arange(len(yb)), yb] + 1e-300).sum()
            p[np.arange(len(yb)), yb] -= 1.0
            p /= len(yb)
            self.w -= lr * (xb.T @ p)
            self.b -= lr * p.sum(axis=0)
        return total / n


def average_models(
    models: list[SoftmaxRegressor], weights: list[float]
) -> SoftmaxRegressor:
    """Weighted parameter average; with one model this is an identity."""
    if not models or len(models) != len(weights):
        raise DomainError("need one positive weight per model")
    total = float(sum(weights))
    if total <= 0:
        raise DomainError("aggregation weights must sum to a positive value")
    out = SoftmaxRegressor(*models[0].w.shape)
    for model, weight in zip(models, weights):
        out.w += (weight / total) * model.w
        out.b += (weight / total) * model.b
    return out
