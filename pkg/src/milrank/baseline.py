"""Supervised linear hinge-loss baseline.

Trains a linear classifier on mean-pooled video features (video label
known, no temporal information) and scores segments with the sigmoid of
its margin, so it plugs into the same frame-level evaluation pipeline as
the ranking model.  The optimizer is plain full-batch subgradient descent
on

    c_reg * (1/k) sum_i max(0, 1 - y_i (w . x_i - b)) + 0.5 ||w||^2

with labels in {-1, +1}, which is deterministic from the zero start.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError, DimensionMismatchError, FormatError
from .features import DatasetManifest, FeatureMatrix, feature_format_for, l2_normalize_rows, \
    load_features, partition_segments
from .network import sigmoid
from .validation import check_feature_array


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    b: float
    c_reg: float

    def __post_init__(self):
        if not (np.isfinite(self.w).all() and np.isfinite(self.b)):
            raise ValueError("linear model parameters must be finite")


def video_feature(f: FeatureMatrix) -> np.ndarray:
    """Mean of all L2-normalized clip rows."""
    return l2_normalize_rows(f).data.mean(axis=0)


def hinge_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c_reg: float) -> float:
    margins = y * (X @ w - b)
    return c_reg * float(np.maximum(0.0, 1.0 - margins).mean()) + 0.5 * float(w @ w)


def fit_linear(X, y, c_reg: float = 1.0, epochs: int = 1000,
               learning_rate: float = 0.1) -> LinearModel:
    """Subgradient descent from w=0, b=0 over full-batch epochs.

    ``y`` may be 0/1 or -1/+1; it is mapped to -1/+1 internally.
    """
    X = check_feature_array(X, name="X")
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ValueError(f"y must have shape ({X.shape[0]},), got {y.shape}")
    signs = np.where(y > 0, 1.0, -1.0)
    if len(np.unique(signs)) < 2:
        raise DataError("training data contains a single class")
    if c_reg <= 0 or epochs < 1 or learning_rate <= 0:
        raise ValueError("c_reg, epochs, and learning_rate must be positive")

    k = X.shape[0]
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(epochs):
        margins = signs * (X @ w - b)
        active = margins < 1.0
        grad_w = w - (c_reg / k) * (signs[active] @ X[active])
        grad_b = (c_reg / k) * signs[active].sum()
        w = w - learning_rate * grad_w
        b = b - learning_rate * grad_b
    return LinearModel(w=w, b=float(b), c_reg=c_reg)


def train_linear(manifest: DatasetManifest, c_reg: float = 1.0, epochs: int = 1000,
                 seed: int = 0, learning_rate: float = 0.1) -> LinearModel:
    """Fit the baseline on a manifest's videos.

    ``seed`` is accepted for interface parity with the ranking trainer;
    the solver itself is deterministic and does not consume it.
    """
    rows = []
    labels = []
    for entry in manifest.entries:
        f = load_features(entry.feature_path, feature_format_for(entry.feature_path))
        rows.append(video_feature(f))
        labels.append(entry.label)
    return fit_linear(np.array(rows), np.array(labels), c_reg, epochs, learning_rate)


def score_linear(model: LinearModel, f: FeatureMatrix, m: int = 32) -> np.ndarray:
    """Per-segment scores sigmoid(w . segment - b) for the eval pipeline."""
    if f.dim != model.w.shape[0]:
        raise DimensionMismatchError(f"features have dim {f.dim}, model expects {model.w.shape[0]}")
    segments, _ = partition_segments(l2_normalize_rows(f), m)
    return sigmoid(segments @ model.w - model.b)


def save_linear(model: LinearModel, path) -> None:
    doc = {"w": model.w.tolist(), "b": model.b, "c_reg": model.c_reg}
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_linear(path) -> LinearModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return LinearModel(w=np.array(doc["w"], dtype=np.float64), b=float(doc["b"]),
                           c_reg=float(doc["c_reg"]))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(path, "document", f"invalid baseline checkpoint: {e}") from None
