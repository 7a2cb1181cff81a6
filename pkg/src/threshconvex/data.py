"""Dataset ingestion, synthetic generators and the random threshold representation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import Dataset, Layer, ThresholdNetwork, forward, step

SYNTHETIC_KINDS = ("two_layer_gt", "three_layer_gt", "one_d")
GT_WIDTH = 20
ONE_D_POINTS = (-2.0, -1.0, 0.0, 1.0, 2.0)


def toy_csv_path() -> Path:
    return Path(str(resources.files("threshconvex") / "data" / "toy.csv"))


def _read_numeric_csv(path, label_column=None):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValidationError(f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col!r}") from None
            rows.append(vals)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    table = np.array(rows)
    if label_column is None:
        return table, None, header
    if label_column not in header:
        raise ValidationError(f"{path}: label column {label_column!r} not found (columns: {header})")
    j = header.index(label_column)
    return np.delete(table, j, axis=1), table[:, j], [h for h in header if h != label_column]


def _signed_labels(y):
    values = np.unique(y)
    if values.size == 2:
        return np.where(y == values[1], 1.0, -1.0)
    return y


def read_csv_dataset(path, label_column=None, bias=False) -> Dataset:
    """Whole file as one Dataset, no shuffling or scaling (CLI input)."""
    X, y, _ = _read_numeric_csv(path, label_column)
    if X.shape[1] == 0:
        raise ValidationError(f"{path}: no feature columns")
    data = Dataset(X, np.zeros(X.shape[0]) if y is None else _signed_labels(y))
    return data.with_bias() if bias else data


def split_sizes(n, split_ratio):
    if not 0 < split_ratio < 1:
        raise ValidationError(f"split ratio must lie in (0, 1), got {split_ratio}")
    n_train = int(round(split_ratio * n))
    return min(max(n_train, 1), n - 1) if n > 1 else 1


def load_csv(path, label_column, split_ratio=0.8, seed=0):
    """Seeded shuffle, train/test split, train-statistics standardization, bias column.

    Binary labels are mapped to -1/+1 (smaller value -> -1).
    """
    X, y, _ = _read_numeric_csv(path, label_column)
    if X.shape[1] == 0:
        raise ValidationError(f"{path}: no feature columns")
    if X.shape[0] < 2:
        raise ValidationError(f"{path}: need at least two rows to split")
    y = _signed_labels(y)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(X.shape[0])
    n_train = split_sizes(X.shape[0], split_ratio)
    tr, te = perm[:n_train], perm[n_train:]
    mu = X[tr].mean(axis=0)
    sd = X[tr].std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    train = Dataset((X[tr] - mu) / sd, y[tr]).with_bias()
    test = Dataset((X[te] - mu) / sd, y[te]).with_bias()
    return train, test


def _sgn(v):
    return np.where(v >= 0, 1.0, -1.0)


def gen_synthetic(kind: str, n: int = 20, d: int = 5, seed: int = 0, bias: bool = False) -> Dataset:
    """Ground-truth generators.

    ``two_layer_gt``: y = sgn(tanh(X W1) w2), 20 hidden units.
    ``three_layer_gt``: y = sgn(tanh(tanh(X W1) W2) w3), 20 + 20 hidden units.
    ``one_d``: X = (-2, -1, 0, 1, 2) with a bias column, labels from a random
    two-neuron threshold network; ``n`` and ``d`` are ignored.
    """
    rng = np.random.default_rng(seed)
    if kind == "one_d":
        X = np.column_stack([ONE_D_POINTS, np.ones(len(ONE_D_POINTS))])
        net = ThresholdNetwork.two_layer(rng.standard_normal((2, 2)), np.ones(2), rng.standard_normal(2))
        return Dataset(X, forward(net, X), has_bias=True)
    if kind not in SYNTHETIC_KINDS:
        raise ValidationError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    if n < 1 or d < 1:
        raise ValidationError("n and d must be positive")
    X = rng.standard_normal((n, d))
    if kind == "two_layer_gt":
        W1 = rng.standard_normal((d, GT_WIDTH))
        w2 = rng.standard_normal(GT_WIDTH)
        y = _sgn(np.tanh(X @ W1) @ w2)
    else:
        W1 = rng.standard_normal((d, GT_WIDTH))
        W2 = rng.standard_normal((GT_WIDTH, GT_WIDTH))
        w3 = rng.standard_normal(GT_WIDTH)
        y = _sgn(np.tanh(np.tanh(X @ W1) @ W2) @ w3)
    data = Dataset(X, y)
    return data.with_bias() if bias else data


@dataclass(frozen=True)
class RepresentationMap:
    """Fixed random threshold features ``[1{X H >= 0}, 1]``."""

    H: np.ndarray

    def apply(self, data):
        X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=float)
        feats = np.hstack([step(X @ self.H).astype(float), np.ones((X.shape[0], 1))])
        if isinstance(data, Dataset):
            return Dataset(feats, data.labels, has_bias=True)
        return feats

    def as_layer(self) -> Layer:
        # a zero weight column fires 1{0 >= 0} = 1 and supplies the bias feature
        W = np.hstack([self.H, np.zeros((self.H.shape[0], 1))])
        return Layer(W, np.ones(W.shape[1]))


def representation_transform(data: Dataset, M: int = 1000, seed: int = 0):
    """Returns ``(transformed dataset, RepresentationMap)``; reuse the map on test data."""
    if M < 1:
        raise ValidationError("M must be >= 1")
    rng = np.random.default_rng(seed)
    rep = RepresentationMap(rng.standard_normal((data.d, M)))
    return rep.apply(data), rep
