"""Domain types and pure evaluation routines for threshold networks.

A network is stored as a tuple of parallel subnetworks whose outputs are
summed.  A plain two-layer net is a single subnetwork with one hidden layer;
an L-layer parallel net has one subnetwork per last-layer neuron.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, ValidationError

LOSS_KINDS = ("squared", "logistic", "hinge")
OBJECTIVE_FORMS = ("weight_decay", "l1_canonical")


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def step(pre, shift=0.0):
    """Threshold predicate 1{pre - shift >= 0}; returns 1 at exactly zero."""
    return (np.asarray(pre) - shift) >= 0


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    has_bias: bool = False

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"features must be a non-empty n x d matrix, got shape {X.shape}")
        y = np.asarray(self.labels, dtype=float).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise ValidationError(f"labels length {y.shape[0]} != number of samples {X.shape[0]}")
        if self.has_bias and not np.all(X[:, -1] == 1.0):
            raise ValidationError("has_bias is set but the last column is not all ones")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def with_bias(self) -> "Dataset":
        if self.has_bias:
            return self
        X = np.hstack([self.features, np.ones((self.n, 1))])
        return Dataset(X, self.labels, has_bias=True)

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, labels, self.has_bias)


@dataclass(frozen=True)
class Layer:
    """One hidden layer: ``amplitudes * 1{inputs @ weights - shifts >= 0}``."""

    weights: np.ndarray
    amplitudes: np.ndarray
    shifts: np.ndarray = None

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        if W.ndim != 2:
            raise ValidationError(f"layer weights must be 2-D, got shape {W.shape}")
        m = W.shape[1]
        s = np.asarray(self.amplitudes, dtype=float).reshape(-1)
        t = np.zeros(m) if self.shifts is None else np.asarray(self.shifts, dtype=float).reshape(-1)
        if s.shape[0] != m or t.shape[0] != m:
            raise ValidationError(
                f"layer with {m} neurons has {s.shape[0]} amplitudes and {t.shape[0]} shifts"
            )
        object.__setattr__(self, "weights", _frozen(W))
        object.__setattr__(self, "amplitudes", _frozen(s))
        object.__setattr__(self, "shifts", _frozen(t))

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    def apply(self, H):
        pre = H @ self.weights
        return self.amplitudes * step(pre, self.shifts)


@dataclass(frozen=True)
class Subnetwork:
    layers: tuple
    output: np.ndarray

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValidationError("a subnetwork needs at least one hidden layer")
        for l in range(1, len(layers)):
            if layers[l].fan_in != layers[l - 1].width:
                raise DimensionError(
                    f"layer {l + 1} expects {layers[l].fan_in} inputs but layer {l} has "
                    f"{layers[l - 1].width} neurons",
                    layer=l + 1,
                )
        w = np.asarray(self.output, dtype=float).reshape(-1)
        if w.shape[0] != layers[-1].width:
            raise DimensionError(
                f"output weights have length {w.shape[0]}, last hidden layer has "
                f"{layers[-1].width} neurons",
                layer=len(layers) + 1,
            )
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "output", _frozen(w))

    @property
    def depth(self) -> int:
        return len(self.layers) + 1

    def hidden(self, X):
        """Last hidden representation (before the output weights)."""
        H = X
        for layer in self.layers:
            H = layer.apply(H)
        return H


@dataclass(frozen=True)
class ThresholdNetwork:
    input_dim: int
    subnetworks: tuple = field(default_factory=tuple)

    def __post_init__(self):
        subs = tuple(self.subnetworks)
        for k, sub in enumerate(subs):
            if sub.layers[0].fan_in != self.input_dim:
                raise DimensionError(
                    f"subnetwork {k}: first layer expects {sub.layers[0].fan_in} inputs, "
                    f"network input_dim is {self.input_dim}",
                    layer=1,
                )
        object.__setattr__(self, "subnetworks", subs)

    @classmethod
    def two_layer(cls, W, s, w, shifts=None) -> "ThresholdNetwork":
        W = np.asarray(W, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        if W.shape[1] == 0:
            return cls(W.shape[0], ())
        layer = Layer(W, s, shifts)
        return cls(W.shape[0], (Subnetwork((layer,), w),))

    @property
    def depth(self) -> int:
        return max((sub.depth for sub in self.subnetworks), default=2)

    @property
    def num_neurons(self) -> int:
        """Neurons in the last hidden layer, summed over subnetworks."""
        return sum(sub.layers[-1].width for sub in self.subnetworks)

    def is_canonical(self, atol=1e-12) -> bool:
        return all(
            np.all(np.abs(np.abs(sub.layers[-1].amplitudes) - 1.0) <= atol)
            for sub in self.subnetworks
        )


@dataclass(frozen=True)
class RegularizedObjective:
    beta: float
    loss_kind: str = "squared"
    form: str = "weight_decay"

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValidationError(f"beta must be nonnegative, got {self.beta}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValidationError(f"unknown loss {self.loss_kind!r}; expected one of {LOSS_KINDS}")
        if self.form not in OBJECTIVE_FORMS:
            raise ValidationError(f"unknown form {self.form!r}; expected one of {OBJECTIVE_FORMS}")


def _features(data):
    if isinstance(data, Dataset):
        return data.features
    X = np.asarray(data, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def forward(net: ThresholdNetwork, data) -> np.ndarray:
    X = _features(data)
    if X.shape[1] != net.input_dim:
        raise DimensionError(
            f"layer 1 expects {net.input_dim} input features, data has {X.shape[1]}", layer=1
        )
    out = np.zeros(X.shape[0])
    for sub in net.subnetworks:
        # elementwise product then row sum: keeps the reduction order fixed for a given width
        out = out + (sub.hidden(X) * sub.output).sum(axis=1)
    return out


def loss_value(pred, y, kind="squared") -> float:
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind == "squared":
        r = pred - y
        return 0.5 * float(r @ r)
    if kind == "logistic":
        return float(np.logaddexp(0.0, -y * pred).sum())
    if kind == "hinge":
        return float(np.maximum(0.0, 1.0 - y * pred).sum())
    raise ValidationError(f"unknown loss {kind!r}")


def loss_grad(pred, y, kind="squared") -> np.ndarray:
    """Gradient (a subgradient for hinge) of ``loss_value`` w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind == "squared":
        return pred - y
    if kind == "logistic":
        # d/du log(1 + exp(-y u)) = -y * sigmoid(-y u)
        z = -y * pred
        return -y * np.exp(z - np.logaddexp(0.0, z))
    if kind == "hinge":
        return np.where(y * pred < 1.0, -y, 0.0)
    raise ValidationError(f"unknown loss {kind!r}")


def weight_decay_penalty(net: ThresholdNetwork) -> float:
    """Half the squared norm of every weight, amplitude and output weight."""
    total = 0.0
    for sub in net.subnetworks:
        for layer in sub.layers:
            total += float(np.sum(layer.weights**2)) + float(np.sum(layer.amplitudes**2))
        total += float(np.sum(sub.output**2))
    return 0.5 * total


def l1_penalty(net: ThresholdNetwork) -> float:
    return float(sum(np.abs(sub.output).sum() for sub in net.subnetworks))


def objective(net: ThresholdNetwork, data: Dataset, obj: RegularizedObjective) -> float:
    loss = loss_value(forward(net, data), data.labels, obj.loss_kind)
    if obj.form == "weight_decay":
        return loss + obj.beta * weight_decay_penalty(net)
    if not net.is_canonical():
        raise ValidationError(
            "l1_canonical objective needs unit last-layer amplitudes; call canonicalize() first"
        )
    return loss + obj.beta * l1_penalty(net)


def canonicalize_report(net: ThresholdNetwork):
    """Rescale to unit last-layer amplitudes; returns ``(network, pruned)``.

    ``pruned`` lists ``(subnetwork, neuron)`` pairs dropped for having zero
    amplitude.
    """
    pruned = []
    subs = []
    for k, sub in enumerate(net.subnetworks):
        last = sub.layers[-1]
        s = last.amplitudes
        keep = s != 0
        pruned.extend((k, int(j)) for j in np.flatnonzero(~keep))
        if not keep.any():
            continue
        s_kept = s[keep]
        mag = np.abs(s_kept)
        new_last = Layer(last.weights[:, keep], s_kept / mag, last.shifts[keep])
        subs.append(Subnetwork(sub.layers[:-1] + (new_last,), sub.output[keep] * mag))
    return ThresholdNetwork(net.input_dim, tuple(subs)), pruned


def canonicalize(net: ThresholdNetwork) -> ThresholdNetwork:
    return canonicalize_report(net)[0]


def pair_penalties(net: ThresholdNetwork):
    """(l1 form, weight-decay form) of the last-layer amplitude/output pair terms."""
    l1 = 0.0
    wd = 0.0
    for sub in net.subnetworks:
        s = sub.layers[-1].amplitudes
        w = sub.output
        l1 += float(np.sum(np.abs(s) * np.abs(w)))
        wd += 0.5 * float(np.sum(s**2 + w**2))
    return l1, wd


def stack_layers(layers: Sequence[Layer], X) -> np.ndarray:
    H = _features(X)
    for layer in layers:
        H = layer.apply(H)
    return H
