"""Straight-through-estimator (STE) baselines for threshold networks.

The forward pass always uses the exact threshold.  Only the backward pass
swaps the threshold's derivative for a surrogate's.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError
from .model import (
    Dataset,
    Layer,
    RegularizedObjective,
    Subnetwork,
    ThresholdNetwork,
    loss_grad,
    loss_value,
    objective,
)

SURROGATES = ("identity", "relu", "leaky_relu", "clipped_relu")
DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class SteConfig:
    surrogate: str = "identity"
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    beta: float = 1e-3
    seed: int = 0
    slope: float = 0.01
    cap: float = 1.0
    lr_factor: float = 0.5
    lr_patience: int = 10
    lr_threshold: float = 1e-4
    loss_kind: str = "squared"

    def __post_init__(self):
        if self.surrogate not in SURROGATES:
            raise ValidationError(f"unknown surrogate {self.surrogate!r}; expected one of {SURROGATES}")
        for name in ("learning_rate", "epochs", "batch_size", "slope", "cap", "lr_factor"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.beta < 0:
            raise ValidationError("beta must be nonnegative")
        if self.lr_patience < 0 or self.lr_threshold < 0:
            raise ValidationError("scheduler patience and threshold must be nonnegative")


@dataclass
class TrainTrace:
    objectives: list
    network: ThresholdNetwork
    seconds: float
    seed: int
    diverged: bool = False
    learning_rates: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def final_objective(self) -> float:
        return self.objectives[-1] if self.objectives else float("nan")


@dataclass
class MultiTrialResult:
    traces: list
    best_index: int

    @property
    def best(self) -> TrainTrace:
        return self.traces[self.best_index]


def surrogate_backward(surrogate: str, pre, slope: float = 0.01, cap: float = 1.0):
    x = np.asarray(pre, dtype=float)
    if surrogate == "identity":
        return np.ones_like(x)
    if surrogate == "relu":
        return (x > 0).astype(float)
    if surrogate == "leaky_relu":
        return np.where(x > 0, 1.0, slope)
    if surrogate == "clipped_relu":
        return ((x > 0) & (x < cap)).astype(float)
    raise ValidationError(f"unknown surrogate {surrogate!r}")


@dataclass
class _Params:
    weights: list
    amps: list
    out: np.ndarray

    def flat(self):
        return self.weights + self.amps + [self.out]


def _init(d, widths, rng):
    weights, amps = [], []
    fan_in = d
    for m in widths:
        weights.append(rng.standard_normal((fan_in, m)) / np.sqrt(fan_in))
        amps.append(np.ones(m))
        fan_in = m
    out = rng.standard_normal(fan_in) / np.sqrt(fan_in)
    return _Params(weights, amps, out)


def _forward(params, X, activation="threshold"):
    H = X
    cache = []
    for W, s in zip(params.weights, params.amps):
        pre = H @ W
        act = (pre >= 0).astype(float) if activation == "threshold" else pre
        cache.append((H, pre, act))
        H = s * act
    return H @ params.out, H, cache


def loss_and_grads(params, X, y, beta, cfg: SteConfig, activation="threshold", scale=1.0):
    """Loss (scaled by ``scale``) plus ``beta/2 ||theta||^2``, and surrogate gradients."""
    pred, H, cache = _forward(params, X, activation)
    g = scale * loss_grad(pred, y, cfg.loss_kind)
    loss = scale * loss_value(pred, y, cfg.loss_kind)
    reg = 0.5 * sum(float(np.sum(p**2)) for p in params.flat())
    d_out = H.T @ g + beta * params.out
    dH = np.outer(g, params.out)
    dW = [None] * len(params.weights)
    ds = [None] * len(params.amps)
    for l in range(len(params.weights) - 1, -1, -1):
        H_prev, pre, act = cache[l]
        s = params.amps[l]
        ds[l] = np.sum(dH * act, axis=0) + beta * s
        deriv = surrogate_backward(cfg.surrogate, pre, cfg.slope, cfg.cap) if activation == "threshold" else 1.0
        dpre = dH * s * deriv
        dW[l] = H_prev.T @ dpre + beta * params.weights[l]
        dH = dpre @ params.weights[l].T
    return loss + beta * reg, _Params(dW, ds, d_out)


def _to_network(params, d) -> ThresholdNetwork:
    layers = tuple(Layer(W.copy(), s.copy()) for W, s in zip(params.weights, params.amps))
    return ThresholdNetwork(d, (Subnetwork(layers, params.out.copy()),))


def ste_train(data: Dataset, widths, cfg: SteConfig) -> TrainTrace:
    widths = [int(m) for m in widths]
    if not widths or any(m < 1 for m in widths):
        raise ValidationError("widths must list at least one positive hidden-layer size")
    X, y = data.features, data.labels
    n, d = X.shape
    rng = np.random.default_rng(cfg.seed)
    params = _init(d, widths, rng)
    obj = RegularizedObjective(cfg.beta, cfg.loss_kind, "weight_decay")
    lr = cfg.learning_rate
    best = np.inf
    bad = 0
    objectives, lrs = [], []
    diverged = False
    bs = min(cfg.batch_size, n)
    start = time.perf_counter()
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for b in range(0, n, bs):
            idx = perm[b : b + bs]
            # gradient of (objective / n), estimated on the batch
            _, grads = loss_and_grads(params, X[idx], y[idx], cfg.beta * len(idx) / n, cfg, scale=1.0)
            k = 1.0 / len(idx)
            for p, gp in zip(params.flat(), grads.flat()):
                p -= lr * k * gp
        value = objective(_to_network(params, d), data, obj)
        objectives.append(value)
        lrs.append(lr)
        if not np.isfinite(value) or value > DIVERGENCE_LIMIT:
            diverged = True
            break
        # ReduceLROnPlateau, relative threshold mode
        if value < best * (1 - cfg.lr_threshold):
            best = value
            bad = 0
        else:
            bad += 1
            if bad > cfg.lr_patience:
                lr *= cfg.lr_factor
                bad = 0
    return TrainTrace(
        objectives=objectives,
        network=_to_network(params, d),
        seconds=time.perf_counter() - start,
        seed=cfg.seed,
        diverged=diverged,
        learning_rates=lrs,
        config=asdict(cfg),
    )


def multi_trial(data: Dataset, widths, cfg: SteConfig, trials: int) -> MultiTrialResult:
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    traces = []
    for i in range(trials):
        traces.append(ste_train(data, widths, _with_seed(cfg, cfg.seed + i)))
    finals = [t.final_objective if not t.diverged else np.inf for t in traces]
    return MultiTrialResult(traces, int(np.argmin(finals)))


def _with_seed(cfg, seed):
    values = asdict(cfg)
    values["seed"] = seed
    return SteConfig(**values)
