"""Turn convex solutions back into explicit threshold networks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .arrangements import ArrangementMatrix, ArrangementPattern
from .errors import RealizationError, ValidationError
from .model import Dataset, Layer, Subnetwork, ThresholdNetwork, forward, stack_layers, step
from .solvers import ConvexSolution

PINV_SHIFT = 0.5
SVM_C = 1e4
METHODS = ("witness", "pinv", "svm")


@dataclass(frozen=True)
class PatternRealization:
    pattern: ArrangementPattern
    weight: np.ndarray
    shift: float
    method: str

    def check(self, X):
        bits = step(X @ self.weight, self.shift).astype(np.uint8)
        bad = np.flatnonzero(bits != self.pattern.bits)
        if bad.size:
            raise RealizationError(
                f"{self.method} realization reproduces the pattern except at samples {bad.tolist()}",
                mismatched=bad.tolist(),
            )


def _X(data):
    return data.features if isinstance(data, Dataset) else np.asarray(data, dtype=float)


def _as_pattern(pattern):
    if isinstance(pattern, ArrangementPattern):
        return pattern
    return ArrangementPattern.from_bits(pattern)


def realize_witness(data, pattern) -> PatternRealization:
    pattern = _as_pattern(pattern)
    if pattern.witness is None:
        raise RealizationError("pattern carries no witness")
    real = PatternRealization(pattern, np.array(pattern.witness), 0.0, "witness")
    real.check(_X(data))
    return real


def realize_pinv(data, pattern) -> PatternRealization:
    """Least-squares fit ``X w ~ d`` read out with a 0.5 activation shift."""
    pattern = _as_pattern(pattern)
    X = _X(data)
    w, *_ = np.linalg.lstsq(X, pattern.bits.astype(float), rcond=None)
    real = PatternRealization(pattern, w, PINV_SHIFT, "pinv")
    real.check(X)
    return real


def realize_svm(data, pattern, max_epochs: int = 2000, seed: int = 0, C: float = SVM_C, tol: float = 1e-9) -> PatternRealization:
    """Soft-margin linear SVM through the origin, labels ``2 d - 1``.

    Dual coordinate descent on the box-constrained dual (seeded sweep order).
    Sign agreement is checked; the margin is as good as the solver's tolerance.
    """
    pattern = _as_pattern(pattern)
    X = _X(data)
    n, d = X.shape
    labels = 2.0 * pattern.bits - 1.0
    q = np.einsum("ij,ij->i", X, X)
    alpha = np.zeros(n)
    w = np.zeros(d)
    rng = np.random.default_rng(seed)
    for _ in range(max_epochs):
        worst = 0.0
        for i in rng.permutation(n):
            if q[i] == 0:
                continue
            g = labels[i] * (X[i] @ w) - 1.0
            # projected gradient for the box [0, C]
            pg = min(g, 0.0) if alpha[i] == 0 else (max(g, 0.0) if alpha[i] == C else g)
            worst = max(worst, abs(pg))
            if pg != 0.0:
                new = min(max(alpha[i] - g / q[i], 0.0), C)
                w += (new - alpha[i]) * labels[i] * X[i]
                alpha[i] = new
        # all projected gradients vanish at the dual optimum
        if worst <= tol:
            break
    real = PatternRealization(pattern, w, 0.0, "svm")
    try:
        real.check(X)
    except RealizationError as err:
        raise RealizationError(
            f"SVM does not reproduce the pattern (may not be linearly separable): {err}",
            mismatched=err.mismatched,
        ) from None
    return real


def realize(data, pattern, method: str, *, seed: int = 0, svm_epochs: int = 2000):
    if method == "witness":
        return realize_witness(data, pattern)
    if method == "pinv":
        return realize_pinv(data, pattern)
    if method == "svm":
        return realize_svm(data, pattern, max_epochs=svm_epochs, seed=seed)
    raise ValidationError(f"unknown realization method {method!r}; expected one of {METHODS}")


@dataclass(frozen=True)
class CaratheodoryDecomposition:
    scale: float
    atoms: np.ndarray  # k x n, binary
    gammas: np.ndarray

    def recombine(self) -> np.ndarray:
        if len(self.gammas) == 0:
            return np.zeros(self.atoms.shape[1])
        return self.scale * (self.gammas @ self.atoms)


def caratheodory_decompose(v) -> CaratheodoryDecomposition:
    """Write ``v >= 0`` as ``||v||_inf * sum_k gamma_k 1{v >= a_k}`` over its level sets."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if np.any(v < 0):
        raise ValidationError("caratheodory_decompose needs a nonnegative vector")
    levels = np.unique(v[v > 0])
    if levels.size == 0:
        return CaratheodoryDecomposition(0.0, np.zeros((0, v.size), dtype=np.uint8), np.zeros(0))
    scale = float(levels[-1])
    gaps = np.diff(levels, prepend=0.0)
    atoms = (v[None, :] >= levels[:, None]).astype(np.uint8)
    return CaratheodoryDecomposition(scale, atoms, gaps / scale)


def build_two_layer(data, sol: ConvexSolution, arr: ArrangementMatrix, method: str = "witness", *, seed: int = 0) -> ThresholdNetwork:
    """One neuron per nonzero Lasso coefficient: pattern d_j, amplitude 1, output w_j."""
    if sol.coefficients is None:
        raise ValidationError("build_two_layer needs a Lasso solution (coefficients)")
    if len(sol.coefficients) != arr.P:
        raise ValidationError(f"solution has {len(sol.coefficients)} coefficients but arrangement has {arr.P} patterns")
    X = _X(data)
    cols, shifts, outs = [], [], []
    for j in sol.support:
        real = realize(X, arr.patterns[j], method, seed=seed + j)
        cols.append(real.weight)
        shifts.append(real.shift)
        outs.append(sol.coefficients[j])
    if not cols:
        return ThresholdNetwork(X.shape[1], ())
    return ThresholdNetwork.two_layer(np.column_stack(cols), np.ones(len(cols)), outs, shifts)


def build_from_delta(
    data,
    sol: ConvexSolution,
    hidden: Sequence[Layer] | None = None,
    method: str = "pinv",
    *,
    seed: int = 0,
    atol: float = 1e-9,
) -> ThresholdNetwork:
    """Network whose training output is exactly ``delta`` (complete arrangements).

    ``hidden`` optionally supplies fixed layers producing the representation on
    which the atoms are realized (deep construction).
    """
    if sol.delta is None:
        raise ValidationError("build_from_delta needs a closed-form solution (delta)")
    X = _X(data)
    delta = np.asarray(sol.delta, dtype=float)
    if delta.shape[0] != X.shape[0]:
        raise ValidationError("delta length does not match the number of samples")
    hidden = tuple(hidden or ())
    R = stack_layers(hidden, X) if hidden else X
    parts = [caratheodory_decompose(np.maximum(delta, 0)), caratheodory_decompose(np.maximum(-delta, 0))]
    cols, shifts, outs, part_of = [], [], [], []
    failed = []
    for p, dec in enumerate(parts):
        for k, atom in enumerate(dec.atoms):
            try:
                real = realize(R, atom, method, seed=seed + len(cols))
            except RealizationError:
                failed.append("".join(map(str, atom)))
                continue
            cols.append(real.weight)
            shifts.append(real.shift)
            outs.append(dec.scale * dec.gammas[k])
            part_of.append(p)
    if failed:
        raise RealizationError(f"{len(failed)} atoms could not be realized: {failed}", atoms=failed)
    if not cols:
        return ThresholdNetwork(X.shape[1], ())
    part_of = np.array(part_of)
    for sign_pos in (1.0, -1.0):
        amps = np.where(part_of == 0, sign_pos, -sign_pos)
        last = Layer(np.column_stack(cols), amps, shifts)
        net = ThresholdNetwork(X.shape[1], (Subnetwork(hidden + (last,), outs),))
        if np.max(np.abs(forward(net, X) - delta)) <= atol * max(1.0, np.max(np.abs(delta))):
            if net.num_neurons > X.shape[0] + 2:
                raise RealizationError(f"construction used {net.num_neurons} neurons > n + 2")
            return net
    raise RealizationError("assembled network does not reproduce delta under either sign convention")
