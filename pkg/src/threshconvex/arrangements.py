"""Hyperplane arrangement patterns ``1{X w >= 0}`` of a data matrix.

Exact enumeration walks every ray of the central arrangement: each ray is the
normal (inside the row space) of ``r - 1`` linearly independent samples.  Cells
touching a ray are reached by nudging the normal towards every sign pattern of
the samples lying on it.  When more than ``r - 1`` samples lie on a ray the
local pattern set is itself an arrangement of lower rank, handled recursively.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BudgetExceededError, ValidationError
from .model import Dataset, step

RANK_RTOL = 1e-10
DEFAULT_BUDGET = 2_000_000
_INTEGRAL_LIMIT = 2**20


@dataclass(frozen=True)
class ArrangementPattern:
    packed: bytes
    n: int
    witness: np.ndarray = None
    source: tuple = None

    def __post_init__(self):
        if self.witness is not None:
            w = np.array(self.witness, dtype=float).reshape(-1)
            w.setflags(write=False)
            object.__setattr__(self, "witness", w)
        if self.source is not None:
            object.__setattr__(self, "source", tuple(int(i) for i in self.source))

    @classmethod
    def from_bits(cls, bits, witness=None, source=None) -> "ArrangementPattern":
        bits = np.asarray(bits).astype(bool).reshape(-1)
        return cls(np.packbits(bits).tobytes(), bits.shape[0], witness, source)

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.packed, dtype=np.uint8), count=self.n)

    def __str__(self):
        return "".join(map(str, self.bits))


@dataclass(frozen=True)
class ArrangementMatrix:
    patterns: tuple
    n: int
    layer: int = 1

    def __post_init__(self):
        pats = tuple(self.patterns)
        keys = [p.packed for p in pats]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate arrangement patterns")
        if keys != sorted(keys):
            raise ValidationError("arrangement patterns must be in lexicographic order")
        if any(p.n != self.n for p in pats):
            raise ValidationError("pattern length does not match n")
        object.__setattr__(self, "patterns", pats)

    @classmethod
    def from_patterns(cls, patterns, n, layer=1) -> "ArrangementMatrix":
        """Deduplicate (first occurrence wins) and sort lexicographically."""
        seen = {}
        for p in patterns:
            seen.setdefault(p.packed, p)
        return cls(tuple(seen[k] for k in sorted(seen)), n, layer)

    @property
    def P(self) -> int:
        return len(self.patterns)

    @property
    def matrix(self) -> np.ndarray:
        """The n x P design with patterns as columns."""
        if not self.patterns:
            return np.zeros((self.n, 0))
        return np.stack([p.bits for p in self.patterns], axis=1).astype(float)

    def bit_strings(self):
        return [str(p) for p in self.patterns]

    def witness_matrix(self) -> np.ndarray:
        """Witnesses as columns (requires every pattern to carry one of equal length)."""
        return np.stack([p.witness for p in self.patterns], axis=1)

    def __len__(self):
        return self.P


def count_bound(n: int, r: int) -> int:
    """Upper bound ``2 * sum_{k<r} C(n-1, k)`` on the number of patterns of a rank-r matrix."""
    if not (isinstance(n, (int, np.integer)) and isinstance(r, (int, np.integer))):
        raise ValidationError("n and r must be integers")
    if not 1 <= r <= n:
        raise ValidationError(f"need 1 <= r <= n, got n={n}, r={r}")
    return 2 * sum(math.comb(n - 1, k) for k in range(r))


def numerical_rank(X) -> int:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return 0
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > RANK_RTOL * sv[0]))


def _is_integral(X) -> bool:
    return bool(np.all(X == np.round(X)) and np.all(np.abs(X) <= _INTEGRAL_LIMIT))


def _unique_nonzero_rows(Z):
    Z = Z[np.any(Z != 0, axis=1)]
    if Z.shape[0] == 0:
        return Z
    return np.unique(Z, axis=0)


def _pivot_columns(Z, r):
    _, _, piv = scipy.linalg.qr(Z, pivoting=True, mode="economic")
    return np.sort(piv[:r])


def _cofactor_normals(A):
    """Normals to the rows of each (r-1) x r matrix in the batch ``A``."""
    ns, rm1, r = A.shape
    U = np.empty((ns, r))
    for j in range(r):
        minor = np.delete(A, j, axis=2)
        U[:, j] = (-1) ** j * (np.linalg.det(minor) if rm1 else 1.0)
    return U


def _robustness(Z, W):
    """Smallest normalized |margin| of each witness column (0 for w = 0)."""
    if W.shape[1] == 0:
        return np.zeros(0)
    V = np.abs(Z @ W)
    zn = np.linalg.norm(Z, axis=1)
    wn = np.linalg.norm(W, axis=0)
    keep = zn > 0
    if not keep.any():
        return np.zeros(W.shape[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = V[keep] / zn[keep, None] / wn[None, :]
    rel = np.where(wn[None, :] > 0, rel, 0.0)
    return rel.min(axis=0)


def _dedupe(Z, W):
    """One witness column per distinct pattern of ``Z``, preferring robust ones."""
    B = step(Z @ W).T  # K x k
    packed = np.packbits(B, axis=1)
    rob = _robustness(Z, W)
    _, inverse = np.unique(packed, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.lexsort((np.arange(W.shape[1]), -rob, inverse))
    first = order[np.r_[True, inverse[order][1:] != inverse[order][:-1]]]
    return W[:, np.sort(first)]


def _sign_vectors(k):
    if k == 0:
        return np.zeros((1, 0))
    return np.array(list(itertools.product((1.0, -1.0), repeat=k)))


def _cells(Z, integral, budget, memo):
    """Witness columns (in Z's coordinates) covering every pattern of ``Z``."""
    c = Z.shape[1]
    Zu = _unique_nonzero_rows(Z)
    key = (Zu.tobytes(), Zu.shape)
    if key in memo:
        return memo[key]
    zero = np.zeros((c, 1))
    r = numerical_rank(Zu)
    if r == 0:
        memo[key] = zero
        return zero
    piv = _pivot_columns(Zu, r) if r < c else np.arange(c)
    Zr = Zu[:, piv]
    k = Zr.shape[0]
    nsub = math.comb(k, r - 1)
    if nsub > budget:
        raise BudgetExceededError(
            f"exact enumeration needs {nsub} candidate subsets (budget {budget}); "
            "use sample_arrangements instead"
        )
    subsets = np.array(list(itertools.combinations(range(k), r - 1)), dtype=int).reshape(nsub, r - 1)
    A = Zr[subsets]  # nsub x (r-1) x r
    U = _cofactor_normals(A)
    if integral:
        U = np.round(U)
    unorm = np.linalg.norm(U, axis=1)
    valid = unorm > (0.5 if integral else 1e-12 * max(1.0, np.abs(Zr).max()) ** (r - 1))
    U, A, subsets = U[valid], A[valid], subsets[valid]
    if not integral:
        U = U / np.linalg.norm(U, axis=1, keepdims=True)
    vals = Zr @ U.T  # k x ns
    if integral:
        on = vals == 0
    else:
        on = np.abs(vals) <= 1e-9 * np.linalg.norm(Zr, axis=1)[:, None]
    general = on.sum(axis=0) == r - 1

    cands = []
    signs = _sign_vectors(r - 1)
    if general.any():
        Ag, Ug, vg, ong = A[general], U[general], vals[:, general], on[:, general]
        T = np.linalg.pinv(Ag) @ signs.T if r > 1 else np.zeros((Ag.shape[0], r, 1))
        cands.extend(_nudge(Zr, Ug, vg, ong, T))
    for j in np.flatnonzero(~general):
        onj = on[:, j]
        local = _cells(Zr[onj], integral, budget, memo)
        cands.extend(_nudge(Zr, U[j : j + 1], vals[:, j : j + 1], on[:, j : j + 1], local[None]))
    cands.append(np.zeros((r, 1)))
    W = _dedupe(Zr, np.hstack(cands))
    out = np.zeros((c, W.shape[1]))
    out[piv] = W
    memo[key] = out
    return out


def _nudge(Zr, U, vals, on, T):
    """Candidates ``sigma * u + eps * t`` for every normal u and local witness t.

    ``T`` has shape (ns, r, q): q local witnesses per normal.
    """
    out = []
    ZT = np.einsum("kr,srq->skq", Zr, T)  # ns x k x q
    off = ~on.T  # ns x k
    abs_vals = np.abs(vals.T)
    m_off = np.where(off, abs_vals, np.inf).min(axis=1)  # ns
    t_off = np.where(off[:, :, None], np.abs(ZT), 0.0).max(axis=1)  # ns x q
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = np.where(t_off > 0, 0.5 * m_off[:, None] / t_off, 1.0)
    eps = np.where(np.isfinite(eps), eps, 1.0)
    eps = np.maximum(eps, 1e-12)
    for sigma in (1.0, -1.0):
        Wc = sigma * U[:, :, None] + eps[:, None, :] * T  # ns x r x q
        out.append(Wc.transpose(1, 0, 2).reshape(U.shape[1], -1))
    return out


def _finalize(X, W, layer=1, source=None):
    """Deduplicate witness columns on X and build the sorted ArrangementMatrix."""
    n = X.shape[0]
    W = _dedupe(X, W)
    B = step(X @ W).T
    pats = [ArrangementPattern.from_bits(B[i], W[:, i], source) for i in range(W.shape[1])]
    return ArrangementMatrix.from_patterns(pats, n, layer)


def _as_matrix(data):
    X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _exact_witnesses(X, budget):
    d = X.shape[1]
    if not np.any(X != 0):
        return np.zeros((d, 1))
    return _cells(X, _is_integral(X), budget, {})


def enumerate_exact(data, budget: int = DEFAULT_BUDGET, layer: int = 1) -> ArrangementMatrix:
    """Every distinct pattern ``1{X w >= 0}`` with a verified witness w."""
    X = _as_matrix(data)
    return _finalize(X, _exact_witnesses(X, budget), layer)


def sample_arrangements(data, count: int, seed: int) -> ArrangementMatrix:
    """Patterns of ``count`` i.i.d. standard normal directions (first draw wins on ties)."""
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    X = _as_matrix(data)
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((X.shape[1], count))
    B = step(X @ G).T
    pats = [ArrangementPattern.from_bits(B[i], G[:, i]) for i in range(count)]
    return ArrangementMatrix.from_patterns(pats, X.shape[0])


def _augment(Z, bias):
    return np.hstack([Z, np.ones((Z.shape[0], 1))]) if bias else Z


def deep_construct(
    prev: ArrangementMatrix,
    width: int,
    budget: int = 100_000,
    *,
    bias: bool = True,
    sample_subsets: int | None = None,
    seed: int = 0,
    enum_budget: int = DEFAULT_BUDGET,
) -> ArrangementMatrix:
    """Next-layer arrangement: union of the patterns of every ``width``-column submatrix.

    With ``bias`` (the default) each submatrix gets a trailing ones column, so
    the next layer's neurons carry a bias like the first layer does.  Witnesses
    act on the augmented submatrix named by the pattern's ``source``.
    """
    if width < 1 or width > prev.P:
        raise ValidationError(f"width must be in [1, {prev.P}], got {width}")
    total = math.comb(prev.P, width)
    D = prev.matrix
    if sample_subsets is None:
        if total > budget:
            raise BudgetExceededError(
                f"{total} column subsets exceed budget {budget}; pass sample_subsets=k to "
                "sample subsets uniformly"
            )
        subsets = itertools.combinations(range(prev.P), width)
    else:
        rng = np.random.default_rng(seed)
        chosen = set()
        target = min(sample_subsets, total)
        while len(chosen) < target:
            chosen.add(tuple(sorted(rng.choice(prev.P, size=width, replace=False).tolist())))
        subsets = sorted(chosen)
    found = {}
    for S in subsets:
        Z = _augment(D[:, S], bias)
        W = _dedupe(Z, _exact_witnesses(Z, enum_budget))
        B = step(Z @ W).T
        for i in range(W.shape[1]):
            p = ArrangementPattern.from_bits(B[i], W[:, i], S)
            found.setdefault(p.packed, p)
    return ArrangementMatrix.from_patterns(found.values(), prev.n, prev.layer + 1)


def is_complete(arr: ArrangementMatrix) -> bool:
    if arr.n > 30:
        raise ValidationError(f"completeness check needs 2^n comparisons; n={arr.n} exceeds 30")
    return arr.P == 2**arr.n


def pattern_generator(prev: ArrangementMatrix, pattern: ArrangementPattern, bias=True):
    """The matrix a deep pattern's witness acts on."""
    if pattern.source is None:
        raise ValidationError("pattern has no source subset")
    return _augment(prev.matrix[:, list(pattern.source)], bias)
