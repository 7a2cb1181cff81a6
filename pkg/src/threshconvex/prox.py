"""Euclidean projection onto the l1 ball and the prox of the l-infinity norm."""
import numpy as np

_PIVOT_SEED = 0x5EED


def project_l1_ball(v, radius=1.0, rng=None):
    """Project ``v`` onto ``{x : ||x||_1 <= radius}``.

    Randomized pivot/partition search for the soft-threshold level, expected
    linear time.  The pivot stream is seeded so results
    are reproducible.
    """
    v = np.asarray(v, dtype=float)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    u = np.abs(v).ravel()
    if u.sum() <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    rng = np.random.default_rng(_PIVOT_SEED) if rng is None else rng
    cand = u
    s = 0.0
    rho = 0
    while cand.size:
        pivot = cand[rng.integers(cand.size)]
        upper = cand[cand >= pivot]
        ds = upper.sum()
        drho = upper.size
        if (s + ds) - (rho + drho) * pivot < radius:
            s += ds
            rho += drho
            cand = cand[cand < pivot]
        else:
            # drop one copy of the pivot itself; ties stay in play
            cand = _drop_one(upper, pivot)
    theta = (s - radius) / rho
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def _drop_one(a, value):
    idx = np.flatnonzero(a == value)[0]
    return np.delete(a, idx)


def project_l1_ball_sort(v, radius=1.0):
    """Sort-based O(n log n) projection; reference implementation for tests."""
    v = np.asarray(v, dtype=float)
    u = np.abs(v)
    if u.sum() <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    mu = np.sort(u)[::-1]
    cs = np.cumsum(mu)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(mu * k - cs + radius > 0)[0][-1]
    theta = (cs[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(u - theta, 0.0)


def prox_linf(v, beta):
    """prox of ``beta * ||.||_inf`` via Moreau: ``v - P_{beta B1}(v)``."""
    v = np.asarray(v, dtype=float)
    if beta == 0:
        return v.copy()
    return v - project_l1_ball(v, beta)


def soft_threshold(x, thresh):
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)
