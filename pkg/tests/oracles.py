"""Independent reference computations used by several test modules."""
import itertools

import numpy as np
from scipy.optimize import linprog


def closed_form_grid(y, beta, rounds=60, pts=41):
    """Minimize 1/2||delta - y||^2 + beta(max delta_+ + max(-delta)_+) by brute force.

    For fixed levels a = max delta_+ and b = max(-delta)_+, the best delta is
    clip(y, -b, a); the objective then splits into two convex 1-D functions,
    each minimized by a zooming grid.
    """
    y = np.asarray(y, dtype=float)

    def side(v):
        def g(a):
            return 0.5 * float(np.sum(np.maximum(v - a, 0.0) ** 2)) + beta * a

        lo, hi = 0.0, max(float(v.max(initial=0.0)), 0.0)
        for _ in range(rounds):
            grid = np.linspace(lo, hi, pts)
            vals = [g(a) for a in grid]
            k = int(np.argmin(vals))
            step = (hi - lo) / (pts - 1)
            lo, hi = max(0.0, grid[k] - step), grid[k] + step
        return grid[k]

    a = side(np.maximum(y, 0.0))
    b = side(np.maximum(-y, 0.0))
    return np.clip(y, -b, a)


def closed_form_subgradient(y, beta, starts=5, iters=20_000, seed=0):
    """Subgradient descent from several random starts; best iterate."""
    rng = np.random.default_rng(seed)
    y = np.asarray(y, dtype=float)

    def f(d):
        return 0.5 * float((d - y) @ (d - y)) + beta * (max(d.max(), 0.0) + max((-d).max(), 0.0))

    best, best_f = None, np.inf
    for _ in range(starts):
        d = y + rng.standard_normal(y.size)
        for k in range(1, iters + 1):
            g = d - y
            i, j = int(np.argmax(d)), int(np.argmax(-d))
            if d[i] > 0:
                g[i] += beta
            if -d[j] > 0:
                g[j] -= beta
            d = d - g / (k + 1)
            fd = f(d)
            if fd < best_f:
                best, best_f = d.copy(), fd
    return best, best_f


def lasso_brute_force(D, y, beta, max_support=3):
    """Global Lasso minimum over all supports up to ``max_support`` and sign patterns."""
    n, P = D.shape
    best_w, best_f = np.zeros(P), 0.5 * float(y @ y)
    for k in range(1, max_support + 1):
        for S in itertools.combinations(range(P), k):
            Ds = D[:, S]
            G = Ds.T @ Ds
            if np.linalg.matrix_rank(G) < k:
                continue
            for s in itertools.product((1.0, -1.0), repeat=k):
                ws = np.linalg.solve(G, Ds.T @ y - beta * np.array(s))
                if not np.all(np.sign(ws) == s):
                    continue
                w = np.zeros(P)
                w[list(S)] = ws
                r = D @ w - y
                f = 0.5 * float(r @ r) + beta * float(np.abs(w).sum())
                if f < best_f:
                    best_w, best_f = w, f
    return best_w, best_f


def min_l1_interpolation_lp(D, y):
    """min ||w||_1 s.t. D w = y as an LP in (u, v) >= 0 with w = u - v."""
    n, P = D.shape
    res = linprog(np.ones(2 * P), A_eq=np.hstack([D, -D]), b_eq=y, bounds=[(0, None)] * (2 * P), method="highs")
    assert res.status == 0
    return float(res.fun)


def hinge_lasso_lp(D, y, beta):
    """min sum max(0, 1 - y_i (D w)_i) + beta ||w||_1 as an LP."""
    n, P = D.shape
    # variables: u (P), v (P), xi (n)
    c = np.concatenate([beta * np.ones(2 * P), np.ones(n)])
    YD = y[:, None] * D
    A = np.hstack([-YD, YD, -np.eye(n)])
    b = -np.ones(n)
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(0, None)] * (2 * P + n), method="highs")
    assert res.status == 0
    return float(res.fun)


def svm_circle_margin(X, labels, m=200_000):
    """Best geometric margin over unit directions in 2-D."""
    th = np.linspace(0, 2 * np.pi, m, endpoint=False)
    G = np.vstack([np.cos(th), np.sin(th)])
    M = labels[:, None] * (X @ G)
    return float(M.min(axis=0).max())
