"""Convex training problems over arrangement features.

* ``lasso_solve``: min_w L(D w, y) + beta ||w||_1 (squared, logistic, hinge)
* ``closed_form_solve``: min_delta 1/2||delta - y||^2
  + beta (max(delta)_+ + max(-delta)_+), used when the arrangement is complete
* ``min_norm_interpolate``: min ||w||_1 s.t. D w = y, via a warm-started path
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .arrangements import ArrangementMatrix
from .errors import InfeasibleError, UnsupportedLossError, ValidationError
from .model import LOSS_KINDS, loss_grad, loss_value
from .prox import project_l1_ball, prox_linf, soft_threshold

log = logging.getLogger(__name__)

SUPPORT_TOL = 1e-8


@dataclass(frozen=True)
class LassoProblem:
    design: object  # ArrangementMatrix or an n x P array
    targets: np.ndarray
    beta: float
    loss_kind: str = "squared"

    def __post_init__(self):
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        D = self.matrix_of(self.design)
        if D.shape[0] != y.shape[0]:
            raise ValidationError(f"design has {D.shape[0]} rows but targets have length {y.shape[0]}")
        if not self.beta >= 0:
            raise ValidationError(f"beta must be nonnegative, got {self.beta}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValidationError(f"unknown loss {self.loss_kind!r}")
        object.__setattr__(self, "targets", y)

    @staticmethod
    def matrix_of(design) -> np.ndarray:
        if isinstance(design, ArrangementMatrix):
            return design.matrix
        D = np.asarray(design, dtype=float)
        if D.ndim != 2:
            raise ValidationError("design must be a 2-D matrix")
        return D

    @property
    def D(self) -> np.ndarray:
        return self.matrix_of(self.design)

    def objective(self, w) -> float:
        return loss_value(self.D @ w, self.targets, self.loss_kind) + self.beta * float(np.abs(w).sum())


@dataclass(frozen=True)
class ConvexSolution:
    objective_value: float
    beta: float
    loss: str = "squared"
    coefficients: np.ndarray = None
    delta: np.ndarray = None
    support: tuple = ()
    kkt_residual: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def values(self) -> np.ndarray:
        return self.coefficients if self.coefficients is not None else self.delta

    @property
    def is_closed_form(self) -> bool:
        return self.delta is not None


def _support(v):
    return tuple(int(i) for i in np.flatnonzero(np.abs(v) > SUPPORT_TOL))


def _dual_residual(D, y, w, beta, loss_kind):
    z = -loss_grad(D @ w, y, loss_kind)
    return max(0.0, float(np.max(np.abs(D.T @ z), initial=0.0)) - beta)


def _solution(prob, w, iterations, converged):
    D = prob.D
    return ConvexSolution(
        objective_value=prob.objective(w),
        beta=prob.beta,
        loss=prob.loss_kind,
        coefficients=w,
        support=_support(w),
        kkt_residual=_dual_residual(D, prob.targets, w, prob.beta, prob.loss_kind)
        if prob.loss_kind != "hinge"
        else float("nan"),
        iterations=iterations,
        converged=converged,
    )


def lasso_solve(
    prob: LassoProblem,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    warm_start=None,
    *,
    hinge_solver: bool = False,
    polish: bool = True,
    method: str = "active-set",
) -> ConvexSolution:
    """Minimize ``L(D w, y) + beta ||w||_1``.

    Squared loss: ``method="active-set"`` (feature-sign search, exact up to
    rounding, falls back to coordinate descent if it stalls) or ``"cd"``
    (working-set cyclic coordinate descent, stops when no coefficient moves
    by ``tol`` in a sweep).  Logistic: FISTA.  Hinge (opt-in): FISTA on a smoothed
    hinge with continuation, objective error at most n * 5e-6.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if method not in ("active-set", "cd"):
        raise ValidationError(f"unknown method {method!r}; expected 'active-set' or 'cd'")
    D = prob.D
    w0 = np.zeros(D.shape[1]) if warm_start is None else np.array(warm_start, dtype=float)
    if prob.loss_kind == "squared" and method == "cd":
        w, it, ok = _coordinate_descent(D, prob.targets, prob.beta, w0, tol, max_iter)
    elif prob.loss_kind == "squared":
        w, it, ok = _feature_sign(D, prob.targets, prob.beta, w0, 20 * D.shape[0] + 200)
        if not ok:
            log.info("active-set solver stalled after %d steps; finishing with coordinate descent", it)
            w, it2, ok = _coordinate_descent(D, prob.targets, prob.beta, w, tol, max_iter)
            it += it2
    elif prob.loss_kind == "logistic":
        w, it, ok = _fista(D, prob.targets, prob.beta, w0, tol, max_iter, "logistic")
    else:
        if not hinge_solver:
            raise UnsupportedLossError("hinge loss needs hinge_solver=True (smoothed FISTA)")
        w, it, ok = _hinge(D, prob.targets, prob.beta, w0, tol, max_iter)
    if not ok:
        log.warning("lasso solver stopped after %d iterations without reaching tol=%g", it, tol)
    w = _reduce_support(D, w)
    if polish and ok and prob.loss_kind == "squared":
        w = _polish(prob, w)
    return _solution(prob, w, it, ok)


def _coordinate_descent(D, y, beta, w, tol, max_iter):
    """Cyclic coordinate descent with a growing working set.

    A coordinate outside the working set is zero with |d_j' r| <= beta, so a
    full cyclic sweep would leave it unchanged; termination therefore matches
    "no coordinate moves by more than tol in a full sweep".
    """
    n, P = D.shape
    norms = np.einsum("ij,ij->j", D, D)
    usable = norms > 0
    w = np.where(usable, w, 0.0)
    r = y - D @ w
    active = np.zeros(P, dtype=bool)
    sweeps = 0
    prev_obj = 0.5 * float(r @ r) + beta * float(np.abs(w).sum())
    while sweeps < max_iter:
        g = D.T @ r
        viol = (w == 0) & usable & (np.abs(g) > beta * (1 + 1e-12))
        if not viol.any() and sweeps > 0:
            return w, sweeps, True
        if viol.any():
            idx = np.flatnonzero(viol)
            take = max(10, int(active.sum()))
            idx = idx[np.argsort(-np.abs(g[idx]), kind="stable")[:take]]
            active[idx] = True
        active &= usable
        act = np.flatnonzero(active)
        Da = D[:, act]
        na = norms[act]
        while sweeps < max_iter:
            sweeps += 1
            max_change = 0.0
            for k, j in enumerate(act):
                old = w[j]
                col = Da[:, k]
                rho = col @ r + na[k] * old
                new = soft_threshold(rho, beta) / na[k]
                if new != old:
                    r -= col * (new - old)
                    w[j] = new
                    max_change = max(max_change, abs(new - old))
            obj = 0.5 * float(r @ r) + beta * float(np.abs(w).sum())
            assert obj <= prev_obj + 1e-9 * max(1.0, abs(prev_obj)), "coordinate descent increased the objective"
            prev_obj = obj
            if max_change < tol:
                break
        # refresh the residual to shed accumulated rounding
        r = y - D @ w
        active = w != 0
    return w, sweeps, False


def _feature_sign(D, y, beta, w, max_iter):
    """Active-set method with sign-fixed Newton steps (feature-sign search).

    Each step either solves the smooth problem on the current sign orthant
    and line-searches to it, or (when the active columns are dependent)
    slides along a null direction that lowers ||w||_1 without moving D w.
    Returns ``ok=False`` if it stalls, so the caller can fall back.
    """
    n, P = D.shape
    w = w.copy()
    slack = 1e-12 * max(1.0, beta)

    def f(v):
        r = y - D @ v
        return 0.5 * float(r @ r) + beta * float(np.abs(v).sum())

    for it in range(1, max_iter + 1):
        g = D.T @ (y - D @ w)
        A = np.flatnonzero(w)
        theta = np.sign(w)
        on_support = np.max(np.abs(g[A] - beta * theta[A]), initial=0.0) <= 1e-10 * max(1.0, beta)
        if on_support:
            free = np.abs(g)
            free[A] = 0.0
            j = int(np.argmax(free))
            if free[j] <= beta + slack:
                return w, it, True
            A = np.append(A, j)
            theta[j] = np.sign(g[j])
        Da = D[:, A]
        sv = np.linalg.svd(Da, compute_uv=False)
        if sv.size == 0 or sv[-1] <= 1e-10 * sv[0] or A.size > n:
            w = _null_step(D, w, A, theta)
            continue
        wa = w[A]
        target = np.linalg.solve(Da.T @ Da, Da.T @ y - beta * theta[A])
        step = target - wa
        # candidate stops: the Newton point and every zero crossing on the way
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = -wa / step
        ts = np.unique(np.append(cross[(cross > 0) & (cross < 1)], 1.0))
        f0 = f(w)
        best_t, best_f = None, f0
        for t in ts:
            cand = w.copy()
            cand[A] = wa + t * step
            fc = f(cand)
            if fc < best_f:
                best_t, best_f = t, fc
        if best_t is None:
            return w, it, False
        new = wa + best_t * step
        hit = np.isclose(best_t, cross)
        new[hit] = 0.0
        new[np.abs(new) <= 1e-15 * max(1.0, np.max(np.abs(new)))] = 0.0
        w[A] = new
    return w, max_iter, False


def _null_step(D, w, A, theta):
    """Slide along a null direction of D[:, A] until a coefficient hits zero."""
    _, _, Vt = np.linalg.svd(D[:, A], full_matrices=True)
    v = Vt[-1]
    wa = w[A].copy()
    slope = float(theta[A] @ v)
    if slope > 0:
        v = -v
    # a freshly added coordinate sits at zero; it may only move in its sign direction
    fresh = wa == 0
    wa_eff = np.where(fresh, 0.0, wa)
    with np.errstate(divide="ignore", invalid="ignore"):
        hit = -wa_eff / v
    hit = np.where((hit > 0) & ~fresh, hit, np.inf)
    k = int(np.argmin(hit))
    if not np.isfinite(hit[k]):
        v = -v
        with np.errstate(divide="ignore", invalid="ignore"):
            hit = -wa_eff / v
        hit = np.where((hit > 0) & ~fresh, hit, np.inf)
        k = int(np.argmin(hit))
    out = w.copy()
    if np.isfinite(hit[k]):
        wa = wa + hit[k] * v
        wa[k] = 0.0
        wa[fresh & (np.sign(wa) != theta[A])] = 0.0
        out[A] = wa
    return out


def _stationarity(g, x, beta):
    """Largest violation of the l1 optimality conditions at x, given the loss gradient g."""
    on = x != 0
    v_on = np.abs(g[on] + beta * np.sign(x[on]))
    v_off = np.maximum(np.abs(g[~on]) - beta, 0.0)
    return max(float(np.max(v_on, initial=0.0)), float(np.max(v_off, initial=0.0)))


def _fista(D, y, beta, w, tol, max_iter, kind, stat_tol=1e-9, smooth=None):
    """FISTA with backtracking and objective restart.

    Stops when the iterate moves less than ``tol`` or the l1 optimality
    conditions hold to ``stat_tol``.  ``smooth`` replaces the loss by a
    (value, gradient) pair, used for the smoothed hinge.
    """
    if smooth is None:
        def f(v):
            return loss_value(D @ v, y, kind)

        def grad(v):
            return D.T @ loss_grad(D @ v, y, kind)
    else:
        f, grad = smooth

    L = 1.0
    x = w.copy()
    z = w.copy()
    t = 1.0
    obj = f(x) + beta * np.abs(x).sum()
    for it in range(1, max_iter + 1):
        fz = f(z)
        gz = grad(z)
        while True:
            cand = soft_threshold(z - gz / L, beta / L)
            diff = cand - z
            if f(cand) <= fz + gz @ diff + 0.5 * L * (diff @ diff) + 1e-15 * abs(fz):
                break
            L *= 2.0
        cand_obj = f(cand) + beta * np.abs(cand).sum()
        if cand_obj > obj:
            if t == 1.0:
                # a plain prox-gradient step from x cannot decrease f: x is
                # optimal to within the rounding of the objective
                return x, it, True
            # momentum overshoot: restart from the last accepted point
            t = 1.0
            z = x.copy()
            continue
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        change = np.max(np.abs(cand - x), initial=0.0)
        z = cand + ((t - 1) / t_next) * (cand - x)
        x, t, obj = cand, t_next, cand_obj
        if change < tol or (it % 10 == 0 and _stationarity(grad(x), x, beta) <= stat_tol * max(1.0, beta)):
            return x, it, True
    return x, max_iter, False


HINGE_SMOOTHING = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


def _smoothed_hinge(D, y, mu):
    """Huber-smoothed hinge; differs from the hinge by at most mu/2 per sample."""

    def parts(v):
        m = 1.0 - y * (D @ v)
        quad = (m > 0) & (m < mu)
        lin = m >= mu
        val = float(np.sum(m[quad] ** 2) / (2 * mu) + np.sum(m[lin] - mu / 2))
        dm = np.where(lin, 1.0, np.where(quad, m / mu, 0.0))
        return val, D.T @ (-y * dm)

    return (lambda v: parts(v)[0]), (lambda v: parts(v)[1])


def _hinge(D, y, beta, w, tol, max_iter):
    """Smoothing continuation: FISTA on ever sharper smoothed hinges, warm-started.

    The final smoothing 1e-5 bounds the objective error by n * 5e-6.
    """
    total = 0
    ok = True
    for mu in HINGE_SMOOTHING:
        w, it, ok = _fista(D, y, beta, w, tol, max_iter, "hinge", smooth=_smoothed_hinge(D, y, mu))
        total += it
    return w, total, ok


def _reduce_support(D, w):
    """Move along null directions of the active columns until they are independent.

    D w and ||w||_1 are unchanged at an optimum (the l1 slope along a null
    direction must be zero there), so the objective never increases.
    """
    w = w.copy()
    while True:
        S = np.flatnonzero(np.abs(w) > SUPPORT_TOL)
        w[np.abs(w) <= SUPPORT_TOL] = 0.0
        if S.size == 0:
            return w
        Ds = D[:, S]
        _, sv, Vt = np.linalg.svd(Ds, full_matrices=True)
        rank = int(np.sum(sv > 1e-10 * sv[0])) if sv.size else 0
        if rank == S.size:
            return w
        v = Vt[-1]
        slope = float(np.sign(w[S]) @ v)
        if slope > 0:
            v = -v
        ws = w[S]
        with np.errstate(divide="ignore"):
            hit = -ws / v
        hit = np.where(hit > 0, hit, np.inf)
        k = int(np.argmin(hit))
        if not np.isfinite(hit[k]):
            v = -v
            hit = np.where(-ws / v > 0, -ws / v, np.inf)
            k = int(np.argmin(hit))
        ws = ws + hit[k] * v
        ws[k] = 0.0
        w[S] = ws


def _polish(prob, w):
    """Solve the sign-fixed restricted problem exactly; keep it only if it is better."""
    S = np.flatnonzero(w != 0)
    if S.size == 0:
        return w
    D, y = prob.D, prob.targets
    Ds = D[:, S]
    s = np.sign(w[S])
    try:
        ws = np.linalg.solve(Ds.T @ Ds, Ds.T @ y - prob.beta * s)
    except np.linalg.LinAlgError:
        return w
    if not np.all(np.sign(ws) == s):
        return w
    cand = np.zeros_like(w)
    cand[S] = ws
    old_res = _dual_residual(D, y, w, prob.beta, "squared")
    new_res = _dual_residual(D, y, cand, prob.beta, "squared")
    if prob.objective(cand) <= prob.objective(w) + 1e-12 and new_res <= max(old_res, 1e-12):
        return cand
    return w


def closed_form_objective(delta, y, beta) -> float:
    delta = np.asarray(delta, dtype=float)
    r = delta - np.asarray(y, dtype=float)
    pos = max(float(np.max(delta, initial=0.0)), 0.0)
    neg = max(float(np.max(-delta, initial=0.0)), 0.0)
    return 0.5 * float(r @ r) + beta * (pos + neg)


def closed_form_solve(y, beta: float) -> ConvexSolution:
    """Exact minimizer for complete arrangements: one l_inf prox per sign part."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if beta < 0:
        raise ValidationError("beta must be nonnegative")
    y_pos = np.maximum(y, 0.0)
    y_neg = np.maximum(-y, 0.0)
    d_pos = np.maximum(prox_linf(y_pos, beta), 0.0)
    d_neg = np.maximum(prox_linf(y_neg, beta), 0.0)
    delta = d_pos - d_neg
    z = y - delta
    # dual feasibility over {0,1}^n: sum(z_+) <= beta and sum(z_-) <= beta
    resid = max(0.0, np.maximum(z, 0).sum() - beta, np.maximum(-z, 0).sum() - beta)
    return ConvexSolution(
        objective_value=closed_form_objective(delta, y, beta),
        beta=float(beta),
        loss="squared",
        delta=delta,
        support=_support(delta),
        kkt_residual=float(resid),
        iterations=0,
        converged=True,
    )


@dataclass
class KKTReport:
    passed: bool
    max_violation: float
    support_slacks: dict = field(default_factory=dict)
    slacks: np.ndarray = None
    tol: float = 1e-6

    def __str__(self):
        worst = max(self.support_slacks.values(), default=0.0)
        status = "PASS" if self.passed else "FAIL"
        return f"KKT {status}: dual violation {self.max_violation:.3e}, worst support slack {worst:.3e}"


def kkt_check(prob: LassoProblem, sol: ConvexSolution, tol: float = 1e-6) -> KKTReport:
    """Dual certificate: |d_i' z| <= beta for all i, = beta sign(w_i) on the support."""
    if prob.loss_kind == "hinge":
        raise UnsupportedLossError("KKT certificate is implemented for squared and logistic losses")
    D, y, beta = prob.D, prob.targets, prob.beta
    w = sol.coefficients
    z = -loss_grad(D @ w, y, prob.loss_kind)
    corr = D.T @ z
    slacks = np.abs(corr) - beta
    max_violation = float(np.max(slacks, initial=-beta))
    support = {int(i): float(abs(corr[i] - beta * np.sign(w[i]))) for i in np.flatnonzero(w != 0)}
    passed = max_violation <= tol * max(1.0, beta) and all(v <= tol for v in support.values())
    return KKTReport(passed, max_violation, support, slacks, tol)


def min_norm_interpolate(design, y, path_betas=None, tol: float = 1e-12, max_iter: int = 200_000) -> ConvexSolution:
    """Minimum l1-norm interpolant, the gauge of y w.r.t. conv{+-d_j}."""
    D = LassoProblem.matrix_of(design)
    y = np.asarray(y, dtype=float).reshape(-1)
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0:
        return ConvexSolution(0.0, 0.0, "squared", np.zeros(D.shape[1]), None, (), 0.0, 0, True)
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    resid = float(np.linalg.norm(D @ coef - y))
    if resid >= 1e-8 * max(1.0, ynorm):
        raise InfeasibleError(f"y is not in the range of the design (least-squares residual {resid:.3e})", resid)
    if path_betas is None:
        top = float(np.max(np.abs(D.T @ y)))
        path_betas = np.geomspace(top, 1e-9 * ynorm, 25)
    path_betas = np.asarray(path_betas, dtype=float)
    if np.any(np.diff(path_betas) >= 0) or np.any(path_betas <= 0):
        raise ValidationError("path_betas must be positive and strictly decreasing")
    if path_betas[-1] >= 1e-8 * ynorm:
        raise ValidationError("path_betas must end below 1e-8 * ||y||")
    w = np.zeros(D.shape[1])
    total = 0
    ok = True
    for beta in path_betas:
        sol = lasso_solve(LassoProblem(D, y, float(beta)), tol=tol, max_iter=max_iter, warm_start=w)
        w = sol.coefficients
        total += sol.iterations
        ok = sol.converged
    gauge = float(np.abs(w).sum())
    return ConvexSolution(
        objective_value=gauge,
        beta=float(path_betas[-1]),
        loss="squared",
        coefficients=w,
        support=_support(w),
        kkt_residual=sol.kkt_residual,
        iterations=total,
        converged=ok,
    )


def critical_width(sol: ConvexSolution) -> int:
    if not sol.converged:
        raise ValidationError("critical width is only defined for a converged solution")
    return len(sol.support)


def full_design(n: int) -> np.ndarray:
    """All 2^n binary patterns as columns (lexicographic)."""
    if n > 20:
        raise ValidationError("full design is exponential in n; refusing n > 20")
    idx = np.arange(2**n)
    return ((idx[None, :] >> np.arange(n - 1, -1, -1)[:, None]) & 1).astype(float)


__all__ = [
    "LassoProblem",
    "ConvexSolution",
    "KKTReport",
    "lasso_solve",
    "closed_form_solve",
    "closed_form_objective",
    "kkt_check",
    "min_norm_interpolate",
    "critical_width",
    "full_design",
    "project_l1_ball",
]
