import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from threshconvex.arrangements import enumerate_exact
from threshconvex.errors import InfeasibleError, UnsupportedLossError, ValidationError
from threshconvex.solvers import (
    ConvexSolution,
    LassoProblem,
    closed_form_objective,
    closed_form_solve,
    critical_width,
    full_design,
    kkt_check,
    lasso_solve,
    min_norm_interpolate,
)

from conftest import EX1_X
from oracles import (
    closed_form_grid,
    closed_form_subgradient,
    hinge_lasso_lp,
    lasso_brute_force,
    min_l1_interpolation_lp,
)


def test_soft_threshold_example():
    prob = LassoProblem(np.eye(2), [3.0, 1.0], 1.0)
    sol = lasso_solve(prob)
    assert np.allclose(sol.coefficients, [2.0, 0.0])
    assert sol.objective_value == pytest.approx(3.0)
    rep = kkt_check(prob, sol)
    assert rep.passed
    assert rep.support_slacks[0] == pytest.approx(0.0, abs=1e-12)
    assert critical_width(sol) == 1


def test_unregularized_square_solve():
    D = np.triu(np.ones((4, 4)))
    y = np.array([1.0, -2.0, 0.5, 3.0])
    sol = lasso_solve(LassoProblem(D, y, 0.0))
    assert np.allclose(sol.coefficients, np.linalg.solve(D, y), atol=1e-10)
    assert sol.objective_value == pytest.approx(0.0, abs=1e-18)


def test_three_point_set_against_brute_force():
    arr = enumerate_exact(EX1_X)
    y = np.array([0.0, 1.0, 1.0])
    prob = LassoProblem(arr, y, 0.01)
    sol = lasso_solve(prob)
    col = arr.bit_strings().index("011")
    assert col in sol.support
    _, best = lasso_brute_force(arr.matrix, y, 0.01, max_support=3)
    assert sol.objective_value == pytest.approx(best, abs=1e-8)
    assert critical_width(sol) == 1
    assert kkt_check(prob, sol).passed


@pytest.mark.parametrize("method", ["active-set", "cd"])
def test_random_instances_kkt_and_width(method):
    rng = np.random.default_rng(11)
    for _ in range(100 if method == "active-set" else 30):
        n = int(rng.integers(3, 8))
        X = np.hstack([rng.standard_normal((n, int(rng.integers(1, 3)))), np.ones((n, 1))])
        arr = enumerate_exact(X)
        y = rng.standard_normal(n)
        beta = float(rng.choice([1e-3, 1e-2, 0.1, 1.0]))
        prob = LassoProblem(arr, y, beta)
        sol = lasso_solve(prob, method=method)
        assert sol.converged
        assert kkt_check(prob, sol, 1e-6).passed
        assert critical_width(sol) <= n + 1


def test_cd_and_active_set_agree():
    rng = np.random.default_rng(12)
    for _ in range(20):
        D = (rng.random((6, 15)) < 0.5).astype(float)
        y = rng.standard_normal(6)
        prob = LassoProblem(D, y, 0.05)
        a = lasso_solve(prob)
        b = lasso_solve(prob, method="cd")
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_small_instances_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    D = (rng.random((3, 7)) < 0.5).astype(float)
    y = rng.standard_normal(3)
    beta = float(rng.uniform(0.01, 0.5))
    sol = lasso_solve(LassoProblem(D, y, beta))
    _, best = lasso_brute_force(D, y, beta, max_support=3)
    assert sol.objective_value == pytest.approx(best, abs=1e-9)


def test_zero_is_optimal_beyond_critical_beta():
    rng = np.random.default_rng(1)
    D = (rng.random((5, 9)) < 0.5).astype(float)
    y = rng.standard_normal(5)
    beta = float(np.max(np.abs(D.T @ y)))
    prob = LassoProblem(D, y, beta)
    sol = lasso_solve(prob)
    assert np.all(sol.coefficients == 0)
    assert kkt_check(prob, LassoProblem and ConvexSolution(0.5 * y @ y, beta, coefficients=np.zeros(9))).passed


def test_column_permutation_invariance():
    rng = np.random.default_rng(2)
    D = (rng.random((6, 12)) < 0.5).astype(float)
    y = rng.standard_normal(6)
    perm = rng.permutation(12)
    a = lasso_solve(LassoProblem(D, y, 0.03))
    b = lasso_solve(LassoProblem(D[:, perm], y, 0.03))
    assert a.objective_value == pytest.approx(b.objective_value, abs=1e-10)


def test_coordinate_descent_flags_non_convergence():
    rng = np.random.default_rng(3)
    D = (rng.random((8, 30)) < 0.5).astype(float)
    sol = lasso_solve(LassoProblem(D, rng.standard_normal(8), 1e-4), max_iter=1, method="cd")
    assert not sol.converged
    with pytest.raises(ValidationError):
        critical_width(sol)


def test_validation():
    with pytest.raises(ValidationError):
        LassoProblem(np.eye(2), [1.0, 2.0, 3.0], 0.1)
    with pytest.raises(ValidationError):
        LassoProblem(np.eye(2), [1.0, 2.0], -0.1)
    with pytest.raises(ValidationError):
        lasso_solve(LassoProblem(np.eye(2), [1.0, 2.0], 0.1), tol=0)
    with pytest.raises(ValidationError):
        lasso_solve(LassoProblem(np.eye(2), [1.0, 2.0], 0.1), method="lars")


def test_logistic_matches_smooth_reformulation():
    from scipy.optimize import minimize

    rng = np.random.default_rng(4)
    D = (rng.random((10, 12)) < 0.5).astype(float)
    y = np.where(rng.random(10) < 0.5, -1.0, 1.0)
    beta = 0.2
    prob = LassoProblem(D, y, beta, "logistic")
    sol = lasso_solve(prob)
    assert sol.converged
    assert kkt_check(prob, sol, 1e-6).passed

    def f(uv):
        w = uv[:12] - uv[12:]
        return np.logaddexp(0, -y * (D @ w)).sum() + beta * uv.sum()

    def g(uv):
        w = uv[:12] - uv[12:]
        z = -y * (D @ w)
        gw = D.T @ (-y * np.exp(z - np.logaddexp(0, z)))
        return np.concatenate([gw + beta, -gw + beta])

    ref = minimize(f, np.zeros(24), jac=g, bounds=[(0, None)] * 24, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    assert sol.objective_value <= ref.fun + 1e-7


def test_hinge_requires_opt_in_and_matches_lp():
    rng = np.random.default_rng(5)
    D = (rng.random((8, 10)) < 0.5).astype(float)
    y = np.where(rng.random(8) < 0.5, -1.0, 1.0)
    prob = LassoProblem(D, y, 0.1, "hinge")
    with pytest.raises(UnsupportedLossError):
        lasso_solve(prob)
    sol = lasso_solve(prob, hinge_solver=True, max_iter=50_000)
    ref = hinge_lasso_lp(D, y, 0.1)
    assert ref - 1e-9 <= sol.objective_value <= ref + 1e-3 * max(1.0, ref)
    with pytest.raises(UnsupportedLossError):
        kkt_check(prob, sol)


def test_closed_form_examples():
    assert np.array_equal(closed_form_solve(np.zeros(4), 1.0).delta, np.zeros(4))
    y = np.array([1.5, -2.0, 0.3])
    assert np.array_equal(closed_form_solve(y, 0.0).delta, y)
    sol = closed_form_solve([3.0, 2.0, -1.0], 1.0)
    assert np.allclose(sol.delta, [2.0, 2.0, 0.0])
    assert sol.objective_value == pytest.approx(3.0)
    assert sol.kkt_residual <= 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.floats(0.01, 3.0))
def test_closed_form_against_grid_oracle(seed, n, beta):
    y = np.random.default_rng(seed).standard_normal(n) * 2
    sol = closed_form_solve(y, beta)
    ref = closed_form_grid(y, beta)
    assert np.allclose(sol.delta, ref, atol=1e-6)
    assert sol.objective_value <= closed_form_objective(ref, y, beta) + 1e-10


def test_closed_form_against_subgradient_oracle():
    y = np.array([3.0, 2.0, -1.0])
    d, f = closed_form_subgradient(y, 1.0, starts=3, iters=5000)
    assert closed_form_solve(y, 1.0).objective_value <= f + 1e-12
    assert f - 3.0 < 1e-3


@pytest.mark.parametrize("n", [3, 5, 7])
def test_closed_form_equals_full_design_lasso(n):
    rng = np.random.default_rng(n)
    D = full_design(n)
    for _ in range(3):
        y = rng.standard_normal(n)
        for beta in (0.01, 0.1, 1.0):
            a = closed_form_solve(y, beta).objective_value
            b = lasso_solve(LassoProblem(D, y, beta)).objective_value
            assert abs(a - b) <= 1e-6 * max(1.0, abs(a))


def test_full_design_guard():
    assert full_design(2).tolist() == [[0, 0, 1, 1], [0, 1, 0, 1]]
    with pytest.raises(ValidationError):
        full_design(21)


def test_min_norm_single_column():
    arr = enumerate_exact(EX1_X)
    D = arr.matrix
    for j in range(arr.P):
        if not D[:, j].any():
            continue
        sol = min_norm_interpolate(arr, D[:, j])
        assert sol.objective_value == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(D @ sol.coefficients, D[:, j], atol=1e-6)


def test_min_norm_difference_and_lp_oracle():
    arr = enumerate_exact(EX1_X)
    D = arr.matrix
    for j in range(arr.P):
        for k in range(arr.P):
            if j == k:
                continue
            y = D[:, j] - D[:, k]
            sol = min_norm_interpolate(arr, y)
            assert sol.objective_value <= 2.0 + 1e-6
            assert sol.objective_value == pytest.approx(min_l1_interpolation_lp(D, y), abs=1e-6)


def test_min_norm_zero_and_errors():
    D = enumerate_exact(EX1_X).matrix
    sol = min_norm_interpolate(D, np.zeros(3))
    assert sol.objective_value == 0 and not sol.coefficients.any()
    with pytest.raises(InfeasibleError):
        min_norm_interpolate(np.array([[1.0], [1.0]]), [1.0, 0.0])
    with pytest.raises(ValidationError):
        min_norm_interpolate(D, [0.0, 1.0, 1.0], path_betas=[0.1, 0.2])
    with pytest.raises(ValidationError):
        min_norm_interpolate(D, [0.0, 1.0, 1.0], path_betas=[0.1, 0.01])


def test_critical_width_zero():
    assert critical_width(ConvexSolution(0.0, 1.0, coefficients=np.zeros(3), support=())) == 0
