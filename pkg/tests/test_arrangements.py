import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from threshconvex.arrangements import (
    ArrangementMatrix,
    ArrangementPattern,
    count_bound,
    deep_construct,
    enumerate_exact,
    is_complete,
    numerical_rank,
    pattern_generator,
    sample_arrangements,
)
from threshconvex.errors import BudgetExceededError, ValidationError
from threshconvex.model import Dataset, step

from conftest import EX1_X


def lp_realizable(X, bits):
    """Is there w with x_i.w >= 0 where bits=1 and x_i.w < 0 where bits=0?

    Strictness via scaling: x_i.w <= -1 on the zero side.
    """
    n, d = X.shape
    A = np.where(bits[:, None] == 1, -X, X)
    b = np.where(bits == 1, 0.0, -1.0)
    res = linprog(np.zeros(d), A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
    return res.status == 0


def lp_oracle(X):
    n = X.shape[0]
    found = set()
    for bits in itertools.product((0, 1), repeat=n):
        b = np.array(bits)
        if lp_realizable(X, b):
            found.add("".join(map(str, bits)))
    return found


def circle_oracle(X, m=100_000):
    """Dense angular sweep plus every sample normal, for d = 2."""
    th = np.linspace(0, 2 * np.pi, m, endpoint=False)
    G = np.vstack([np.cos(th), np.sin(th)])
    normals = np.vstack([-X[:, 1], X[:, 0]])
    G = np.hstack([G, normals, -normals, np.zeros((2, 1))])
    B = step(X @ G).T.astype(np.uint8)
    return {"".join(map(str, row)) for row in np.unique(B, axis=0)}


def assert_witnesses(arr, X):
    for p in arr.patterns:
        assert np.array_equal(step(X @ p.witness).astype(np.uint8), p.bits), str(p)


def test_three_point_set_first_layer():
    arr = enumerate_exact(EX1_X)
    assert arr.P == 6
    assert arr.bit_strings() == ["000", "001", "011", "100", "110", "111"]
    assert not is_complete(arr)
    assert_witnesses(arr, EX1_X)


def test_three_point_set_second_layer():
    arr2 = deep_construct(enumerate_exact(EX1_X), 2)
    assert arr2.P == 8 and arr2.layer == 2
    assert is_complete(arr2)


def test_deep_witnesses_act_on_generators():
    arr1 = enumerate_exact(EX1_X)
    arr2 = deep_construct(arr1, 2)
    for p in arr2.patterns:
        Z = pattern_generator(arr1, p)
        assert np.array_equal(step(Z @ p.witness).astype(np.uint8), p.bits)


def test_deep_monotone_in_width():
    arr1 = enumerate_exact(EX1_X)
    w1 = set(deep_construct(arr1, 1).bit_strings())
    w2 = set(deep_construct(arr1, 2).bit_strings())
    assert w1 <= w2


def test_single_halfline():
    assert enumerate_exact(np.array([[1.0]])).bit_strings() == ["0", "1"]


def test_zero_matrix_gives_all_ones():
    assert enumerate_exact(np.zeros((4, 3))).bit_strings() == ["1111"]


def test_accepts_dataset():
    arr = enumerate_exact(Dataset(EX1_X, np.zeros(3)))
    assert arr.P == 6


def test_gaussian_rank_two_matches_circle_oracle():
    X = np.random.default_rng(3).standard_normal((8, 2))
    arr = enumerate_exact(X)
    # bias-free data also gets the w = 0 pattern on top of the bound
    assert arr.P <= count_bound(8, 2) + 1
    assert set(arr.bit_strings()) == circle_oracle(X)
    assert_witnesses(arr, X)


def test_bias_augmented_gaussian_meets_bound_exactly():
    rng = np.random.default_rng(4)
    X = np.hstack([rng.standard_normal((8, 1)), np.ones((8, 1))])
    arr = enumerate_exact(X)
    assert arr.P == count_bound(8, 2) == 16


def test_bias_free_gaussian_exceeds_region_count_by_w_zero():
    # with n > d and no bias the points are not in an open halfspace, so the
    # all-ones pattern (w = 0) is not a region pattern
    X = np.random.default_rng(0).standard_normal((9, 3))
    arr = enumerate_exact(X)
    assert arr.P == count_bound(9, 3) + 1
    assert "1" * 9 in arr.bit_strings()


@pytest.mark.parametrize("seed", range(6))
def test_gaussian_matches_lp_oracle(seed):
    rng = np.random.default_rng(seed)
    n, d = 7, int(rng.integers(2, 4))
    X = rng.standard_normal((n, d))
    assert set(enumerate_exact(X).bit_strings()) == lp_oracle(X)


@pytest.mark.parametrize("seed", range(6))
def test_degenerate_integer_data_matches_lp_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    X = rng.integers(-1, 2, size=(6, 3)).astype(float)
    X[1] = X[0]  # duplicate row
    X[2] = 0.0  # zero row
    arr = enumerate_exact(X)
    # LP on w=0 degenerate case: all-ones is realizable (x.w = 0 >= 0)
    assert set(arr.bit_strings()) == lp_oracle(X)
    assert_witnesses(arr, X)


@pytest.mark.parametrize("seed", range(4))
def test_binary_matrices_match_lp_oracle(seed):
    X = np.random.default_rng(200 + seed).integers(0, 2, size=(6, 3)).astype(float)
    assert set(enumerate_exact(X).bit_strings()) == lp_oracle(X)


@given(st.integers(0, 2**32 - 1), st.integers(2, 10), st.integers(1, 4))
def test_witnesses_and_bound(seed, n, d):
    rng = np.random.default_rng(seed)
    X = np.hstack([rng.standard_normal((n, d - 1)), np.ones((n, 1))]) if d > 1 else np.ones((n, 1))
    arr = enumerate_exact(X)
    assert_witnesses(arr, X)
    assert arr.P <= count_bound(n, numerical_rank(X))


def test_enumerate_budget():
    X = np.random.default_rng(0).standard_normal((30, 6))
    with pytest.raises(BudgetExceededError):
        enumerate_exact(X, budget=1000)


def test_count_bound_values():
    assert count_bound(3, 2) == 6
    assert count_bound(8, 2) == 16
    for n in range(1, 12):
        assert count_bound(n, n) == 2**n
    for bad in [(3, 0), (3, 4), (0, 0)]:
        with pytest.raises(ValidationError):
            count_bound(*bad)


def test_sample_single_direction():
    X = np.random.default_rng(1).standard_normal((5, 3))
    arr = sample_arrangements(X, 1, seed=9)
    g = np.random.default_rng(9).standard_normal((3, 1))[:, 0]
    assert arr.P == 1
    assert np.array_equal(arr.patterns[0].bits, step(X @ g).astype(np.uint8))


def test_sample_deterministic_and_subset_of_exact():
    X = np.random.default_rng(2).standard_normal((7, 3))
    a = sample_arrangements(X, 200, seed=5)
    b = sample_arrangements(X, 200, seed=5)
    assert a.bit_strings() == b.bit_strings()
    assert all(np.array_equal(p.witness, q.witness) for p, q in zip(a.patterns, b.patterns))
    assert set(a.bit_strings()) <= set(enumerate_exact(X).bit_strings())
    assert_witnesses(a, X)


def test_sampling_approaches_exact():
    X = np.random.default_rng(5).standard_normal((5, 5))
    exact = enumerate_exact(X)
    sampled = sample_arrangements(X, 10_000, seed=0)
    assert sampled.P <= exact.P
    assert sampled.P >= 0.9 * exact.P


def test_deep_single_ones_column():
    prev = ArrangementMatrix((ArrangementPattern.from_bits([1, 1, 1, 1]),), 4)
    for bias in (True, False):
        assert deep_construct(prev, 1, bias=bias).bit_strings() == ["0000", "1111"]


def test_deep_bounded_by_per_subset_counts():
    X = np.hstack([np.random.default_rng(6).standard_normal((6, 1)), np.ones((6, 1))])
    arr1 = enumerate_exact(X)
    arr2 = deep_construct(arr1, 2)
    D = arr1.matrix
    total = 0
    for S in itertools.combinations(range(arr1.P), 2):
        Z = np.hstack([D[:, S], np.ones((6, 1))])
        total += count_bound(6, numerical_rank(Z))
    assert arr2.P <= total
    assert arr2.P <= 2**6


def test_deep_budget_and_sampling():
    arr1 = enumerate_exact(np.random.default_rng(7).standard_normal((6, 2)))
    with pytest.raises(BudgetExceededError):
        deep_construct(arr1, 3, budget=10)
    a = deep_construct(arr1, 3, sample_subsets=10, seed=1)
    b = deep_construct(arr1, 3, sample_subsets=10, seed=1)
    assert a.bit_strings() == b.bit_strings()
    with pytest.raises(ValidationError):
        deep_construct(arr1, arr1.P + 1)


def test_is_complete_small_and_guard():
    arr = ArrangementMatrix.from_patterns([ArrangementPattern.from_bits([1]), ArrangementPattern.from_bits([0])], 1)
    assert is_complete(arr)
    big = ArrangementMatrix((ArrangementPattern.from_bits(np.ones(31)),), 31)
    with pytest.raises(ValidationError):
        is_complete(big)


def test_matrix_invariants():
    p0 = ArrangementPattern.from_bits([0, 1])
    p1 = ArrangementPattern.from_bits([1, 0])
    with pytest.raises(ValidationError):
        ArrangementMatrix((p1, p0), 2)
    with pytest.raises(ValidationError):
        ArrangementMatrix((p0, p0), 2)
    arr = ArrangementMatrix.from_patterns([p1, p0, p1], 2)
    assert arr.bit_strings() == ["01", "10"]
    assert arr.matrix.tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_enumeration_deterministic():
    X = np.random.default_rng(8).standard_normal((9, 3))
    a, b = enumerate_exact(X), enumerate_exact(X)
    assert a.bit_strings() == b.bit_strings()
    assert np.array_equal(a.witness_matrix(), b.witness_matrix())
