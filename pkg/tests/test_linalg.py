import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probgt.field import PrimeField, matmul_mod
from probgt.linalg import nullspace, rank, rref

import oracles


@pytest.mark.parametrize("p", [7, 257, 2147483647, 2**61 - 1])
def test_rref_matches_textbook(p, rng):
    F = PrimeField(p)
    a = F.random_array(rng, (9, 14))
    a[4] = (2 * a[1] + 3 * a[2]) % p
    a[:, 6] = 0
    got, piv = rref(a, F, panel=4)
    want, want_piv = oracles.rref(a, p)
    assert piv == want_piv
    assert [[int(v) for v in row] for row in got] == want


def test_rank_deficient_wide_matrix():
    F = PrimeField(257)
    a = np.array([[1, 2, 3, 4], [2, 4, 6, 8], [0, 0, 0, 0]])
    assert rank(a, F) == 1


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([3, 5, 257, 65537, 2147483647]),
    st.integers(1, 12),
    st.integers(1, 20),
    st.integers(0, 2**32 - 1),
    st.floats(0.05, 1.0),
)
def test_nullspace_is_systematic_and_annihilates(p, rows, cols, seed, density):
    F = PrimeField(p)
    rng = np.random.default_rng(seed)
    a = F.random_array(rng, (rows, cols)) * (rng.random((rows, cols)) < density)
    basis, free = nullspace(a, F)
    assert basis.shape == (cols - oracles.rank(a, p), cols)
    assert np.array_equal(basis[:, free], np.eye(len(free), dtype=np.int64))
    if basis.shape[0]:
        assert not np.any(matmul_mod(a, basis.T, p))
        assert oracles.same_span(basis, oracles.nullspace(a, p), p)


def test_column_order_prefers_early_pivots():
    F = PrimeField(7)
    a = np.array([[1, 1, 1]])
    basis, free = nullspace(a, F, column_order=[2, 0, 1])
    # column 2 is offered first, so it becomes the pivot
    assert list(free) == [0, 1]
    assert basis.tolist() == [[1, 0, 6], [0, 1, 6]]
