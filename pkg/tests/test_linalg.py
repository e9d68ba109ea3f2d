import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zkl.errors import RejectedInputError
from zkl.linalg import (
    frobenius_norm,
    is_symmetric,
    matmul,
    power_iteration_norm,
    singular_values,
    spectral_norm,
    symmetric_eigenvalues,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def matrices(max_side=6):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


def test_matmul_examples():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(np.eye(2), M), M)
    assert np.array_equal(matmul(M, [[0.0], [1.0]]), [[2.0], [4.0]])
    assert np.array_equal(matmul(np.zeros((2, 2)), M), np.zeros((2, 2)))


def test_matmul_dimension_mismatch():
    with pytest.raises(RejectedInputError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_non_finite_rejected():
    with pytest.raises(RejectedInputError):
        matmul([[np.nan]], [[1.0]])


def test_frobenius_examples():
    assert frobenius_norm(np.zeros((3, 3))) == 0.0
    assert frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert frobenius_norm([[3.0, 4.0]]) == 5.0


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-14)
    assert spectral_norm(np.diag([2.0, -5.0])) == pytest.approx(5.0, abs=1e-14)
    # M^T M = [[1, -1], [-1, 1]] has eigenvalues {0, 2}
    assert spectral_norm([[0.0, 0.0], [-1.0, 1.0]]) == pytest.approx(math.sqrt(2.0), abs=1e-12)
    # M^T M = [[2, -1], [-1, 1]] has largest eigenvalue (3 + sqrt 5) / 2
    assert spectral_norm([[1.0, 0.0], [-1.0, 1.0]]) == pytest.approx(1.618033988749895, abs=1e-12)


def test_singular_value_examples():
    assert np.allclose(singular_values(np.diag([1.0, 3.0])), [1.0, 3.0])
    assert np.array_equal(singular_values(np.zeros((2, 2))), [0.0, 0.0])
    assert np.allclose(singular_values([[0.0, 1.0], [0.0, 0.0]]), [0.0, 1.0])
    assert singular_values(np.ones((2, 5))).shape == (2,)


def test_symmetric_eigenvalue_examples():
    assert np.allclose(symmetric_eigenvalues(np.diag([2.0, 2.0])), [2.0, 2.0])
    assert np.allclose(symmetric_eigenvalues([[0.0, 1.0], [1.0, 0.0]]), [-1.0, 1.0])
    assert np.allclose(symmetric_eigenvalues(np.eye(7)), np.ones(7))


def test_symmetric_eigenvalues_reject_nonsymmetric():
    with pytest.raises(RejectedInputError):
        symmetric_eigenvalues([[0.0, 1.0], [0.0, 0.0]])


def test_symmetry_tolerance_is_relative():
    big = np.array([[1e6, 1.0], [1.0 + 1e-6, 1e6]])
    assert is_symmetric(big)
    assert not is_symmetric([[0.0, 1.0], [1.0 + 1e-6, 0.0]])


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_frobenius_equals_singular_energy(m):
    s = singular_values(m)
    f2 = frobenius_norm(m) ** 2
    assert abs(f2 - float(np.sum(s**2))) <= 1e-8 * max(1.0, f2)
    assert np.all(s >= 0) and np.all(np.diff(s) >= 0)
    assert spectral_norm(m) == pytest.approx(float(s.max()), rel=1e-10, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: arrays(np.float64, (n, n), elements=finite)))
def test_symmetric_spectra(a):
    m = a + a.T
    ev = symmetric_eigenvalues(m)
    scale = max(1.0, frobenius_norm(m))
    assert abs(ev.sum() - np.trace(m)) <= 1e-8 * scale
    assert np.allclose(np.sort(np.abs(ev)), singular_values(m), atol=1e-8 * scale)


@pytest.mark.parametrize("seed", range(5))
def test_spectral_norm_matches_power_iteration(seed):
    m = np.random.default_rng(seed).standard_normal((7, 5))
    assert abs(spectral_norm(m) - power_iteration_norm(m)) <= 1e-8 * spectral_norm(m)
