import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spread.errors import ConvergenceError, SpectralStructureError
from spread.spectral import NonnegMatrix, is_irreducible, perron

SQRT3 = math.sqrt(3)


def _numpy_perron(A):
    """Independent oracle: dense eigen-decomposition of A^T."""
    vals, vecs = np.linalg.eig(np.asarray(A, dtype=float).T)
    i = int(np.argmax(vals.real))
    v = np.abs(vecs[:, i].real)
    return vals[i].real, v / v.sum()


def test_one_by_one():
    pair = perron([[1]])
    assert pair.rho == pytest.approx(1.0)
    assert pair.w.tolist() == [1.0]


def test_xi_matrix_of_three_types():
    pair = perron(NonnegMatrix.from_rows("abc", [[1, 1, 1], [1, 1, 1], [1, 1, 0]]))
    assert pair.rho == pytest.approx(SQRT3 + 1, abs=1e-9)
    expected = [(SQRT3 - 1) / 2, (SQRT3 - 1) / 2, 2 - SQRT3]
    assert np.allclose(pair.w, expected, atol=1e-9)


def test_periodic_matrix_converges():
    pair = perron([[0, 1], [1, 0]])
    assert pair.rho == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(pair.w, [0.5, 0.5], atol=1e-12)


def test_four_pattern_matrix():
    pair = perron([[0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 1, 0], [1, 0, 1, 0]])
    assert pair.rho == pytest.approx(2.0, abs=1e-9)
    assert np.allclose(pair.w, [2 / 7, 1 / 7, 1 / 2, 1 / 14], atol=1e-9)


def test_irreducibility_reports():
    assert is_irreducible([[1, 1], [1, 1]])
    rep = is_irreducible([[1, 0], [1, 1]])
    assert not rep and sorted(rep.components) == [(0,), (1,)]


def test_reducible_rejected():
    with pytest.raises(SpectralStructureError) as e:
        perron([[1, 0], [1, 1]])
    assert len(e.value.components) == 2


def test_iteration_budget():
    with pytest.raises(ConvergenceError) as e:
        perron([[1, 2], [3, 1]], tol=1e-15, max_iter=2)
    assert e.value.iterations == 2 and e.value.residual > 0


def test_matrix_validation_and_lookup():
    M = NonnegMatrix.from_rows(["x", "y"], [["1/3", 1], [Fraction(1, 2), 0]])
    assert M["x", "x"] == Fraction(1, 3) and M.row("y") == (Fraction(1, 2), 0)
    with pytest.raises(ValueError):
        NonnegMatrix.from_rows(["x", "y"], [[1, -1], [0, 1]])
    with pytest.raises(ValueError):
        NonnegMatrix.from_rows(["x", "x"], [[1, 1], [1, 1]])


positive_matrices = st.integers(1, 6).flatmap(
    lambda n: st.lists(st.lists(st.floats(0.05, 5), min_size=n, max_size=n), min_size=n, max_size=n))


@given(positive_matrices)
def test_residual_and_normalization(rows):
    pair = perron(rows)
    A = np.array(rows)
    assert pair.residual <= 1e-12
    assert np.max(np.abs(pair.w @ A - pair.rho * pair.w)) <= 1e-12 * 1.0001
    assert abs(pair.w.sum() - 1) <= 1e-12 and (pair.w > 0).all()
    rho, w = _numpy_perron(A)
    assert pair.rho == pytest.approx(rho, rel=1e-9)
    assert np.allclose(pair.w, w, atol=1e-9)


@given(positive_matrices, st.sampled_from([2, 10]))
def test_scale_covariance(rows, c):
    a, b = perron(rows), perron(np.array(rows) * c)
    assert b.rho == pytest.approx(c * a.rho, rel=1e-10)
    assert np.allclose(a.w, b.w, atol=1e-10)


@given(st.integers(2, 7))
def test_cycles_are_periodic_but_fine(n):
    A = np.roll(np.eye(n), 1, axis=1)
    pair = perron(A)
    assert pair.rho == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(pair.w, 1 / n)
