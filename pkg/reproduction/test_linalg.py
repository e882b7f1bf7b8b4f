from fractions import Fraction

import numpy as np
import pytest
import sympy

import linalg


def random_matrix(rng, rows, cols):
    values = rng.integers(-3, 4, size=(rows, cols))
    values[rng.random((rows, cols)) < 0.5] = 0
    return [[Fraction(int(v)) for v in row] for row in values]


def test_echelon_matches_sympy_rank():
    rng = np.random.default_rng(1729)
    for _ in range(40):
        rows, cols = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        matrix = random_matrix(rng, rows, cols)
        echelon = linalg.Echelon(cols)
        echelon.extend({c: v for c, v in enumerate(row) if v} for row in matrix)
        expected = sympy.Matrix([[int(v) for v in row] for row in matrix]).rank()
        assert echelon.rank == expected
        assert linalg.rank(matrix) == expected
        for vector in echelon.nullspace():
            for row in matrix:
                assert sum(v * vector.get(c, 0) for c, v in enumerate(row)) == 0
        assert len(echelon.nullspace()) == cols - expected


def test_echelon_membership():
    echelon = linalg.Echelon(3)
    assert echelon.add({0: 2, 1: 4})
    assert not echelon.add({0: Fraction(1, 2), 1: 1})
    assert echelon.contains({0: -1, 1: -2})
    assert not echelon.contains({2: 1})
    assert echelon.nullity == 2


def test_integer_row_is_primitive():
    assert linalg.integer_row({0: Fraction(-1, 2), 3: Fraction(1, 3)}) == {0: 3, 3: -2}
    assert linalg.integer_row({1: 0}) == {}


def test_dense_helpers():
    a = [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(1)]]
    inverse = linalg.invert(a)
    assert linalg.matmul(a, inverse) == linalg.identity(2)
    assert linalg.solve(a, [Fraction(3), Fraction(2)]) == [1, 1]
    with pytest.raises(ValueError):
        linalg.invert([[Fraction(1), Fraction(2)], [Fraction(2), Fraction(4)]])
    with pytest.raises(ValueError):
        linalg.solve([[Fraction(1)], [Fraction(1)]], [Fraction(0), Fraction(1)])
    assert linalg.nullspace([], ncols=2) == linalg.identity(2)
    assert linalg.nullspace([[Fraction(1), Fraction(-1)]]) == [[1, 1]]


def test_float_fallback():
    a = [[2.0, 1.0], [1.0, 1.0]]
    inverse = linalg.invert(a)
    assert inverse[0] == pytest.approx([1.0, -1.0])
    assert linalg.rank([[1.0, 2.0], [2.0, 4.0 + 1e-15]]) == 1
    assert linalg.max_abs([Fraction(-3), Fraction(2)]) == 3


def test_signature():
    assert linalg.signature([[0, 1], [1, 0]]) == (1, 1)
    assert linalg.signature([[1, 0], [0, 0]]) == (1, 0)
    assert linalg.signature([]) == (0, 0)
