"""
Linear algebra over exact rationals, with a floating-point fallback.

``Echelon`` is the workhorse for constraint systems: an incremental,
fraction-free reduced row echelon form over the integers with sparse rows.
The dense helpers below it handle the small square systems of the
normalization and orbit constructions, on Fractions or on floats.
"""
import logging
import math
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

Number = Union[Fraction, float]
Matrix = List[List[Number]]
SparseRow = Dict[int, int]

FLOAT_EPSILON = 1e-12


# ----------------------------------------------------------------------
# Sparse integer elimination
# ----------------------------------------------------------------------
def integer_row(row: Mapping[int, object]) -> SparseRow:
    """Scale a rational sparse row to a primitive integer row (first entry positive)."""
    entries = {c: Fraction(v) for c, v in row.items() if v}
    if not entries:
        return {}
    scale = 1
    for v in entries.values():
        scale = scale * v.denominator // math.gcd(scale, v.denominator)
    ints = {c: int(v * scale) for c, v in entries.items()}
    return _primitive(ints)


def _primitive(row: SparseRow) -> SparseRow:
    if not row:
        return row
    g = 0
    for v in row.values():
        g = math.gcd(g, v)
    if row[min(row)] < 0:
        g = -g
    return {c: v // g for c, v in row.items()}


def _combine(a: SparseRow, fa: int, b: SparseRow, fb: int) -> SparseRow:
    """fa*a - fb*b with zeros dropped."""
    out = {c: fa * v for c, v in a.items()}
    for c, v in b.items():
        value = out.get(c, 0) - fb * v
        if value:
            out[c] = value
        else:
            out.pop(c, None)
    return out


class Echelon:
    """Reduced row echelon form built one row at a time.

    Rows are primitive integer vectors keyed by column; the pivot of a row is
    its first nonzero column and no stored row has an entry in another row's
    pivot column.
    """

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.rows: Dict[int, SparseRow] = {}

    @property
    def rank(self) -> int:
        return len(self.rows)

    @property
    def nullity(self) -> int:
        return self.ncols - self.rank

    def reduce(self, row: Mapping[int, object]) -> SparseRow:
        current = integer_row(row)
        for pivot in sorted(set(current) & self.rows.keys()):
            value = current.get(pivot)
            if not value:
                continue
            stored = self.rows[pivot]
            current = _combine(current, stored[pivot], stored, value)
        return _primitive(current)

    def add(self, row: Mapping[int, object]) -> bool:
        """Insert a row; returns False when it was already in the span."""
        reduced = self.reduce(row)
        if not reduced:
            return False
        pivot = min(reduced)
        for col, stored in list(self.rows.items()):
            value = stored.get(pivot)
            if value:
                self.rows[col] = _primitive(_combine(stored, reduced[pivot], reduced, value))
        self.rows[pivot] = reduced
        return True

    def extend(self, rows: Iterable[Mapping[int, object]]) -> int:
        return sum(1 for row in rows if self.add(row))

    def contains(self, row: Mapping[int, object]) -> bool:
        return not self.reduce(row)

    def nullspace(self) -> List[Dict[int, Fraction]]:
        """Basis of the solution space, one vector per free column."""
        basis = []
        for free in range(self.ncols):
            if free in self.rows:
                continue
            vector = {free: Fraction(1)}
            for pivot, stored in self.rows.items():
                value = stored.get(free)
                if value:
                    vector[pivot] = Fraction(-value, stored[pivot])
            basis.append(vector)
        return basis


# ----------------------------------------------------------------------
# Dense helpers
# ----------------------------------------------------------------------
def has_float(matrix: Iterable[Iterable[Number]]) -> bool:
    return any(isinstance(v, float) for row in matrix for v in row)


def identity(n: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def zeros(rows: int, cols: int) -> Matrix:
    return [[Fraction(0)] * cols for _ in range(rows)]


def transpose(a: Sequence[Sequence[Number]]) -> Matrix:
    return [list(col) for col in zip(*a)]


def matmul(a: Sequence[Sequence[Number]], b: Sequence[Sequence[Number]]) -> Matrix:
    bt = transpose(b)
    return [[sum((x * y for x, y in zip(row, col) if x and y), Fraction(0)) for col in bt] for row in a]


def matvec(a: Sequence[Sequence[Number]], v: Sequence[Number]) -> List[Number]:
    return [sum((x * y for x, y in zip(row, v) if x and y), Fraction(0)) for row in a]


def rref(matrix: Sequence[Sequence[Number]], tolerance: float = FLOAT_EPSILON) -> Tuple[Matrix, List[int]]:
    """Reduced row echelon form and pivot columns.

    Exact inputs are reduced exactly with first-nonzero pivots; any float entry
    switches to partial pivoting with a tolerance relative to the largest entry.
    """
    inexact = has_float(matrix)
    rows: Matrix = [[float(v) if inexact else Fraction(v) for v in row] for row in matrix]
    if not rows:
        return rows, []
    nrows, ncols = len(rows), len(rows[0])
    threshold = 0.0
    if inexact:
        threshold = tolerance * max(1.0, max((abs(v) for row in rows for v in row), default=0.0))
    pivots: List[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        if inexact:
            best = max(range(r, nrows), key=lambda i: abs(rows[i][c]))
            if abs(rows[best][c]) <= threshold:
                continue
        else:
            best = next((i for i in range(r, nrows) if rows[i][c] != 0), None)
            if best is None:
                continue
        rows[r], rows[best] = rows[best], rows[r]
        pivot = rows[r][c]
        rows[r] = [v / pivot for v in rows[r]]
        for i in range(nrows):
            if i != r and rows[i][c]:
                factor = rows[i][c]
                rows[i] = [x - factor * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    if inexact:
        rows = [[0.0 if abs(v) <= threshold else v for v in row] for row in rows]
    return rows, pivots


def rank(matrix: Sequence[Sequence[Number]], tolerance: float = FLOAT_EPSILON) -> int:
    return len(rref(matrix, tolerance)[1])


def nullspace(matrix: Sequence[Sequence[Number]], ncols: Optional[int] = None,
              tolerance: float = FLOAT_EPSILON) -> List[List[Number]]:
    """Basis of {v : matrix v = 0}; ``ncols`` is needed when the matrix has no rows."""
    if not matrix:
        return [list(row) for row in identity(ncols or 0)]
    reduced, pivots = rref(matrix, tolerance)
    width = len(matrix[0])
    zero = 0.0 if has_float(matrix) else Fraction(0)
    basis = []
    for free in (c for c in range(width) if c not in pivots):
        vector = [zero] * width
        vector[free] = zero + 1
        for row, pivot in enumerate(pivots):
            vector[pivot] = -reduced[row][free]
        basis.append(vector)
    return basis


def solve(matrix: Sequence[Sequence[Number]], rhs: Sequence[Number],
          tolerance: float = FLOAT_EPSILON) -> List[Number]:
    """One solution of ``matrix x = rhs`` (free variables set to 0).

    Raises:
        ValueError: when the system is inconsistent.
    """
    width = len(matrix[0]) if matrix else 0
    augmented = [list(row) + [b] for row, b in zip(matrix, rhs)]
    reduced, pivots = rref(augmented, tolerance)
    if width in pivots:
        raise ValueError("inconsistent linear system")
    zero = 0.0 if has_float(augmented) else Fraction(0)
    solution = [zero] * width
    for row, pivot in enumerate(pivots):
        solution[pivot] = reduced[row][width]
    return solution


def invert(matrix: Sequence[Sequence[Number]]) -> Matrix:
    """Inverse of a square matrix.

    Raises:
        ValueError: for a singular matrix.
    """
    n = len(matrix)
    if has_float(matrix):
        try:
            inverse = np.linalg.inv(np.array(matrix, dtype=float))
        except np.linalg.LinAlgError as e:
            raise ValueError(f"singular matrix: {e}") from e
        return inverse.tolist()
    augmented = [[Fraction(v) for v in row] + unit for row, unit in zip(matrix, identity(n))]
    reduced, pivots = rref(augmented)
    if pivots[:n] != list(range(n)):
        raise ValueError("singular matrix")
    return [row[n:] for row in reduced]


def max_abs(values: Iterable[Number]) -> Number:
    """Largest absolute value; stays a Fraction when every input is exact."""
    best: Number = Fraction(0)
    for v in values:
        if abs(v) > best:
            best = abs(v)
    return best


def signature(matrix: Sequence[Sequence[Number]], tolerance: float = 1e-9) -> Tuple[int, int]:
    """(positive, negative) eigenvalue counts of a symmetric matrix."""
    if not matrix:
        return 0, 0
    eigenvalues = np.linalg.eigvalsh(np.array(matrix, dtype=float))
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    return int(np.sum(eigenvalues > tolerance * scale)), int(np.sum(eigenvalues < -tolerance * scale))
