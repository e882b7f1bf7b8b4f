"""
Algebraic k-models: the standard models M_{6+4p,k}, their affine
restrictions A_{3+2p,k}, models extracted from a metric at a point, and the
normalization of an extracted model to the standard one.

Basis vectors follow the coordinate order: X, Y, Z_i, Yt, Zt_i and then the
starred copies. Tensors are sparse dicts from index tuples to scalars.
"""
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Field
from sympy import integer_nthroot
from sympy.utilities.iterables import multiset_permutations

import linalg
from config import DEFAULT_TOLERANCE
from errors import ModelError, NoSolution
from exprs import Point, Scalar, is_exact
from geometry import MetricField

logger = logging.getLogger(__name__)

Index = Tuple[int, ...]
SparseTensor = Dict[Index, Scalar]


def model_dim(p: int) -> int:
    return 6 + 4 * p


def affine_dim(p: int) -> int:
    return 3 + 2 * p


def _check_order(p: int, k: int) -> None:
    if p < 1:
        raise ModelError(f"p must be a positive integer, got {p}")
    if not 0 <= k <= p + 2:
        raise ModelError(f"k must lie in [0, {p + 2}] for p={p}, got {k}")


def _tensor_exact(tensor: SparseTensor) -> bool:
    return all(is_exact(v) for v in tensor.values())


# ----------------------------------------------------------------------
# Model types
# ----------------------------------------------------------------------
@dataclass
class Model:
    """Inner product space of dimension 6+4p with constant tensors A^0..A^k."""

    p: int
    inner: linalg.Matrix
    tensors: List[SparseTensor]

    def __post_init__(self):
        n = model_dim(self.p)
        if len(self.inner) != n or any(len(row) != n for row in self.inner):
            raise ModelError(f"inner product must be {n}x{n} for p={self.p}")
        for order, tensor in enumerate(self.tensors):
            if any(len(index) != 4 + order for index in tensor):
                raise ModelError(f"A^{order} must have rank {4 + order}")

    @property
    def dim(self) -> int:
        return model_dim(self.p)

    @property
    def k(self) -> int:
        return len(self.tensors) - 1

    @property
    def exact(self) -> bool:
        return all(is_exact(v) for row in self.inner for v in row) and all(map(_tensor_exact, self.tensors))

    def truncate(self, k: int) -> "Model":
        if not 0 <= k <= self.k:
            raise ModelError(f"cannot truncate a {self.k}-model to order {k}")
        return Model(self.p, self.inner, self.tensors[: k + 1])

    def affine(self) -> "AffineModel":
        half = affine_dim(self.p)
        restricted = [{i: v for i, v in t.items() if max(i) < half} for t in self.tensors]
        return AffineModel(self.p, restricted)


@dataclass
class AffineModel:
    """The tensors B^0..B^k restricted to span{X, Y, Z_i, Yt, Zt_i}; no inner product."""

    p: int
    tensors: List[SparseTensor]
    inner = None

    @property
    def dim(self) -> int:
        return affine_dim(self.p)

    @property
    def k(self) -> int:
        return len(self.tensors) - 1

    @property
    def exact(self) -> bool:
        return all(map(_tensor_exact, self.tensors))


@dataclass
class LinearMap:
    """Square matrix whose column j is the image of basis vector j."""

    matrix: linalg.Matrix

    @property
    def n(self) -> int:
        return len(self.matrix)

    @property
    def exact(self) -> bool:
        return not linalg.has_float(self.matrix)

    @classmethod
    def identity(cls, n: int) -> "LinearMap":
        return cls(linalg.identity(n))

    def column(self, j: int) -> List[Scalar]:
        return [row[j] for row in self.matrix]

    def apply(self, vector: Sequence[Scalar]) -> List[Scalar]:
        return linalg.matvec(self.matrix, vector)

    def compose(self, other: "LinearMap") -> "LinearMap":
        """self after other."""
        if self.n != other.n:
            raise ModelError(f"cannot compose maps of size {self.n} and {other.n}")
        return LinearMap(linalg.matmul(self.matrix, other.matrix))

    def transpose(self) -> "LinearMap":
        return LinearMap(linalg.transpose(self.matrix))

    def inverse(self) -> "LinearMap":
        try:
            return LinearMap(linalg.invert(self.matrix))
        except ValueError as e:
            raise ModelError(f"map is not invertible: {e}") from e


# ----------------------------------------------------------------------
# Standard models
# ----------------------------------------------------------------------
def _place(coefficients: Dict[Tuple[int, ...], Scalar]) -> SparseTensor:
    """Spread symmetric coefficients c(xi1..xin) over the four X-placements of a curvature tensor."""
    entries: SparseTensor = {}
    for multiset, value in coefficients.items():
        for xis in multiset_permutations(list(multiset)):
            a, b, rest = xis[0], xis[1], tuple(xis[2:])
            entries[(0, a, b, 0) + rest] = value
            entries[(a, 0, b, 0) + rest] = -value
            entries[(0, a, 0, b) + rest] = -value
            entries[(a, 0, 0, b) + rest] = value
    return entries


def standard_inner(p: int) -> linalg.Matrix:
    n, half = model_dim(p), affine_dim(p)
    inner = linalg.zeros(n, n)
    for a in range(half):
        inner[a][a + half] = inner[a + half][a] = Fraction(1)
    return inner


def standard_coefficients(p: int, k: int) -> List[Dict[Tuple[int, ...], Fraction]]:
    """Nonzero symmetric coefficients of A^0..A^k, keyed by sorted affine indices."""
    _check_order(p, k)
    y, yt = 1, p + 2
    one = Fraction(1)
    orders: List[Dict[Tuple[int, ...], Fraction]] = [{} for _ in range(k + 1)]
    orders[0][(y, yt)] = one
    for i in range(1, p + 1):
        orders[0][(1 + i, p + 2 + i)] = one
    for n in range(1, min(k, p) + 1):
        orders[n][tuple(sorted((1 + n,) + (y,) * (n + 1)))] = one
    if k >= p + 1:
        orders[p + 1][(y,) * (p + 3)] = one
    if k >= p + 2:
        orders[p + 2][(y,) * (p + 4)] = one
    return orders


def standard_model(p: int, k: int) -> Model:
    """M_{6+4p,k}."""
    tensors = [_place(c) for c in standard_coefficients(p, k)]
    return Model(p, standard_inner(p), tensors)


def affine_model(p: int, k: int) -> AffineModel:
    """A_{3+2p,k}."""
    return standard_model(p, k).affine()


def extract_model(g: MetricField, point: Point, k: int) -> Model:
    """(g, R, nabla R, ..., nabla^k R) at ``point`` in the coordinate frame."""
    if k < 0:
        raise ModelError(f"k must be non-negative, got {k}")
    tensors = [T.evaluate(point) for T in g.tower(k)]
    model = Model(g.p, g.matrix_at(point), tensors)
    logger.info("Extracted %d-model for p=%d at %r (exact=%s)", k, g.p, point, model.exact)
    return model


# ----------------------------------------------------------------------
# Pullback and isomorphism checks
# ----------------------------------------------------------------------
def pullback(phi: LinearMap, tensor: SparseTensor) -> SparseTensor:
    """(phi^* T)(e_I) = T(phi e_i1, ..., phi e_ir)."""
    rows = [[(c, v) for c, v in enumerate(row) if v] for row in phi.matrix]
    out: Dict[Index, Scalar] = {}
    for J, value in tensor.items():
        for choice in product(*(rows[j] for j in J)):
            coefficient = value
            for _, v in choice:
                coefficient = coefficient * v
            I = tuple(c for c, _ in choice)
            out[I] = out.get(I, 0) + coefficient
    return {I: v for I, v in out.items() if v != 0}


def evaluate_multilinear(tensor: SparseTensor, vectors: Sequence[Sequence[Scalar]]) -> Scalar:
    total: Scalar = Fraction(0)
    for J, value in tensor.items():
        term = value
        for vector, j in zip(vectors, J):
            term = term * vector[j]
            if not term:
                break
        total = total + term
    return total


def _pullback_inner(phi: LinearMap, inner: linalg.Matrix) -> linalg.Matrix:
    return linalg.matmul(linalg.transpose(phi.matrix), linalg.matmul(inner, phi.matrix))


class IsomorphismCheck(NamedTuple):
    ok: bool
    residual: Scalar


ModelLike = Union[Model, AffineModel]


def verify_isomorphism(phi: LinearMap, m1: ModelLike, m2: ModelLike,
                       tolerance: float = DEFAULT_TOLERANCE) -> IsomorphismCheck:
    """
    Check phi^* m2 == m1: the inner product (for full models) and every tensor.

    Returns:
        ``ok`` and the largest absolute deviation; exact inputs must match exactly.
    """
    if type(m1) is not type(m2) or m1.p != m2.p or phi.n != m1.dim:
        raise ModelError(f"dimension mismatch: map of size {phi.n}, models of dims {m1.dim} and {m2.dim}")
    if m1.k != m2.k:
        raise ModelError(f"models carry different orders: {m1.k} and {m2.k}")
    deviations: List[Scalar] = []
    if isinstance(m1, Model):
        pulled = _pullback_inner(phi, m2.inner)
        deviations.extend(a - b for ra, rb in zip(pulled, m1.inner) for a, b in zip(ra, rb))
    for source, target in zip(m1.tensors, m2.tensors):
        pulled = pullback(phi, target)
        for index in set(pulled) | set(source):
            deviations.append(pulled.get(index, 0) - source.get(index, 0))
    residual = linalg.max_abs(deviations)
    exact = phi.exact and m1.exact and m2.exact
    ok = residual == 0 if exact else residual < tolerance
    logger.debug("Isomorphism check: ok=%s residual=%s", ok, residual)
    return IsomorphismCheck(ok, residual)


# ----------------------------------------------------------------------
# Normalization
# ----------------------------------------------------------------------
class NormalizationReport(BaseModel):
    p: int
    k: int
    exact: bool = Field(..., description="True when the map has rational entries only.")
    residual: float = Field(..., description="Largest deviation of the transformed model from the standard one.")
    a: str = Field(..., description="Scaling of X.")
    s: str = Field(..., description="Scaling of Y.")


def nth_root(value: Scalar, n: int) -> Scalar:
    """Positive n-th root of a non-negative value, exact when it is rational."""
    if isinstance(value, Fraction):
        num, num_exact = integer_nthroot(value.numerator, n)
        den, den_exact = integer_nthroot(value.denominator, n)
        if num_exact and den_exact:
            return Fraction(int(num), int(den))
    return float(value) ** (1.0 / n)


def _scalar_text(value: Scalar) -> str:
    if isinstance(value, Fraction):
        return str(value)
    return f"{value:.17g}"


def _scalings(h, p: int, k: int) -> Tuple[Scalar, Scalar]:
    """(s, a^2) with a^2 s^(p+3) h_(p+3) = 1 and a^2 s^(p+4) h_(p+4) = 1 where imposed."""
    one = Fraction(1)
    if k <= p:
        return one, one
    if k == p + 1:
        top = h(p + 3)
        if top > 0:
            return one, one / top
        if top < 0 and (p + 3) % 2 == 1:
            return -nth_root(one / -top, p + 3), one
        raise NoSolution(f"top all-Y component {top} has no admissible scaling")
    top, next_top = h(p + 3), h(p + 4)
    if top == 0 or next_top == 0:
        raise NoSolution("all-Y components of orders p+1 and p+2 must both be nonzero")
    s = top / next_top
    a2 = one / (s ** (p + 3) * top)
    if a2 <= 0:
        raise NoSolution(f"scaling a^2 = {a2} is not positive")
    return s, a2


def normalize_to_standard(m: Model, p: int, k: int,
                          tolerance: float = DEFAULT_TOLERANCE) -> Tuple[LinearMap, NormalizationReport]:
    """
    Find a basis change that turns ``m`` into ``standard_model(p, k)``.

    The new affine basis is X' = aX, Y' = sY + sum mu_i Z_i + kappa Yt,
    Z'_j = sum M_ij Z_i + rho_j Yt, Yt' = tau Yt and
    Zt'_j = sigma_j Yt + sum N_ij Zt_i. It lifts to the full space with the
    starred block C = -1/2 G0 B and the dual block B^{-T}.

    Raises:
        NoSolution: if the scalings or the Z-mixing cannot be solved, or the
            resulting map fails verification.
    """
    _check_order(p, k)
    if m.p != p or m.k < k:
        raise ModelError(f"model with p={m.p}, k={m.k} cannot be normalized to order {k} for p={p}")
    m = m.truncate(k)
    zero = Fraction(0)

    def component(order: int, index: Index) -> Scalar:
        if order < 0 or order > k:
            return zero
        return m.tensors[order].get(index, zero)

    def h(total: int) -> Scalar:
        return component(total - 2, (0, 1, 1, 0) + (1,) * (total - 2))

    def gz(i: int, total: int) -> Scalar:
        return component(total - 2, (0, 1 + i, 1, 0) + (1,) * (total - 2))

    kk = min(k, p)
    try:
        s, a2 = _scalings(h, p, k)
        a = nth_root(a2, 2)
        system = [[s ** (n + 1) * gz(i, n + 2) for i in range(1, p + 1)] for n in range(1, k + 1)]
        columns: List[List[Scalar]] = []
        for j in range(1, kk + 1):
            rhs = [(1 / a2 if n == j else zero) for n in range(1, k + 1)]
            try:
                columns.append(linalg.solve(system, rhs))
            except ValueError as e:
                raise NoSolution(f"Z-mixing for Z{j} is inconsistent: {e}") from e
        free = linalg.nullspace(system, ncols=p)
        if len(free) != p - kk:
            raise NoSolution(f"expected {p - kk} free Z directions, found {len(free)}")
        columns.extend(free)
        M = linalg.transpose(columns)
        try:
            M_inverse = linalg.invert(M)
        except ValueError as e:
            raise NoSolution(f"Z-mixing matrix is singular: {e}") from e

        gamma = [(-a2 * s ** (j + 2) * h(j + 2) / (j + 2) if j <= kk else zero) for j in range(1, p + 1)]
        mu = linalg.matvec(M, gamma)
        g2 = [gz(i, 2) for i in range(1, p + 1)]
        rho = [-sum((g2[i] * M[i][j] for i in range(p)), zero) for j in range(p)]
        kappa = -(h(2) * s / 2 + sum((g2[i] * mu[i] for i in range(p)), zero))
        tau = 1 / (a2 * s)
        N = [[v / a2 for v in row] for row in linalg.transpose(M_inverse)]
        sigma = [-gamma[j] / (a2 * s) for j in range(p)]
    except ZeroDivisionError as e:
        raise NoSolution(f"degenerate model: {e}") from e

    half = affine_dim(p)
    yt = p + 2
    B = linalg.zeros(half, half)
    B[0][0] = a
    B[1][1] = s
    B[yt][1] = kappa
    B[yt][yt] = tau
    for i in range(p):
        B[2 + i][1] = mu[i]
        for j in range(p):
            B[2 + i][2 + j] = M[i][j]
            B[yt + 1 + i][yt + 1 + j] = N[i][j]
        B[yt][2 + i] = rho[i]
        B[yt][yt + 1 + i] = sigma[i]

    try:
        phi = lift_affine_map(B, [row[:half] for row in m.inner[:half]])
    except ModelError as e:
        raise NoSolution(str(e)) from e
    check = verify_isomorphism(phi, standard_model(p, k), m, tolerance)
    if not check.ok:
        raise NoSolution(f"normalized model deviates from the standard one by {check.residual}")
    report = NormalizationReport(p=p, k=k, exact=phi.exact, residual=float(check.residual),
                                 a=_scalar_text(a), s=_scalar_text(s))
    logger.info("Normalized %d-model for p=%d (exact=%s, residual=%s)", k, p, report.exact, report.residual)
    return phi, report


def lift_affine_map(B: linalg.Matrix, G0: linalg.Matrix,
                    correction: Optional[linalg.Matrix] = None) -> LinearMap:
    """
    Extend an invertible map B of the affine span to the full space: the
    unstarred columns get the starred part C, the starred block is B^{-T}.
    Without ``correction``, C = -1/2 G0 B.
    """
    half = len(B)
    try:
        D = linalg.transpose(linalg.invert(B))
    except ValueError as e:
        raise ModelError(f"affine map is not invertible: {e}") from e
    if correction is None:
        C = [[-v / 2 for v in row] for row in linalg.matmul(G0, B)]
    else:
        C = correction
    n = 2 * half
    full = linalg.zeros(n, n)
    for i in range(half):
        for j in range(half):
            full[i][j] = B[i][j]
            full[half + i][j] = C[i][j]
            full[half + i][half + j] = D[i][j]
    return LinearMap(full)


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------
def encode_scalar(value: Scalar):
    if isinstance(value, float):
        return value
    value = Fraction(value)
    return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def decode_scalar(value) -> Scalar:
    if isinstance(value, float):
        return value
    return Fraction(value)


def model_to_json(m: Model) -> str:
    payload = {
        "p": m.p,
        "k": m.k,
        "inner": [[encode_scalar(v) for v in row] for row in m.inner],
        "tensors": [
            {
                "rank": 4 + order,
                "entries": [{"index": list(index), "value": encode_scalar(tensor[index])}
                            for index in sorted(tensor)],
            }
            for order, tensor in enumerate(m.tensors)
        ],
    }
    return json.dumps(payload)


def model_from_json(text: str) -> Model:
    try:
        payload = json.loads(text)
        inner = [[decode_scalar(v) for v in row] for row in payload["inner"]]
        tensors = [{tuple(e["index"]): decode_scalar(e["value"]) for e in t["entries"]} for t in payload["tensors"]]
        model = Model(int(payload["p"]), inner, tensors)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"malformed model JSON: {e}") from e
    if model.k != payload["k"]:
        raise ModelError(f"model JSON declares k={payload['k']} but carries {len(tensors)} tensors")
    return model
