"""
Isotropy algebras of models, the orbit constructions on the affine models,
and the isometry-dimension table.

The Lie algebra of the stabilizer is the nullspace of a linear system in the
n^2 entries of an endomorphism A (unknown ``l*n + i`` is A[l][i], the
e_l-component of A e_i).
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

import linalg
from config import DEFAULT_TOLERANCE
from errors import InvariantError, ModelError, NoMap
from exprs import Scalar
from models import (AffineModel, LinearMap, Model, SparseTensor, affine_dim, affine_model,
                    lift_affine_map, nth_root, standard_model, verify_isomorphism)

logger = logging.getLogger(__name__)

ModelLike = Union[Model, AffineModel]
Vector = Sequence[Scalar]


# ----------------------------------------------------------------------
# Constraint systems
# ----------------------------------------------------------------------
@dataclass
class StabilizerResult:
    n: int
    dim: int
    basis: List[linalg.Matrix]
    constraint_rank: int


class DerivationConstraintSystem:
    """Linear conditions on A: skew for an inner product, annihilating tensors and fixed vectors."""

    def __init__(self, n: int):
        self.n = n
        self.echelon = linalg.Echelon(n * n)
        self.rows_seen = 0

    def unknown(self, l: int, i: int) -> int:
        return l * self.n + i

    def _add(self, row: Dict[int, Fraction]) -> None:
        self.rows_seen += 1
        self.echelon.add(row)

    def add_metric(self, inner: linalg.Matrix) -> None:
        """<A e_i, e_j> + <e_i, A e_j> = 0."""
        n = self.n
        nonzero = [[(l, v) for l, v in enumerate(col) if v] for col in linalg.transpose(inner)]
        for i in range(n):
            for j in range(i, n):
                row: Dict[int, Fraction] = {}
                for l, v in nonzero[j]:
                    row[self.unknown(l, i)] = row.get(self.unknown(l, i), 0) + v
                for l, v in nonzero[i]:
                    row[self.unknown(l, j)] = row.get(self.unknown(l, j), 0) + v
                self._add(row)

    def add_tensor(self, tensor: SparseTensor) -> None:
        """(A.T)_I = sum_s sum_l A[l][i_s] T_{I[s->l]} = 0 for every I."""
        rows: Dict[Tuple[int, ...], Dict[int, Fraction]] = {}
        for J, value in tensor.items():
            for s, l in enumerate(J):
                for i in range(self.n):
                    row = rows.setdefault(J[:s] + (i,) + J[s + 1:], {})
                    column = self.unknown(l, i)
                    row[column] = row.get(column, 0) + value
        for row in rows.values():
            self._add(row)

    def add_fixed_vector(self, vector: Vector) -> None:
        for l in range(self.n):
            self._add({self.unknown(l, i): v for i, v in enumerate(vector) if v})

    def solve(self) -> StabilizerResult:
        n = self.n
        basis = []
        for solution in self.echelon.nullspace():
            matrix = linalg.zeros(n, n)
            for column, value in solution.items():
                matrix[column // n][column % n] = value
            basis.append(matrix)
        logger.info("Constraint system: %d unknowns, %d rows, rank %d, nullity %d",
                    n * n, self.rows_seen, self.echelon.rank, len(basis))
        return StabilizerResult(n=n, dim=len(basis), basis=basis, constraint_rank=self.echelon.rank)

    @classmethod
    def for_model(cls, m: ModelLike) -> "DerivationConstraintSystem":
        if not m.exact:
            raise ModelError("stabilizers are computed for exact rational models only")
        system = cls(m.dim)
        if isinstance(m, Model):
            system.add_metric(m.inner)
        for tensor in m.tensors:
            system.add_tensor(tensor)
        return system


def derivation_action(A: linalg.Matrix, tensor: SparseTensor) -> SparseTensor:
    """(A.T)(xi_1..xi_r) = sum_j T(xi_1, ..., A xi_j, ..., xi_r)."""
    n = len(A)
    out: Dict[Tuple[int, ...], Scalar] = {}
    for J, value in tensor.items():
        for s, l in enumerate(J):
            for i in range(n):
                entry = A[l][i]
                if entry:
                    I = J[:s] + (i,) + J[s + 1:]
                    out[I] = out.get(I, 0) + entry * value
    return {I: v for I, v in out.items() if v != 0}


def stabilizer_dim(m: ModelLike) -> StabilizerResult:
    """Exact isotropy algebra of a model or affine model."""
    return DerivationConstraintSystem.for_model(m).solve()


def _flatten(A: linalg.Matrix) -> Dict[int, Fraction]:
    n = len(A)
    return {l * n + i: v for l, row in enumerate(A) for i, v in enumerate(row) if v}


def _sparse_bracket(A: Dict[Tuple[int, int], Fraction], B: Dict[Tuple[int, int], Fraction],
                    n: int) -> Dict[int, Fraction]:
    rows_b: Dict[int, List[Tuple[int, Fraction]]] = {}
    for (m, j), v in B.items():
        rows_b.setdefault(m, []).append((j, v))
    rows_a: Dict[int, List[Tuple[int, Fraction]]] = {}
    for (m, j), v in A.items():
        rows_a.setdefault(m, []).append((j, v))
    out: Dict[int, Fraction] = {}
    for (l, m), v in A.items():
        for j, w in rows_b.get(m, ()):
            out[l * n + j] = out.get(l * n + j, 0) + v * w
    for (l, m), v in B.items():
        for j, w in rows_a.get(m, ()):
            out[l * n + j] = out.get(l * n + j, 0) - v * w
    return {c: v for c, v in out.items() if v}


def in_span(result: StabilizerResult, A: linalg.Matrix) -> bool:
    echelon = linalg.Echelon(result.n * result.n)
    echelon.extend(_flatten(B) for B in result.basis)
    return echelon.contains(_flatten(A))


def check_bracket_closure(result: StabilizerResult) -> bool:
    """Every commutator of basis elements lies in the span of the basis."""
    n = result.n
    echelon = linalg.Echelon(n * n)
    echelon.extend(_flatten(B) for B in result.basis)
    sparse = [{(l, i): v for l, row in enumerate(B) for i, v in enumerate(row) if v} for B in result.basis]
    for a in range(len(sparse)):
        for b in range(a + 1, len(sparse)):
            if not echelon.contains(_sparse_bracket(sparse[a], sparse[b], n)):
                logger.warning("Bracket of basis elements %d and %d leaves the algebra", a, b)
                return False
    return True


# ----------------------------------------------------------------------
# The split orthogonal group on the dual space W(p)
# ----------------------------------------------------------------------
def okp_formula(p: int, k: int) -> int:
    return (2 * p - k) * (2 * p - k - 1) // 2


def okp_algebra(p: int, k: int) -> StabilizerResult:
    """Lie algebra of {h in O(p,p) : h beta_i = beta_i, i <= k} on the pairing <beta_i, betat_j> = delta_ij."""
    if p < 1 or not 0 <= k <= p:
        raise ModelError(f"k must lie in [0, {p}] for p={p}, got {k}")
    n = 2 * p
    inner = linalg.zeros(n, n)
    for i in range(p):
        inner[i][p + i] = inner[p + i][i] = Fraction(1)
    system = DerivationConstraintSystem(n)
    system.add_metric(inner)
    for i in range(k):
        system.add_fixed_vector([Fraction(int(j == i)) for j in range(n)])
    return system.solve()


def okp_dim(p: int, k: int) -> int:
    """
    Dimension of the O(p,p) stabilizer of beta_1..beta_k.

    Raises:
        InvariantError: when the computed dimension differs from (2p-k)(2p-k-1)/2.
    """
    dim = okp_algebra(p, k).dim
    if dim != okp_formula(p, k):
        raise InvariantError(f"O({p},{p}) stabilizer of {k} vectors has dimension {dim}, "
                             f"closed form gives {okp_formula(p, k)}")
    return dim


def orbit_tangent_dim(p: int, k: int) -> int:
    """Rank of h -> h betat_1 over the stabilizer algebra."""
    result = okp_algebra(p, k)
    images = [[A[l][p] for l in range(result.n)] for A in result.basis]
    echelon = linalg.Echelon(result.n)
    return echelon.extend({l: v for l, v in enumerate(image) if v} for image in images)


# ----------------------------------------------------------------------
# Expected dimensions
# ----------------------------------------------------------------------
def expected_affine_stabilizer_dim(p: int, k: int) -> int:
    if k == 0:
        return (p + 1) * (2 * p + 1) + 2 * p + 3
    if k <= p:
        return okp_formula(p, k) + 2 * (2 * p + 1 - k) + 1
    if k == p + 1:
        return p * (p + 1) // 2 + p + 2
    return p * (p + 1) // 2 + p + 1


def lift_gap(p: int) -> int:
    """Difference between the model and affine-model stabilizer dimensions."""
    return (p + 1) * (2 * p + 3)


def expected_model_stabilizer_dim(p: int, k: int) -> int:
    return expected_affine_stabilizer_dim(p, k) + lift_gap(p)


def expected_isometry_dim(p: int, k: Optional[int]) -> int:
    """dim of the isometry group of M_{6+4p,k}; ``k=None`` is the psi-deformed family."""
    if k is None:
        return 5 + 4 * p + expected_model_stabilizer_dim(p, p + 2)
    return 6 + 4 * p + expected_model_stabilizer_dim(p, k)


def claimed_isometry_dim(p: int, k: Optional[int]) -> int:
    """The published closed form, kept for comparison."""
    n_p = (6 + 4 * p) + (p + 1) * (3 + 2 * p) + (2 * p + 3)
    if k is None:
        return claimed_isometry_dim(p, p + 2) - 1
    if k == 0:
        return n_p + (p + 1) * (2 * p + 1)
    if k <= p:
        return n_p + (2 * p + 2) + okp_formula(p, k)
    return claimed_isometry_dim(p, k - 1) - 1


class IsometryRow(BaseModel):
    label: str = Field(..., description="k=<order> or N for the psi-deformed family.")
    k: Optional[int] = None
    computed: int
    expected: int = Field(..., description="Closed form from the infinitesimal analysis.")
    published: int = Field(..., description="Published closed form.")
    passed: bool


class IsometryTable(BaseModel):
    p: int
    rows: List[IsometryRow] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)


def manifold_isometry_dims(p: int) -> IsometryTable:
    """dim of the isometry groups of M_{6+4p,k}, k = 0..p+2, and of N_{6+4p,psi}."""
    if p < 1:
        raise ModelError(f"p must be a positive integer, got {p}")
    table = IsometryTable(p=p)
    top = 0
    for k in range(p + 3):
        model_dim = stabilizer_dim(standard_model(p, k)).dim
        computed = 6 + 4 * p + model_dim
        expected = expected_isometry_dim(p, k)
        table.rows.append(IsometryRow(label=f"k={k}", k=k, computed=computed, expected=expected,
                                      published=claimed_isometry_dim(p, k), passed=computed == expected))
        logger.info("p=%d k=%d: isometry dimension %d (closed form %d)", p, k, computed, expected)
        top = model_dim
    computed = 5 + 4 * p + top
    expected = expected_isometry_dim(p, None)
    table.rows.append(IsometryRow(label="N", k=None, computed=computed, expected=expected,
                                  published=claimed_isometry_dim(p, None), passed=computed == expected))
    return table


# ----------------------------------------------------------------------
# Jacobi form and S functional
# ----------------------------------------------------------------------
class JacobiForm(BaseModel):
    matrix: List[List[float]]
    rank: int
    signature: Tuple[int, int] = Field(..., description="(positive, negative) eigenvalue counts.")


def jacobi_matrix(m: ModelLike, xi: Vector) -> linalg.Matrix:
    n = m.dim
    J = linalg.zeros(n, n)
    for (i, a, b, j), v in m.tensors[0].items():
        weight = xi[i] * xi[j]
        if weight:
            J[a][b] = J[a][b] + weight * v
    return J


def jacobi_form(m: ModelLike, xi: Vector) -> JacobiForm:
    """J_xi(eta1, eta2) = B^0(xi, eta1, eta2, xi)."""
    if len(xi) != m.dim:
        raise ModelError(f"vector of length {len(xi)} does not live on a {m.dim}-dimensional model")
    J = jacobi_matrix(m, xi)
    return JacobiForm(matrix=[[float(v) for v in row] for row in J], rank=linalg.rank(J),
                      signature=linalg.signature(J))


def s_functional(am: ModelLike, xi: Vector) -> List[Scalar]:
    """S_xi(eta) = B^1(X, xi, xi, X; eta)."""
    if am.k < 1:
        raise ModelError("the S functional needs the first covariant derivative (k >= 1)")
    if len(xi) != am.dim:
        raise ModelError(f"vector of length {len(xi)} does not live on a {am.dim}-dimensional model")
    S: List[Scalar] = [Fraction(0)] * am.dim
    for (x1, a, b, x2, c), v in am.tensors[1].items():
        if x1 == 0 and x2 == 0:
            S[c] = S[c] + xi[a] * xi[b] * v
    return S


# ----------------------------------------------------------------------
# Orbit maps
# ----------------------------------------------------------------------
def _positions(p: int):
    y, yt = 1, p + 2
    zs = [1 + i for i in range(1, p + 1)]
    zts = [yt + i for i in range(1, p + 1)]
    return y, zs, yt, zts


def x_orbit_condition(p: int, k: int, xi: Vector) -> bool:
    """xi is reached from X by the isotropy group of the affine model."""
    y, zs, _, _ = _positions(p)
    a = xi[0]
    if a == 0 or (k == p + 2 and a * a != 1):
        return False
    if k >= 1 and (xi[y] != 0 or any(xi[zs[i]] != 0 for i in range(min(k, p)))):
        return False
    return True


def double_isotropy_condition(p: int, k: int, xi: Vector) -> bool:
    """xi is reached from Y by the stabilizer of X; for k = 0 the test is sufficient only."""
    y, zs, yt, zts = _positions(p)
    b0 = xi[y]
    if xi[0] != 0 or b0 == 0:
        return False
    if b0 * xi[yt] + sum(xi[zs[i]] * xi[zts[i]] for i in range(p)) != 0:
        return False
    if any(xi[zs[i]] != 0 for i in range(min(k, p))):
        return False
    if k == p + 1 and b0 ** (p + 3) != 1:
        return False
    if k == p + 2 and b0 != 1:
        return False
    return True


def _x_orbit_map(p: int, xi: Vector) -> linalg.Matrix:
    y, zs, yt, zts = _positions(p)
    n = affine_dim(p)
    a2 = xi[0] * xi[0]
    eps0 = nth_root(1 / a2, p + 3) if a2 > 0 else None
    g = linalg.zeros(n, n)
    for row in range(n):
        g[row][0] = xi[row]
    g[y][y] = eps0
    g[yt][yt] = 1 / (a2 * eps0)
    for i in range(p):
        eps = 1 / (a2 * eps0 ** (i + 2))
        g[zs[i]][zs[i]] = eps
        g[zts[i]][zts[i]] = 1 / (eps * a2)
    return g


def _double_isotropy_map(p: int, xi: Vector) -> linalg.Matrix:
    y, zs, yt, zts = _positions(p)
    n = affine_dim(p)
    b0 = xi[y]
    g = linalg.zeros(n, n)
    g[0][0] = Fraction(1)
    for row in range(n):
        g[row][y] = xi[row]
    g[yt][yt] = 1 / b0
    for i in range(p):
        eps = 1 / b0 ** (i + 2)
        g[zs[i]][zs[i]] = eps
        g[yt][zs[i]] = -eps * xi[zts[i]] / b0
        g[zts[i]][zts[i]] = 1 / eps
        g[yt][zts[i]] = -xi[zs[i]] / (b0 * eps)
    return g


def construct_orbit_map(p: int, k: int, xi: Vector, double_isotropy: bool = False,
                        tolerance: float = DEFAULT_TOLERANCE) -> LinearMap:
    """
    An element g of the isotropy group of A_{3+2p,k} with gX = xi, or, in the
    double-isotropy variant, with gX = X and gY = xi.

    Raises:
        NoMap: when xi lies outside the orbit the explicit map reaches.
    """
    am = affine_model(p, k)
    if len(xi) != am.dim:
        raise ModelError(f"vector of length {len(xi)} does not live on the {am.dim}-dimensional affine model")
    if double_isotropy:
        if not double_isotropy_condition(p, k, xi):
            raise NoMap(f"vector is outside the orbit of Y under the stabilizer of X (p={p}, k={k})")
        g = LinearMap(_double_isotropy_map(p, xi))
    else:
        if not x_orbit_condition(p, k, xi):
            raise NoMap(f"vector is outside the orbit of X (p={p}, k={k})")
        g = LinearMap(_x_orbit_map(p, xi))
    check = verify_isomorphism(g, am, am, tolerance)
    if not check.ok:
        raise NoMap(f"orbit map fails verification with residual {check.residual}")
    return g


def lift_affine_isometry(g0: LinearMap, gamma: linalg.Matrix, p: int, k: int,
                         tolerance: float = DEFAULT_TOLERANCE) -> LinearMap:
    """
    Lift g0 in the isotropy group of A_{3+2p,k} to M_{6+4p,k}: the starred
    correction is g0^{-T} gamma and the dual block g0^{-T}.
    """
    n = affine_dim(p)
    if g0.n != n or len(gamma) != n or any(len(row) != n for row in gamma):
        raise ModelError(f"lift needs {n}x{n} matrices")
    if any(gamma[i][j] != -gamma[j][i] for i in range(n) for j in range(n)):
        raise ModelError("gamma must be skew-symmetric")
    am = affine_model(p, k)
    if not verify_isomorphism(g0, am, am, tolerance).ok:
        raise ModelError("g0 does not preserve the affine model")
    inverse_transpose = linalg.transpose(linalg.invert(g0.matrix))
    lifted = lift_affine_map(g0.matrix, None, correction=linalg.matmul(inverse_transpose, gamma))
    check = verify_isomorphism(lifted, standard_model(p, k), standard_model(p, k), tolerance)
    if not check.ok:
        raise ModelError(f"lifted map fails verification with residual {check.residual}")
    return lifted


def sample_xi(rng: np.random.Generator, p: int, low: int = -3, high: int = 3,
              zero_probability: float = 0.4) -> List[Fraction]:
    """Random integer vector on the affine span; entries vanish with the given probability."""
    values = rng.integers(low, high + 1, size=affine_dim(p))
    mask = rng.random(affine_dim(p)) < zero_probability
    return [Fraction(0) if masked else Fraction(int(v)) for v, masked in zip(values, mask)]


class OrbitSweep(BaseModel):
    p: int
    k: int
    samples: int
    reachable: int = Field(..., description="Vectors the explicit X-orbit map reached.")
    unreachable: int = Field(..., description="Vectors rejected with NoMap.")
    mismatches: List[List[str]] = Field(
        default_factory=list, description="Vectors where the orbit test, the map and the Jacobi rank disagree."
    )

    @property
    def passed(self) -> bool:
        return not self.mismatches


def orbit_dichotomy_sweep(p: int, k: int, rng: np.random.Generator, samples: int = 100,
                          tolerance: float = DEFAULT_TOLERANCE) -> OrbitSweep:
    """
    For random xi: the X-orbit test agrees with construct_orbit_map, and
    J_xi has rank >= 2 exactly when the X component of xi is nonzero.
    """
    if samples < 1:
        raise ModelError(f"samples must be positive, got {samples}")
    am = affine_model(p, k)
    reachable, unreachable, mismatches = 0, 0, []
    for _ in range(samples):
        xi = sample_xi(rng, p)
        expected = x_orbit_condition(p, k, xi)
        try:
            built = construct_orbit_map(p, k, xi, tolerance=tolerance).column(0) == xi
            reachable += 1
        except NoMap:
            built = False
            unreachable += 1
        jacobi_agrees = (jacobi_form(am, xi).rank >= 2) == (xi[0] != 0)
        if built != expected or not jacobi_agrees:
            mismatches.append([str(v) for v in xi])
    logger.info("Orbit sweep p=%d k=%d: %d reachable, %d unreachable, %d mismatches",
                p, k, reachable, unreachable, len(mismatches))
    return OrbitSweep(p=p, k=k, samples=samples, reachable=reachable, unreachable=unreachable,
                      mismatches=mismatches)
