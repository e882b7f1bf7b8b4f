"""
The metrics g_{6+4p,F}: construction, Levi-Civita connection, curvature,
covariant derivatives and the checks run against them.

Curvature convention: R(X,Y,Z,W) = g(R(X,Y)Z, W) with
R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]. Covariant derivatives put the
derivative slot last, so nabla^k R has rank 4+k.
"""
import logging
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, Field

import linalg
from errors import MetricError
from exprs import Y, YT, Coordinate, Expr, Point, Scalar, coordinate_index, coordinates, z, zt

logger = logging.getLogger(__name__)

Index = Tuple[int, ...]
HALF = Fraction(1, 2)


# ----------------------------------------------------------------------
# Warping functions
# ----------------------------------------------------------------------
class Selector(str, Enum):
    K = "k"
    P_PLUS_1 = "p+1"
    P_PLUS_2 = "p+2"
    PSI = "psi"


def _check_p(p: int) -> None:
    if not isinstance(p, int) or p < 1:
        raise MetricError(f"p must be a positive integer, got {p!r}")


def _polynomial_part(p: int, k: int) -> Expr:
    """z1*y^2 + ... + zk*y^(k+1)."""
    total = Expr.zero()
    for i in range(1, k + 1):
        total = total + Expr.var(z(i)) * Expr.var(Y, i + 1)
    return total


def family_F(p: int, psi: Expr) -> Expr:
    """f_psi = psi(y) + z1*y^2 + ... + zp*y^(p+1)."""
    _check_p(p)
    if not psi.variables() <= {Y}:
        names = ", ".join(sorted(c.name for c in psi.variables() - {Y}))
        raise MetricError(f"psi must depend on y only, found {names}")
    return psi + _polynomial_part(p, p)


def builtin_F(p: int, selector: Selector, value=None) -> Expr:
    """
    The warping functions of the curvature-homogeneous family.

    Args:
        p: Positive integer.
        selector: Which function; ``Selector.K`` takes the order k in ``value``
            and ``Selector.PSI`` takes the profile psi as an Expr.

    Returns:
        f_{p,k}, f_{p,p+1} (adds y^(p+3)), f_{p,p+2} (adds exp(y)) or f_psi.
    """
    _check_p(p)
    selector = Selector(selector)
    if selector is Selector.K:
        if value is None or not 0 <= int(value) <= p:
            raise MetricError(f"Selector k must lie in [0, {p}], got {value!r}")
        return _polynomial_part(p, int(value))
    if selector is Selector.P_PLUS_1:
        return _polynomial_part(p, p) + Expr.var(Y, p + 3)
    if selector is Selector.P_PLUS_2:
        return _polynomial_part(p, p) + Expr.exp(1)
    if not isinstance(value, Expr):
        raise MetricError("Selector psi needs an expression")
    return family_F(p, value)


def model_family_F(p: int, k: int) -> Expr:
    """Warping function of M_{6+4p,k} for 0 <= k <= p+2."""
    _check_p(p)
    if 0 <= k <= p:
        return builtin_F(p, Selector.K, k)
    if k == p + 1:
        return builtin_F(p, Selector.P_PLUS_1)
    if k == p + 2:
        return builtin_F(p, Selector.P_PLUS_2)
    raise MetricError(f"k must lie in [0, {p + 2}], got {k}")


def is_at_most_quadratic(F: Expr) -> bool:
    return not F.has_exp() and F.total_degree() <= 2


# ----------------------------------------------------------------------
# Tensors
# ----------------------------------------------------------------------
class TensorField:
    """Sparse tensor on R^{6+4p}: absent components are zero."""

    __slots__ = ("p", "rank", "_components")

    def __init__(self, p: int, rank: int, components: Optional[Dict[Index, Expr]] = None):
        self.p = p
        self.rank = rank
        self._components = {i: e for i, e in (components or {}).items() if not e.is_zero()}

    @property
    def dim(self) -> int:
        return 6 + 4 * self.p

    def __getitem__(self, index: Index) -> Expr:
        return self._components.get(tuple(index), Expr.zero())

    def items(self) -> Iterator[Tuple[Index, Expr]]:
        return iter(self._components.items())

    def keys(self):
        return self._components.keys()

    def __len__(self) -> int:
        return len(self._components)

    def is_zero(self) -> bool:
        return not self._components

    def evaluate(self, point: Point) -> Dict[Index, Scalar]:
        values = {}
        for index, e in self._components.items():
            value = e.evaluate(point)
            if value != 0:
                values[index] = value
        return values

    def label(self, index: Index) -> str:
        names = [coordinates(self.p)[i].name for i in index]
        head = ",".join(names[:4])
        return f"({head};{','.join(names[4:])})" if len(names) > 4 else f"({head})"

    def first_difference(self, other: "TensorField") -> Optional[Index]:
        for index in sorted(set(self._components) | set(other._components)):
            if self[index] != other[index]:
                return index
        return None


class Connection:
    """Christoffel symbols Gamma^c_{ab}, stored under both (c,a,b) and (c,b,a)."""

    def __init__(self, p: int, symbols: Dict[Tuple[int, int, int], Expr]):
        self.p = p
        self._symbols = {key: e for key, e in symbols.items() if not e.is_zero()}
        self.by_upper: Dict[int, List[Tuple[int, int, Expr]]] = {}
        self.by_last_lower: Dict[int, List[Tuple[int, int, Expr]]] = {}
        for (c, a, b), e in self._symbols.items():
            self.by_upper.setdefault(c, []).append((a, b, e))
            self.by_last_lower.setdefault(b, []).append((c, a, e))

    def __getitem__(self, key: Tuple[int, int, int]) -> Expr:
        return self._symbols.get(tuple(key), Expr.zero())

    def items(self) -> Iterator[Tuple[Tuple[int, int, int], Expr]]:
        return iter(self._symbols.items())

    def is_symmetric(self) -> bool:
        return all(self[(c, b, a)] == e for (c, a, b), e in self._symbols.items())


def _accumulate(target: Dict, key, value: Expr) -> None:
    current = target.get(key)
    target[key] = value if current is None else current + value


def _prune(components: Dict) -> Dict:
    return {k: e for k, e in components.items() if not e.is_zero()}


# ----------------------------------------------------------------------
# Metric
# ----------------------------------------------------------------------
class MetricField:
    """
    g_{6+4p,F}: g(dx,dx) = -2(F + y*yt + sum z_i*zt_i), every coordinate paired
    with its starred partner with value 1, everything else 0.
    """

    def __init__(self, p: int, F: Expr):
        self.p = p
        self.F = F
        self.index = coordinate_index(p)
        gxx = F + Expr.var(Y) * Expr.var(YT)
        for i in range(1, p + 1):
            gxx = gxx + Expr.var(z(i)) * Expr.var(zt(i))
        self.gxx = gxx.scale(-2)
        n = self.dim
        half = 3 + 2 * p
        components: Dict[Tuple[int, int], Expr] = {(0, 0): self.gxx}
        one = Expr.constant(1)
        for a in range(half):
            components[(a, a + half)] = one
            components[(a + half, a)] = one
        self.components = _prune(components)
        self.rows: Dict[int, List[Tuple[int, Expr]]] = {}
        for (a, b), e in self.components.items():
            self.rows.setdefault(a, []).append((b, e))
        self._tower: List[TensorField] = []
        logger.debug("Built metric p=%d, dim=%d, F=%s", p, n, F.to_text())

    @property
    def dim(self) -> int:
        return 6 + 4 * self.p

    def component(self, a: int, b: int) -> Expr:
        return self.components.get((a, b), Expr.zero())

    def matrix_at(self, point: Point) -> linalg.Matrix:
        n = self.dim
        matrix = [[Fraction(0)] * n for _ in range(n)]
        for (a, b), e in self.components.items():
            matrix[a][b] = e.evaluate(point)
        return matrix

    def as_tensor(self) -> TensorField:
        return TensorField(self.p, 2, dict(self.components))

    @cached_property
    def inverse(self) -> TensorField:
        return inverse_metric(self)

    @cached_property
    def connection(self) -> Connection:
        return christoffel(self)

    @cached_property
    def riemann_up(self) -> Dict[Index, Expr]:
        """R^l_{k i j}, keyed (l, k, i, j): the dl-component of R(di, dj)dk."""
        return _curvature_up(self.connection, self.index)

    def tower(self, order: int) -> List[TensorField]:
        """[R, nabla R, ..., nabla^order R], computed once and cached."""
        if not self._tower:
            self._tower.append(_lower_curvature(self, self.riemann_up))
        while len(self._tower) <= order:
            logger.info("Computing nabla^%d R for p=%d", len(self._tower), self.p)
            self._tower.append(covariant_derivative(self._tower[-1], self.connection))
        return self._tower[: order + 1]


def build_metric(p: int, F: Expr) -> MetricField:
    """
    Args:
        p: Positive integer; the manifold has dimension 6+4p.
        F: Warping function in y, z1..zp only.

    Raises:
        MetricError: if F references any other coordinate or z_i with i > p.
    """
    _check_p(p)
    allowed = {Y} | {z(i) for i in range(1, p + 1)}
    forbidden = F.variables() - allowed
    if forbidden:
        names = ", ".join(sorted(c.name for c in forbidden))
        raise MetricError(f"F may depend on y, z1..z{p} only; found {names}")
    return MetricField(p, F)


def inverse_metric(g: MetricField) -> TensorField:
    """Closed-form inverse: g^{x xs} = 1, g^{xs xs} = -g_xx, every other pairing 1."""
    half = 3 + 2 * g.p
    one = Expr.constant(1)
    components: Dict[Index, Expr] = {(half, half): -g.gxx}
    for a in range(half):
        components[(a, a + half)] = one
        components[(a + half, a)] = one
    return TensorField(g.p, 2, components)


def verify_inverse(g: MetricField) -> bool:
    """Symbolic check that g * g^{-1} is the identity."""
    inverse_rows: Dict[int, List[Tuple[int, Expr]]] = {}
    for (a, b), e in g.inverse.items():
        inverse_rows.setdefault(a, []).append((b, e))
    product: Dict[Tuple[int, int], Expr] = {}
    for (i, k), e in g.components.items():
        for j, f in inverse_rows.get(k, ()):
            _accumulate(product, (i, j), e * f)
    product = _prune(product)
    identity = {(i, i): Expr.constant(1) for i in range(g.dim)}
    return product == identity


def christoffel(g: MetricField) -> Connection:
    """Gamma^c_{ab} = 1/2 g^{cd}(d_a g_db + d_b g_da - d_d g_ab), built from the nonzero d g entries."""
    first: Dict[Tuple[int, int, int], Expr] = {}
    for (i, j), e in g.components.items():
        for var in e.variables():
            v = g.index[var]
            half_derivative = e.differentiate(var).scale(HALF)
            _accumulate(first, (i, v, j), half_derivative)
            _accumulate(first, (i, j, v), half_derivative)
            _accumulate(first, (v, i, j), -half_derivative)
    inverse_rows: Dict[int, List[Tuple[int, Expr]]] = {}
    for (c, d), e in g.inverse.items():
        inverse_rows.setdefault(d, []).append((c, e))
    symbols: Dict[Tuple[int, int, int], Expr] = {}
    for (d, a, b), e in _prune(first).items():
        for c, ginv in inverse_rows.get(d, ()):
            _accumulate(symbols, (c, a, b), ginv * e)
    connection = Connection(g.p, symbols)
    logger.debug("Connection for p=%d has %d nonzero symbols", g.p, len(connection._symbols))
    return connection


def _curvature_up(conn: Connection, index: Dict[Coordinate, int]) -> Dict[Index, Expr]:
    up: Dict[Index, Expr] = {}
    for (l, a, b), e in conn.items():
        for var in e.variables():
            derivative = e.differentiate(var)
            v = index[var]
            _accumulate(up, (l, b, v, a), derivative)
            _accumulate(up, (l, b, a, v), -derivative)
    for (m, j, k), first in conn.items():
        for l, i, second in conn.by_last_lower.get(m, ()):
            product = first * second
            _accumulate(up, (l, k, i, j), product)
            _accumulate(up, (l, k, j, i), -product)
    return _prune(up)


def _lower_curvature(g: MetricField, up: Dict[Index, Expr]) -> TensorField:
    lowered: Dict[Index, Expr] = {}
    for (l, k, i, j), e in up.items():
        for w, metric in g.rows.get(l, ()):
            _accumulate(lowered, (i, j, k, w), metric * e)
    return TensorField(g.p, 4, _prune(lowered))


def curvature_tensor(g: MetricField) -> TensorField:
    return g.tower(0)[0]


def covariant_derivative(T: TensorField, conn: Connection) -> TensorField:
    """(nabla T)_{I;j} = d_j T_I - sum_s Gamma^l_{j i_s} T_{I[s->l]}."""
    index = coordinate_index(T.p)
    out: Dict[Index, Expr] = {}
    for J, e in T.items():
        for var in e.variables():
            _accumulate(out, J + (index[var],), e.differentiate(var))
        for s, l in enumerate(J):
            for j, i, gamma in conn.by_upper.get(l, ()):
                _accumulate(out, J[:s] + (i,) + J[s + 1:] + (j,), -(gamma * e))
    return TensorField(T.p, T.rank + 1, _prune(out))


def curvature_tower(g: MetricField, order: int) -> List[TensorField]:
    return g.tower(order)


def metric_derivative(g: MetricField) -> TensorField:
    """nabla g; zero for the Levi-Civita connection."""
    return covariant_derivative(g.as_tensor(), g.connection)


def signature(g: MetricField, point: Point) -> Tuple[int, int]:
    return linalg.signature(g.matrix_at(point))


# ----------------------------------------------------------------------
# Closed form for nabla^k R
# ----------------------------------------------------------------------
def _fiber_coordinates(p: int) -> List[Coordinate]:
    return [Y] + [z(i) for i in range(1, p + 1)] + [YT] + [zt(i) for i in range(1, p + 1)]


def expected_closed_form(g: MetricField, k: int) -> TensorField:
    """nabla^k R(x,xi1,xi2,x;xi3..) = -1/2 d_xi1...d_xi(k+2) g_xx, with its curvature-symmetric variants."""
    fiber = _fiber_coordinates(g.p)

    def walk(prefix: Tuple[Coordinate, ...], e: Expr):
        if len(prefix) == k + 2:
            yield prefix, e
            return
        for c in fiber:
            derivative = e.differentiate(c)
            if not derivative.is_zero():
                yield from walk(prefix + (c,), derivative)

    components: Dict[Index, Expr] = {}
    for xis, derivative in walk((), g.gxx):
        value = derivative.scale(-HALF)
        a, b = g.index[xis[0]], g.index[xis[1]]
        rest = tuple(g.index[c] for c in xis[2:])
        components[(0, a, b, 0) + rest] = value
        components[(a, 0, b, 0) + rest] = -value
        components[(0, a, 0, b) + rest] = -value
        components[(a, 0, 0, b) + rest] = value
    return TensorField(g.p, 4 + k, components)


class ClosedFormRow(BaseModel):
    order: int = Field(..., description="k in nabla^k R.")
    components: int = Field(..., description="Number of nonzero computed components.")
    passed: bool
    first_mismatch: Optional[str] = Field(
        default=None, description="First component where computation and closed form differ."
    )


class ClosedFormReport(BaseModel):
    p: int
    F: str
    rows: List[ClosedFormRow] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)


def check_closed_form(p: int, F: Expr, k_max: int) -> ClosedFormReport:
    """Compare nabla^k R with the closed form for every k <= k_max, symbolically."""
    if k_max < 0:
        raise MetricError(f"k_max must be non-negative, got {k_max}")
    g = build_metric(p, F)
    report = ClosedFormReport(p=p, F=F.to_text())
    for k, computed in enumerate(g.tower(k_max)):
        expected = expected_closed_form(g, k)
        mismatch = computed.first_difference(expected)
        detail = None
        if mismatch is not None:
            detail = (f"nabla^{k} R{computed.label(mismatch)}: computed {computed[mismatch].to_text()}, "
                      f"expected {expected[mismatch].to_text()}")
            logger.warning("Closed form fails at order %d: %s", k, detail)
        report.rows.append(ClosedFormRow(order=k, components=len(computed), passed=mismatch is None,
                                         first_mismatch=detail))
    return report


# ----------------------------------------------------------------------
# Identities
# ----------------------------------------------------------------------
def check_pair_symmetries(g: MetricField) -> Optional[str]:
    R = curvature_tensor(g)
    for (a, b, c, d), e in R.items():
        if R[(b, a, c, d)] != -e or R[(c, d, a, b)] != e:
            return f"pair symmetry fails at R{R.label((a, b, c, d))}"
    return None


def check_bianchi(g: MetricField) -> Optional[str]:
    """First Bianchi identity; returns the first violating component or None."""
    R = curvature_tensor(g)
    for (a, b, c, d) in list(R.keys()):
        total = R[(a, b, c, d)] + R[(b, c, a, d)] + R[(c, a, b, d)]
        if not total.is_zero():
            return f"first Bianchi fails at R{R.label((a, b, c, d))}: {total.to_text()}"
    return None


def check_second_bianchi(g: MetricField) -> Optional[str]:
    DR = g.tower(1)[1]
    for (a, b, c, d, e) in list(DR.keys()):
        total = DR[(a, b, c, d, e)] + DR[(a, b, d, e, c)] + DR[(a, b, e, c, d)]
        if not total.is_zero():
            return f"second Bianchi fails at nabla R{DR.label((a, b, c, d, e))}: {total.to_text()}"
    return None


def is_symmetric_space(p: int, F: Expr) -> bool:
    """True iff nabla R vanishes identically."""
    g = build_metric(p, F)
    return g.tower(1)[1].is_zero()


# ----------------------------------------------------------------------
# Scalar invariants
# ----------------------------------------------------------------------
WEYL_FAMILY = (
    "scalar_curvature",
    "ricci_norm",
    "riemann_norm",
    "riemann_cubic",
    "laplacian_scalar_curvature",
)


def _raise_slot(components: Dict[Index, Expr], slot: int,
                inverse_rows: Dict[int, List[Tuple[int, Expr]]]) -> Dict[Index, Expr]:
    raised: Dict[Index, Expr] = {}
    for index, e in components.items():
        for c, ginv in inverse_rows.get(index[slot], ()):
            _accumulate(raised, index[:slot] + (c,) + index[slot + 1:], ginv * e)
    return _prune(raised)


def weyl_scalars(g: MetricField) -> List[Tuple[str, Expr]]:
    """
    Five scalar invariants: scalar curvature, |Ric|^2, |R|^2, the cubic trace
    R_ab^cd R_cd^ef R_ef^ab and the Laplacian of the scalar curvature.
    """
    inverse_rows: Dict[int, List[Tuple[int, Expr]]] = {}
    for (a, b), e in g.inverse.items():
        inverse_rows.setdefault(a, []).append((b, e))

    ricci: Dict[Index, Expr] = {}
    for (l, k, i, j), e in g.riemann_up.items():
        if l == i:
            _accumulate(ricci, (j, k), e)
    ricci = _prune(ricci)
    tau = Expr.zero()
    for (a, b), e in ricci.items():
        tau = tau + g.inverse[(a, b)] * e

    ricci_up = _raise_slot(_raise_slot(ricci, 0, inverse_rows), 1, inverse_rows)
    ricci_norm = Expr.zero()
    for index, e in ricci.items():
        ricci_norm = ricci_norm + e * ricci_up.get(index, Expr.zero())

    R = dict(curvature_tensor(g).items())
    R_up = R
    for slot in range(4):
        R_up = _raise_slot(R_up, slot, inverse_rows)
    riemann_norm = Expr.zero()
    for index, e in R.items():
        riemann_norm = riemann_norm + e * R_up.get(index, Expr.zero())

    mixed = _raise_slot(_raise_slot(R, 2, inverse_rows), 3, inverse_rows)
    rows: Dict[Tuple[int, int], Dict[Tuple[int, int], Expr]] = {}
    for (a, b, c, d), e in mixed.items():
        rows.setdefault((a, b), {})[(c, d)] = e
    square: Dict[Tuple[int, int], Dict[Tuple[int, int], Expr]] = {}
    for pair, row in rows.items():
        acc: Dict[Tuple[int, int], Expr] = {}
        for middle, e in row.items():
            for target, f in rows.get(middle, {}).items():
                _accumulate(acc, target, e * f)
        square[pair] = acc
    cubic = Expr.zero()
    for pair, row in square.items():
        for middle, e in row.items():
            closing = rows.get(middle, {}).get(pair)
            if closing is not None:
                cubic = cubic + e * closing

    laplacian = Expr.zero()
    for (a, b), ginv in g.inverse.items():
        a_var, b_var = coordinates(g.p)[a], coordinates(g.p)[b]
        term = tau.differentiate(b_var).differentiate(a_var)
        for c_index, var in enumerate(coordinates(g.p)):
            gamma = g.connection[(c_index, a, b)]
            if not gamma.is_zero():
                term = term - gamma * tau.differentiate(var)
        laplacian = laplacian + ginv * term

    values = [tau, ricci_norm, riemann_norm, cubic, laplacian]
    return list(zip(WEYL_FAMILY, values))


class WeylRow(BaseModel):
    name: str
    value: str
    vanishes: bool


class WeylReport(BaseModel):
    p: int
    rows: List[WeylRow] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.vanishes for row in self.rows)


def weyl_report(g: MetricField) -> WeylReport:
    report = WeylReport(p=g.p)
    for name, value in weyl_scalars(g):
        report.rows.append(WeylRow(name=name, value=value.to_text(), vanishes=value.is_zero()))
    return report
