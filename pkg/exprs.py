"""
Exact symbolic arithmetic for the expression class used by the metric family:
rational-coefficient polynomials in the coordinates, times exp(m*y) with
integer m.
"""
import logging
import math
import re
from enum import IntEnum
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Tuple, Union

from errors import EvaluationError

logger = logging.getLogger(__name__)

Scalar = Union[Fraction, float]


class Kind(IntEnum):
    X = 0
    Y = 1
    Z = 2
    YT = 3
    ZT = 4
    XS = 5
    YS = 6
    ZS = 7
    YTS = 8
    ZTS = 9


_PREFIX = {
    Kind.X: "x", Kind.Y: "y", Kind.Z: "z", Kind.YT: "yt", Kind.ZT: "zt",
    Kind.XS: "xs", Kind.YS: "ys", Kind.ZS: "zs", Kind.YTS: "yts", Kind.ZTS: "zts",
}
_KIND_BY_PREFIX = {prefix: kind for kind, prefix in _PREFIX.items()}
_INDEXED = frozenset({Kind.Z, Kind.ZT, Kind.ZS, Kind.ZTS})
_STAR_OFFSET = 5
_NAME_RE = re.compile(r"^([a-z]+)(\d*)$")


class Coordinate(NamedTuple):
    """A coordinate on R^{6+4p}; ``index`` is 1..p for the z-type kinds and 0 otherwise."""

    kind: Kind
    index: int = 0

    @property
    def name(self) -> str:
        return _PREFIX[self.kind] + (str(self.index) if self.kind in _INDEXED else "")

    @property
    def starred(self) -> bool:
        return self.kind >= Kind.XS

    def dual(self) -> "Coordinate":
        offset = -_STAR_OFFSET if self.starred else _STAR_OFFSET
        return Coordinate(Kind(self.kind + offset), self.index)

    def valid_for(self, p: int) -> bool:
        if self.kind in _INDEXED:
            return 1 <= self.index <= p
        return self.index == 0

    def position(self, p: int) -> int:
        """Index of this coordinate in the canonical ordering for ``p``."""
        base = Kind(self.kind - _STAR_OFFSET) if self.starred else self.kind
        offset = {Kind.X: 0, Kind.Y: 1, Kind.Z: 1, Kind.YT: p + 2, Kind.ZT: p + 2}[base]
        position = offset + (self.index if base in _INDEXED else 0)
        return position + (3 + 2 * p if self.starred else 0)

    @classmethod
    def parse(cls, name: str) -> "Coordinate":
        match = _NAME_RE.match(name.strip())
        if not match or match.group(1) not in _KIND_BY_PREFIX:
            raise ValueError(f"Unknown coordinate name: {name!r}")
        kind = _KIND_BY_PREFIX[match.group(1)]
        digits = match.group(2)
        if kind in _INDEXED:
            if not digits or int(digits) < 1:
                raise ValueError(f"Coordinate {name!r} needs an index >= 1")
            return cls(kind, int(digits))
        if digits:
            raise ValueError(f"Coordinate {name!r} takes no index")
        return cls(kind)

    def __repr__(self) -> str:
        return self.name


X = Coordinate(Kind.X)
Y = Coordinate(Kind.Y)
YT = Coordinate(Kind.YT)
XS = Coordinate(Kind.XS)
YS = Coordinate(Kind.YS)
YTS = Coordinate(Kind.YTS)


def z(i: int) -> Coordinate:
    return Coordinate(Kind.Z, i)


def zt(i: int) -> Coordinate:
    return Coordinate(Kind.ZT, i)


def zs(i: int) -> Coordinate:
    return Coordinate(Kind.ZS, i)


def zts(i: int) -> Coordinate:
    return Coordinate(Kind.ZTS, i)


def coordinates(p: int) -> Tuple[Coordinate, ...]:
    """All 6+4p coordinates in canonical order."""
    if p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")
    unstarred = [X, Y] + [z(i) for i in range(1, p + 1)] + [YT] + [zt(i) for i in range(1, p + 1)]
    return tuple(unstarred + [c.dual() for c in unstarred])


def coordinate_index(p: int) -> Dict[Coordinate, int]:
    return {c: i for i, c in enumerate(coordinates(p))}


def is_exact(value: Scalar) -> bool:
    return isinstance(value, (Fraction, int))


class Point:
    """An evaluation site in R^{6+4p}. Coordinates that are not given are 0.

    Values are exact rationals; a float value marks the point as a
    floating-point sample and makes every evaluation there inexact.
    """

    __slots__ = ("p", "_values")

    def __init__(self, p: int, values: Optional[Mapping[Union[Coordinate, str], object]] = None):
        self.p = p
        self._values: Dict[Coordinate, Scalar] = {}
        for key, raw in (values or {}).items():
            coord = Coordinate.parse(key) if isinstance(key, str) else key
            if not coord.valid_for(p):
                raise ValueError(f"Coordinate {coord.name} is not valid for p={p}")
            value = raw if isinstance(raw, float) else Fraction(str(raw) if isinstance(raw, str) else raw)
            if value != 0:
                self._values[coord] = value

    @classmethod
    def origin(cls, p: int) -> "Point":
        return cls(p)

    def __getitem__(self, coord: Coordinate) -> Scalar:
        return self._values.get(coord, Fraction(0))

    def items(self) -> Iterator[Tuple[Coordinate, Scalar]]:
        return iter(sorted(self._values.items()))

    @property
    def exact(self) -> bool:
        return all(is_exact(v) for v in self._values.values())

    def __repr__(self) -> str:
        inner = ", ".join(f"{c.name}={v}" for c, v in self.items())
        return f"Point(p={self.p}, {inner})"


Monomial = Tuple[Tuple[Coordinate, int], ...]
TermKey = Tuple[Monomial, int]


def _monomial(powers: Mapping[Coordinate, int]) -> Monomial:
    return tuple(sorted((c, k) for c, k in powers.items() if k))


def _monomial_product(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    powers = dict(a)
    for c, k in b:
        powers[c] = powers.get(c, 0) + k
    return _monomial(powers)


def _fraction_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class Expr:
    """
    Finite sum of ``coefficient * monomial * exp(m*y)`` in canonical form.

    Terms are keyed by (monomial, m); zero coefficients are never stored.
    Instances are immutable.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Mapping[TermKey, object]] = None):
        canon: Dict[TermKey, Fraction] = {}
        for (mono, m), c in (terms or {}).items():
            if isinstance(c, float):
                raise TypeError("Expr coefficients must be exact rationals")
            key = (_monomial(dict(mono)) if mono else (), int(m))
            total = canon.get(key, Fraction(0)) + Fraction(c)
            if total:
                canon[key] = total
            else:
                canon.pop(key, None)
        self._terms = canon
        self._hash = None

    @classmethod
    def _raw(cls, terms: Dict[TermKey, Fraction]) -> "Expr":
        e = cls.__new__(cls)
        e._terms = {k: v for k, v in terms.items() if v}
        e._hash = None
        return e

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------
    @classmethod
    def constant(cls, q) -> "Expr":
        return cls({((), 0): Fraction(q)})

    @classmethod
    def var(cls, coord: Coordinate, power: int = 1) -> "Expr":
        return cls({(((coord, power),), 0): Fraction(1)})

    @classmethod
    def exp(cls, m: int = 1) -> "Expr":
        """exp(m*y)."""
        return cls({((), int(m)): Fraction(1)})

    @classmethod
    def zero(cls) -> "Expr":
        return cls()

    # ------------------------------------------------------------------
    # Inspection
    # ------------------------------------------------------------------
    def terms(self) -> Dict[TermKey, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(key == ((), 0) for key in self._terms)

    def constant_value(self) -> Fraction:
        return self._terms.get(((), 0), Fraction(0))

    def has_exp(self) -> bool:
        return any(m for (_, m) in self._terms)

    def variables(self) -> FrozenSet[Coordinate]:
        """Coordinates the expression depends on; an exp factor counts as y."""
        found = set()
        for mono, m in self._terms:
            found.update(c for c, _ in mono)
            if m:
                found.add(Y)
        return frozenset(found)

    def total_degree(self) -> int:
        """Largest total polynomial degree among the terms (exp factors ignored)."""
        return max((sum(k for _, k in mono) for mono, _ in self._terms), default=0)

    def proportional_to(self, other: "Expr") -> Optional[Fraction]:
        """Return q with self == q*other, or None."""
        if other.is_zero():
            return None
        if self.is_zero():
            return Fraction(0)
        if self._terms.keys() != other._terms.keys():
            return None
        first = next(iter(self._terms))
        ratio = self._terms[first] / other._terms[first]
        for key, c in self._terms.items():
            if c != ratio * other._terms[key]:
                return None
        return ratio

    # ------------------------------------------------------------------
    # Arithmetic
    # ------------------------------------------------------------------
    @staticmethod
    def _coerce(value) -> "Expr":
        if isinstance(value, Expr):
            return value
        if isinstance(value, (int, Fraction)):
            return Expr.constant(value)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for key, c in other._terms.items():
            terms[key] = terms.get(key, Fraction(0)) + c
        return Expr._raw(terms)

    __radd__ = __add__

    def __neg__(self):
        return Expr._raw({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: Dict[TermKey, Fraction] = {}
        for (ma, ea), ca in self._terms.items():
            for (mb, eb), cb in other._terms.items():
                key = (_monomial_product(ma, mb), ea + eb)
                terms[key] = terms.get(key, Fraction(0)) + ca * cb
        return Expr._raw(terms)

    __rmul__ = __mul__

    def scale(self, q) -> "Expr":
        q = Fraction(q)
        return Expr._raw({k: c * q for k, c in self._terms.items()})

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("Only non-negative integer powers are supported")
        result, base = Expr.constant(1), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Expr.constant(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # ------------------------------------------------------------------
    # Calculus and substitution
    # ------------------------------------------------------------------
    def differentiate(self, coord: Coordinate) -> "Expr":
        terms: Dict[TermKey, Fraction] = {}
        for (mono, m), c in self._terms.items():
            for position, (var, k) in enumerate(mono):
                if var == coord:
                    lowered = mono[:position] + (((var, k - 1),) if k > 1 else ()) + mono[position + 1:]
                    key = (lowered, m)
                    terms[key] = terms.get(key, Fraction(0)) + c * k
                    break
            if m and coord == Y:
                key = (mono, m)
                terms[key] = terms.get(key, Fraction(0)) + c * m
        return Expr._raw(terms)

    def evaluate(self, point: Point) -> Scalar:
        """
        Value at ``point``: a Fraction when every exp argument is 0, else a float.

        Raises:
            EvaluationError: when a float term or the sum leaves the float range.
        """
        total: Scalar = Fraction(0)
        try:
            for (mono, m), c in self._terms.items():
                value: Scalar = c
                for var, k in mono:
                    value = value * point[var] ** k
                if m:
                    argument = m * point[Y]
                    if argument != 0:
                        value = value * math.exp(argument)
                total = total + value
        except OverflowError as e:
            raise EvaluationError(f"{self.to_text()} overflows at {point!r}: {e}") from e
        if isinstance(total, float) and not math.isfinite(total):
            raise EvaluationError(f"{self.to_text()} is not finite at {point!r}")
        return total

    def shift(self, coord: Coordinate, amount) -> "Expr":
        """Substitute ``coord -> coord + amount``."""
        amount = Fraction(amount)
        if amount == 0:
            return self
        terms: Dict[TermKey, Fraction] = {}
        for (mono, m), c in self._terms.items():
            if m and coord == Y:
                raise ValueError("exp(m*y) has no exact translate in y")
            powers = dict(mono)
            k = powers.pop(coord, 0)
            for j in range(k + 1):
                shifted = dict(powers)
                if j:
                    shifted[coord] = j
                key = (_monomial(shifted), m)
                terms[key] = terms.get(key, Fraction(0)) + c * math.comb(k, j) * amount ** (k - j)
        return Expr._raw(terms)

    # ------------------------------------------------------------------
    # Printing
    # ------------------------------------------------------------------
    def to_text(self) -> str:
        """Render in the concrete syntax accepted by the scenario parser."""
        if not self._terms:
            return "0"
        pieces: List[str] = []
        for (mono, m) in sorted(self._terms):
            c = self._terms[(mono, m)]
            factors = [var.name if k == 1 else f"{var.name}^{k}" for var, k in mono]
            if m:
                factors.append("exp(y)" if m == 1 else "exp(-y)" if m == -1 else f"exp({m}*y)")
            magnitude = abs(c)
            if not factors:
                body = _fraction_text(magnitude)
            elif magnitude == 1:
                body = "*".join(factors)
            else:
                body = _fraction_text(magnitude) + "*" + "*".join(factors)
            if not pieces:
                pieces.append(("-" if c < 0 else "") + body)
            else:
                pieces.append((" - " if c < 0 else " + ") + body)
        return "".join(pieces)

    def __repr__(self) -> str:
        return f"Expr({self.to_text()})"

    __str__ = to_text


def differentiate(e: Expr, c: Coordinate) -> Expr:
    return e.differentiate(c)


def differentiate_many(e: Expr, coords: Iterable[Coordinate]) -> Expr:
    for c in coords:
        e = e.differentiate(c)
        if e.is_zero():
            break
    return e


def evaluate(e: Expr, point: Point) -> Scalar:
    """Exact Fraction when every exp argument vanishes at an exact point, else float."""
    return e.evaluate(point)


def shift(e: Expr, c: Coordinate, amount) -> Expr:
    return e.shift(c, amount)
