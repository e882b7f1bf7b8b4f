"""
alpha_nu invariants of the psi-deformed family and the admissibility checks on psi.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional

from pydantic import BaseModel, Field

from config import Settings, load_settings
from errors import InvariantError
from exprs import Y, Expr, Point, Scalar, differentiate_many
from geometry import build_metric, family_F
from models import evaluate_multilinear, extract_model, normalize_to_standard

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PsiProfile:
    p: int
    psi: Expr

    def __post_init__(self):
        if self.p < 1:
            raise InvariantError(f"p must be a positive integer, got {self.p}")
        if not self.psi.variables() <= {Y}:
            raise InvariantError("psi must depend on y only")

    def derivative(self, n: int) -> Expr:
        return differentiate_many(self.psi, [Y] * n)


@dataclass(frozen=True)
class AlphaExpression:
    """alpha_nu as numerator / denominator."""

    nu: int
    numerator: Expr
    denominator: Expr

    def at(self, y) -> Scalar:
        point = Point(1, {Y: y})
        denominator = self.denominator.evaluate(point)
        if denominator == 0:
            raise InvariantError(f"alpha_{self.nu} has a vanishing denominator at y={y}")
        return self.numerator.evaluate(point) / denominator

    def is_constant(self) -> bool:
        return self.numerator.proportional_to(self.denominator) is not None


def alpha(profile: PsiProfile, nu: int) -> AlphaExpression:
    """alpha_nu = psi^(nu+p+3) (psi^(p+3))^(nu-1) / (psi^(p+4))^nu."""
    if nu < 2:
        raise InvariantError(f"nu must be at least 2, got {nu}")
    p = profile.p
    base = profile.derivative(p + 3)
    step = base.differentiate(Y)
    top = differentiate_many(base, [Y] * nu)
    return AlphaExpression(nu, top * base ** (nu - 1), step ** nu)


class Verdict(str, Enum):
    HOMOGENEOUS_EXCLUDED = "homogeneous-excluded"
    ADMISSIBLE_NONHOMOGENEOUS = "admissible-nonhomogeneous"
    INADMISSIBLE = "inadmissible"
    INCONCLUSIVE = "inconclusive"


class Classification(BaseModel):
    verdict: Verdict
    witness_nu: Optional[int] = Field(default=None, description="nu with a non-constant alpha_nu.")
    witness_values: List[str] = Field(
        default_factory=list, description="alpha_nu at y=0 and y=1 for the witness."
    )
    failed_at: Optional[str] = Field(default=None, description="Grid point where positivity fails.")


def positive_exponential_sum(e: Expr) -> bool:
    """Nonzero sum of c*exp(m*y) with every c > 0, hence positive for all y."""
    terms = e.terms()
    return bool(terms) and all(not monomial and c > 0 for (monomial, _), c in terms.items())


def positivity_failure(profile: PsiProfile, grid: List[Fraction]) -> Optional[str]:
    """
    First grid point where psi^(p+3) or psi^(p+4) is not positive, or None.

    Derivatives that are positive exponential sums are accepted without the scan.
    """
    p = profile.p
    orders = [order for order in (p + 3, p + 4) if not positive_exponential_sum(profile.derivative(order))]
    for order in orders:
        derivative = profile.derivative(order)
        for y in grid:
            if derivative.evaluate(Point(1, {Y: y})) <= 0:
                return f"psi^({order})({y}) <= 0"
    return None


def is_excluded_exponential(profile: PsiProfile) -> bool:
    """psi^(p+3) is a single term a*exp(b*y)."""
    terms = profile.derivative(profile.p + 3).terms()
    if len(terms) != 1:
        return False
    (monomial, m), = terms
    return not monomial and m != 0


def _close(a: Scalar, b: Scalar, tolerance: float) -> bool:
    return abs(a - b) <= tolerance * max(1.0, abs(float(b)))


def classify(profile: PsiProfile, settings: Optional[Settings] = None) -> Classification:
    """Inadmissible, excluded exponential, or non-homogeneous with a witness nu."""
    settings = settings or load_settings()
    failure = positivity_failure(profile, settings.positivity_grid)
    if failure is not None:
        return Classification(verdict=Verdict.INADMISSIBLE, failed_at=failure)
    if is_excluded_exponential(profile):
        return Classification(verdict=Verdict.HOMOGENEOUS_EXCLUDED)
    for nu in range(2, settings.nu_max + 1):
        expression = alpha(profile, nu)
        first, second = expression.at(0), expression.at(1)
        if not _close(first, second, settings.alpha_tolerance):
            logger.info("alpha_%d is not constant: %s vs %s", nu, first, second)
            return Classification(verdict=Verdict.ADMISSIBLE_NONHOMOGENEOUS, witness_nu=nu,
                                  witness_values=[str(first), str(second)])
    return Classification(verdict=Verdict.INCONCLUSIVE)


class AlphaCheck(BaseModel):
    nu: int
    y: str
    expected: float = Field(..., description="alpha_nu from the closed form.")
    observed: float = Field(..., description="All-Y component of the curvature derivative in the normalized basis.")
    relative_error: float
    exact: bool
    passed: bool


def verify_alpha_as_curvature(profile: PsiProfile, nu: int, point: Optional[Point] = None,
                              settings: Optional[Settings] = None,
                              allow_excluded: bool = False) -> AlphaCheck:
    """
    Read alpha_nu off the curvature: normalize the (p+2)-model of N_psi at
    ``point`` to the standard one and evaluate nabla^(nu+p+1) R on
    (X', Y', Y', X'; Y', ..., Y').

    Raises:
        InvariantError: for an inadmissible or (unless allowed) excluded profile.
        NoSolution: when the point is degenerate.
    """
    settings = settings or load_settings()
    p = profile.p
    failure = positivity_failure(profile, settings.positivity_grid)
    if failure is not None:
        raise InvariantError(f"psi is inadmissible: {failure}")
    if is_excluded_exponential(profile) and not allow_excluded:
        raise InvariantError("psi^(p+3) is a pure exponential; pass allow_excluded to check it anyway")
    point = point or Point.origin(p)
    order = nu + p + 1
    g = build_metric(p, family_F(p, profile.psi))
    model = extract_model(g, point, order)
    phi, _ = normalize_to_standard(model.truncate(p + 2), p, p + 2, settings.tolerance)
    x_column, y_column = phi.column(0), phi.column(1)
    vectors = [x_column, y_column, y_column, x_column] + [y_column] * order
    observed = evaluate_multilinear(model.tensors[order], vectors)
    expected = alpha(profile, nu).at(point[Y])
    scale = max(1.0, abs(float(expected)))
    error = abs(float(observed) - float(expected)) / scale
    exact = isinstance(observed, Fraction) and isinstance(expected, Fraction)
    passed = observed == expected if exact else error <= settings.alpha_tolerance
    logger.info("alpha_%d at y=%s: closed form %s, curvature %s", nu, point[Y], expected, observed)
    return AlphaCheck(nu=nu, y=str(point[Y]), expected=float(expected), observed=float(observed),
                      relative_error=error, exact=exact, passed=passed)
