from fractions import Fraction

import pytest

from config import load_settings
from errors import InvariantError
from exprs import Y, Expr, Point
from invariants import (PsiProfile, Verdict, alpha, classify, is_excluded_exponential,
                        positive_exponential_sum, positivity_failure, verify_alpha_as_curvature)
from scenario import parse_expression

MIXED = "exp(y) + exp(2*y)"


def profile(p, text):
    return PsiProfile(p, parse_expression(text))


def test_alpha_closed_form_at_zero():
    # psi^(n)(0) = 1 + 2^n
    assert alpha(profile(1, MIXED), 2).at(0) == Fraction(65 * 17, 33 ** 2) == Fraction(1105, 1089)
    assert alpha(profile(1, MIXED), 3).at(0) == Fraction(129 * 17 ** 2, 33 ** 3)
    assert alpha(profile(2, MIXED), 2).at(0) == Fraction(129 * 33, 65 ** 2)


def test_alpha_needs_nu_at_least_two():
    with pytest.raises(InvariantError):
        alpha(profile(1, MIXED), 1)


def test_alpha_is_constant_for_a_pure_exponential():
    for nu in (2, 3, 4):
        expression = alpha(profile(1, "3*exp(2*y)"), nu)
        assert expression.is_constant()
        assert expression.at(0) == 1
        assert expression.at(Fraction(3, 2)) == pytest.approx(1.0)
    assert not alpha(profile(1, MIXED), 2).is_constant()


def test_polynomial_shift_invariance():
    base = profile(2, MIXED)
    shifted = PsiProfile(2, base.psi + parse_expression("7*y^4 - y^2 + 3"))
    for nu in (2, 3):
        a, b = alpha(base, nu), alpha(shifted, nu)
        assert a.numerator == b.numerator
        assert a.denominator == b.denominator


def test_translation_covariance():
    psi = parse_expression("y^10 + y^9")
    moved = PsiProfile(1, psi.shift(Y, 1))
    original = PsiProfile(1, psi)
    for nu in (2, 3):
        assert alpha(moved, nu).at(0) == alpha(original, nu).at(1)
        assert alpha(moved, nu).at(Fraction(1, 2)) == alpha(original, nu).at(Fraction(3, 2))


def test_vanishing_denominator():
    with pytest.raises(InvariantError):
        alpha(profile(1, "y^10"), 2).at(0)


def test_profile_validation():
    with pytest.raises(InvariantError):
        PsiProfile(1, parse_expression("z1*y"))
    with pytest.raises(InvariantError):
        PsiProfile(0, Expr.exp(1))


def test_admissibility():
    assert positivity_failure(profile(1, MIXED), load_settings().positivity_grid) is None
    assert positivity_failure(profile(1, "-exp(y)"), load_settings().positivity_grid) is not None
    assert is_excluded_exponential(profile(1, "exp(2*y) + y^3"))
    assert not is_excluded_exponential(profile(1, MIXED))


def test_positive_exponential_sums_skip_the_scan():
    assert positive_exponential_sum(profile(1, MIXED).derivative(4))
    assert positivity_failure(profile(1, MIXED), []) is None
    assert positivity_failure(profile(1, "exp(-y) + 3"), []) is None
    assert not positive_exponential_sum(profile(1, "exp(y) - exp(2*y)").derivative(4))
    assert not positive_exponential_sum(profile(1, "y^5").derivative(4))
    assert positivity_failure(profile(1, "-exp(-y)"), load_settings().positivity_grid) is not None
    assert positivity_failure(profile(1, "y^5"), load_settings().positivity_grid) is not None


def test_classification():
    settings = load_settings()
    mixed = classify(profile(1, MIXED), settings)
    assert mixed.verdict is Verdict.ADMISSIBLE_NONHOMOGENEOUS
    assert mixed.witness_nu == 2
    assert mixed.witness_values[0] == "1105/1089"
    assert classify(profile(1, "exp(2*y)"), settings).verdict is Verdict.HOMOGENEOUS_EXCLUDED
    assert classify(profile(1, "-exp(y)"), settings).verdict is Verdict.INADMISSIBLE
    assert classify(profile(1, "y^2"), settings).failed_at is not None


@pytest.mark.parametrize("p,nu", [(1, 2), (1, 3), (2, 2)])
def test_alpha_read_off_the_curvature(p, nu):
    check = verify_alpha_as_curvature(profile(p, MIXED), nu)
    assert check.passed, check
    assert check.relative_error < 1e-8


SAMPLE_POINTS = [{}, {"y": Fraction(1, 2), "z1": 3}, {"x": 2, "y": Fraction(-3, 4), "zt1": Fraction(1, 3)}]


@pytest.mark.parametrize("p,nu", [(1, 2), (1, 3), (2, 2)])
@pytest.mark.parametrize("values", SAMPLE_POINTS)
def test_alpha_read_off_the_curvature_at_sample_points(p, nu, values):
    check = verify_alpha_as_curvature(profile(p, MIXED), nu, Point(p, values))
    assert check.passed, check
    assert check.observed == pytest.approx(float(alpha(profile(p, MIXED), nu).at(values.get("y", 0))), rel=1e-8)


def test_alpha_depends_only_on_y():
    plain = verify_alpha_as_curvature(profile(1, MIXED), 2, Point(1, {"y": Fraction(1, 2)}))
    moved = verify_alpha_as_curvature(profile(1, MIXED), 2,
                                      Point(1, {"y": Fraction(1, 2), "z1": 3, "x": 1, "yt": -2}))
    assert plain.passed and moved.passed
    assert moved.observed == pytest.approx(plain.observed, rel=1e-8)


def test_alpha_from_curvature_matches_exact_value():
    check = verify_alpha_as_curvature(profile(1, MIXED), 2)
    assert check.expected == pytest.approx(1105 / 1089)
    assert check.observed == pytest.approx(1105 / 1089, rel=1e-8)


def test_alpha_from_curvature_away_from_origin():
    check = verify_alpha_as_curvature(profile(1, MIXED), 2, Point(1, {"y": Fraction(1, 2), "z1": 3}))
    assert check.passed
    assert not check.exact


@pytest.mark.slow
def test_alpha_from_curvature_p2_nu3():
    assert verify_alpha_as_curvature(profile(2, MIXED), 3).passed


def test_excluded_profiles_need_opt_in():
    with pytest.raises(InvariantError):
        verify_alpha_as_curvature(profile(1, "exp(y)"), 2)
    check = verify_alpha_as_curvature(profile(1, "exp(y)"), 2, allow_excluded=True)
    assert check.passed
    assert check.expected == 1
    with pytest.raises(InvariantError):
        verify_alpha_as_curvature(profile(1, "-exp(y)"), 2)
