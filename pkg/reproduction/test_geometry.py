import pytest
import sympy

from errors import MetricError
from exprs import Y, Expr, Point, coordinates, z
from geometry import (Selector, build_metric, builtin_F, check_bianchi, check_closed_form,
                      check_pair_symmetries, check_second_bianchi, curvature_tensor, family_F,
                      is_at_most_quadratic, is_symmetric_space, metric_derivative, model_family_F,
                      signature, verify_inverse, weyl_report)
from scenario import parse_expression


def builtin_functions(p):
    return [model_family_F(p, k) for k in range(p + 3)]


def sympy_curvature(p, F, indices):
    """R_{ijkw} = g(R(d_i, d_j) d_k, d_w) computed from scratch with sympy."""
    names = [c.name for c in coordinates(p)]
    syms = sympy.symbols(names)
    n, half = len(syms), len(syms) // 2
    f = sympy.sympify(F.to_text().replace("^", "**"), locals=dict(zip(names, syms)))
    gxx = -2 * (f + syms[1] * syms[p + 2] + sum(syms[1 + i] * syms[p + 2 + i] for i in range(1, p + 1)))
    G = sympy.zeros(n, n)
    G[0, 0] = gxx
    for a in range(half):
        G[a, a + half] = G[a + half, a] = 1
    Ginv = G.inv()

    def gamma(c, a, b):
        return sum(Ginv[c, d] * (sympy.diff(G[d, b], syms[a]) + sympy.diff(G[d, a], syms[b])
                                 - sympy.diff(G[a, b], syms[d])) for d in range(n) if Ginv[c, d] != 0) / 2

    table = {(c, a, b): sympy.expand(gamma(c, a, b)) for c in range(n) for a in range(n) for b in range(n)}

    def up(l, k, i, j):
        value = sympy.diff(table[(l, j, k)], syms[i]) - sympy.diff(table[(l, i, k)], syms[j])
        value += sum(table[(l, i, m)] * table[(m, j, k)] - table[(l, j, m)] * table[(m, i, k)] for m in range(n))
        return value

    return {(i, j, k, w): sympy.expand(sum(G[l, w] * up(l, k, i, j) for l in range(n) if G[l, w] != 0))
            for (i, j, k, w) in indices}


def to_sympy(p, e):
    names = [c.name for c in coordinates(p)]
    return sympy.sympify(e.to_text().replace("^", "**"), locals=dict(zip(names, sympy.symbols(names))))


def test_builtin_functions():
    y, z1 = Expr.var(Y), Expr.var(z(1))
    assert builtin_F(1, Selector.K, 0).is_zero()
    assert builtin_F(1, Selector.K, 1) == z1 * y ** 2
    assert builtin_F(1, Selector.P_PLUS_1) == z1 * y ** 2 + y ** 4
    assert builtin_F(1, Selector.P_PLUS_2) == z1 * y ** 2 + Expr.exp(1)
    assert family_F(1, Expr.exp(2)) == z1 * y ** 2 + Expr.exp(2)
    with pytest.raises(MetricError):
        builtin_F(1, Selector.K, 2)
    with pytest.raises(MetricError):
        family_F(1, Expr.var(z(1)))
    with pytest.raises(MetricError):
        model_family_F(1, 4)


def test_forbidden_variables():
    with pytest.raises(MetricError):
        build_metric(1, parse_expression("x*y"))
    with pytest.raises(MetricError):
        build_metric(1, parse_expression("z2"))
    with pytest.raises(MetricError):
        build_metric(0, Expr.zero())


@pytest.mark.parametrize("p", [1, 2])
def test_metric_basics(p):
    for F in builtin_functions(p):
        g = build_metric(p, F)
        assert verify_inverse(g)
        assert g.connection.is_symmetric()
        assert metric_derivative(g).is_zero()
        assert signature(g, Point(p, {"y": 1})) == (3 + 2 * p, 3 + 2 * p)


@pytest.mark.parametrize("p", [1, 2])
def test_curvature_identities(p):
    for F in builtin_functions(p):
        g = build_metric(p, F)
        assert check_pair_symmetries(g) is None
        assert check_bianchi(g) is None
        assert check_second_bianchi(g) is None


def test_curvature_matches_sympy():
    F = parse_expression("z1*y^2 + exp(y)", 1)
    R = curvature_tensor(build_metric(1, F))
    indices = set(R.keys()) | {(i, j, k, w) for i in range(4) for j in range(4) for k in range(4) for w in range(4)}
    oracle = sympy_curvature(1, F, sorted(indices))
    for index, expected in oracle.items():
        assert sympy.expand(to_sympy(1, R[index]) - expected) == 0, R.label(index)


def test_top_curvature_component():
    F = parse_expression("z1*y^2", 1)
    R = curvature_tensor(build_metric(1, F))
    assert R[(0, 1, 1, 0)] == 2 * Expr.var(z(1))
    assert R[(1, 0, 1, 0)] == -2 * Expr.var(z(1))


@pytest.mark.parametrize("k", range(4))
def test_closed_form_p1(k):
    report = check_closed_form(1, model_family_F(1, k), 5)
    assert report.passed, [row.first_mismatch for row in report.rows if not row.passed]
    assert len(report.rows) == 6


@pytest.mark.parametrize("k", range(5))
def test_closed_form_p2(k):
    assert check_closed_form(2, model_family_F(2, k), 3).passed


@pytest.mark.slow
@pytest.mark.parametrize("p", [2, 3])
def test_closed_form_full_range(p):
    for F in builtin_functions(p):
        assert check_closed_form(p, F, p + 4).passed


def test_closed_form_of_psi_family():
    F = family_F(1, parse_expression("exp(y) + exp(2*y)"))
    assert check_closed_form(1, F, 4).passed


def test_closed_form_rejects_negative_order():
    with pytest.raises(MetricError):
        check_closed_form(1, Expr.zero(), -1)


@pytest.mark.parametrize("p", [1, 2])
def test_scalar_invariants_vanish(p):
    for F in builtin_functions(p):
        report = weyl_report(build_metric(p, F))
        assert report.passed, [row for row in report.rows if not row.vanishes]
        assert len(report.rows) == 5


QUADRATIC = ["0", "y^2", "z1*y", "y*z2 + 3*y^2", "z1^2", "z1*z2", "1 + y", "5", "y^2 - z1^2", "2*y*z1 + z2"]
NON_QUADRATIC = ["y^3", "z1*y^2", "exp(y)", "z1^3", "y*z1*z2", "y^4", "z2*y^3", "exp(-y)", "y^2*z1^2",
                 "exp(2*y) + y^2"]


@pytest.mark.parametrize("text", QUADRATIC + NON_QUADRATIC)
def test_symmetric_space_iff_quadratic(text):
    F = parse_expression(text, 2)
    assert is_symmetric_space(2, F) == (text in QUADRATIC)
    assert is_at_most_quadratic(F) == (text in QUADRATIC)
