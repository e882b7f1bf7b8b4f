from fractions import Fraction

import numpy as np
import pytest

import linalg
import stabilizer
from errors import InvariantError, ModelError, NoMap
from exprs import Point
from geometry import build_metric, model_family_F
from models import LinearMap, affine_dim, affine_model, extract_model, standard_model
from stabilizer import (DerivationConstraintSystem, StabilizerResult, check_bracket_closure,
                        claimed_isometry_dim, construct_orbit_map, derivation_action,
                        double_isotropy_condition, expected_affine_stabilizer_dim, expected_isometry_dim,
                        in_span, jacobi_form, lift_affine_isometry, lift_gap, manifold_isometry_dims,
                        okp_algebra, okp_dim, okp_formula, orbit_dichotomy_sweep, orbit_tangent_dim,
                        s_functional, sample_xi, stabilizer_dim, x_orbit_condition)
from scenario import TaskSpec, make_config
from workbench import run_task


def unit(n, i):
    return [Fraction(int(j == i)) for j in range(n)]


def test_model_stabilizers_p1():
    assert [stabilizer_dim(standard_model(1, k)).dim for k in range(4)] == [21, 15, 14, 13]
    assert [stabilizer_dim(affine_model(1, k)).dim for k in range(4)] == [11, 5, 4, 3]


@pytest.mark.parametrize("p", [1, 2, pytest.param(3, marks=pytest.mark.slow)])
def test_gap_between_model_and_affine_stabilizers(p):
    for k in range(p + 3):
        model = stabilizer_dim(standard_model(p, k)).dim
        affine = stabilizer_dim(affine_model(p, k)).dim
        assert model - affine == lift_gap(p) == (p + 1) * (2 * p + 3)
        assert affine == expected_affine_stabilizer_dim(p, k)


def test_isometry_table_p1():
    table = manifold_isometry_dims(1)
    assert table.passed
    assert [row.computed for row in table.rows] == [31, 25, 24, 23, 22]
    assert [row.published for row in table.rows] == [31, 29, 28, 27, 26]
    assert table.rows[-1].label == "N"


def test_isometry_table_p2():
    table = manifold_isometry_dims(2)
    assert table.passed
    computed = [row.computed for row in table.rows]
    assert computed == [57, 47, 43, 42, 41, 40]
    assert [row.published for row in table.rows] == [57, 51, 49, 48, 47, 46]
    assert computed == sorted(computed, reverse=True)
    assert computed[-3] - computed[-2] == computed[-2] - computed[-1] == 1


@pytest.mark.slow
def test_isometry_table_p3():
    table = manifold_isometry_dims(3)
    assert table.passed
    assert [row.computed for row in table.rows] == [91, 77, 71, 66, 65, 64, 63]


def test_published_and_computed_agree_at_k0():
    for p in (1, 2, 3, 4):
        assert claimed_isometry_dim(p, 0) == expected_isometry_dim(p, 0)
        assert claimed_isometry_dim(p, None) == claimed_isometry_dim(p, p + 2) - 1
        assert expected_isometry_dim(p, None) == expected_isometry_dim(p, p + 2) - 1


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_okp(p):
    for k in range(p + 1):
        assert okp_dim(p, k) == okp_formula(p, k) == (2 * p - k) * (2 * p - k - 1) // 2
        assert orbit_tangent_dim(p, k) == 2 * p - k - 1
    with pytest.raises(ModelError):
        okp_algebra(p, p + 1)


@pytest.mark.parametrize("k", range(4))
def test_basis_annihilates_the_model(k):
    m = standard_model(1, k)
    result = stabilizer_dim(m)
    assert check_bracket_closure(result)
    for A in result.basis:
        for tensor in m.tensors:
            assert derivation_action(A, tensor) == {}
        pulled = linalg.matmul(linalg.transpose(A), m.inner)
        assert all(pulled[i][j] + pulled[j][i] == 0 for i in range(m.dim) for j in range(m.dim))


def test_bracket_closure_p2_affine():
    for k in range(5):
        assert check_bracket_closure(stabilizer_dim(affine_model(2, k)))


def test_okp_rejects_a_dimension_off_the_closed_form(monkeypatch):
    genuine = okp_algebra(2, 1)
    tampered = StabilizerResult(genuine.n, genuine.dim - 1, genuine.basis[:-1], genuine.constraint_rank)
    monkeypatch.setattr(stabilizer, "okp_algebra", lambda p, k: tampered)
    with pytest.raises(InvariantError):
        okp_dim(2, 1)
    config = make_config(name="okp", p=2)
    result = run_task(config, TaskSpec(index=1, name="okp", params={"k": "1"}))
    assert result.status == "fail"
    assert result.values["formula"] == okp_formula(2, 1)


def test_in_span():
    result = stabilizer_dim(affine_model(1, 3))
    assert in_span(result, result.basis[0])
    assert not in_span(result, linalg.identity(5))


def test_derivation_action_on_a_single_entry():
    A = linalg.zeros(2, 2)
    A[0][1] = Fraction(1)
    assert derivation_action(A, {(0, 0): Fraction(1)}) == {(1, 0): 1, (0, 1): 1}
    A = linalg.identity(2)
    assert derivation_action(A, {(0, 1): Fraction(1)}) == {(0, 1): 2}


def test_inexact_models_are_rejected():
    m = extract_model(build_metric(1, model_family_F(1, 3)), Point(1, {"y": 1}), 3)
    assert not m.exact
    with pytest.raises(ModelError):
        DerivationConstraintSystem.for_model(m)


def test_jacobi_form_on_x():
    form = jacobi_form(affine_model(1, 0), unit(5, 0))
    assert form.rank == 4
    assert form.signature == (2, 2)
    with pytest.raises(ModelError):
        jacobi_form(affine_model(1, 0), unit(4, 0))


def test_s_functional():
    am = affine_model(1, 1)
    assert s_functional(am, unit(5, 1)) == [0, 0, 1, 0, 0]
    assert s_functional(am, unit(5, 3)) == [0, 0, 0, 0, 0]
    with pytest.raises(ModelError):
        s_functional(affine_model(1, 0), unit(5, 1))


@pytest.mark.parametrize("p", [1, 2])
def test_orbit_dichotomies(p):
    rng = np.random.default_rng(1729)
    for k in range(p + 3):
        am = affine_model(p, k)
        for _ in range(100):
            xi = sample_xi(rng, p)
            assert (jacobi_form(am, xi).rank >= 2) == (xi[0] != 0)
            if x_orbit_condition(p, k, xi):
                g = construct_orbit_map(p, k, xi)
                assert g.column(0) == xi
            else:
                with pytest.raises(NoMap):
                    construct_orbit_map(p, k, xi)


@pytest.mark.parametrize("p", [1, 2])
def test_orbit_dichotomy_sweep(p):
    for k in range(p + 3):
        sweep = orbit_dichotomy_sweep(p, k, np.random.default_rng(7), samples=40)
        assert sweep.passed, sweep.mismatches
        assert sweep.reachable + sweep.unreachable == 40
    again = orbit_dichotomy_sweep(1, 2, np.random.default_rng(7), samples=40)
    assert again == orbit_dichotomy_sweep(1, 2, np.random.default_rng(7), samples=40)
    with pytest.raises(ModelError):
        orbit_dichotomy_sweep(1, 2, np.random.default_rng(7), samples=0)



def null_vector(rng, p, k):
    """b0*Y + bt0*Yt + sum b_i Z_i + bt_i Zt_i with the isotropy conditions built in."""
    n = affine_dim(p)
    xi = [Fraction(0)] * n
    b0 = Fraction(int(rng.choice([-1, 1]))) if (p + 3) % 2 == 0 and k == p + 1 else Fraction(1)
    if k <= p:
        b0 = Fraction(int(rng.choice([-2, -1, 1, 3])))
    xi[1] = b0
    for i in range(1, p + 1):
        if i > min(k, p):
            xi[1 + i] = Fraction(int(rng.integers(-2, 3)))
        xi[p + 2 + i] = Fraction(int(rng.integers(-2, 3)))
    xi[p + 2] = -sum(xi[1 + i] * xi[p + 2 + i] for i in range(1, p + 1)) / b0
    return xi


@pytest.mark.parametrize("p", [1, 2])
def test_double_isotropy_maps(p):
    rng = np.random.default_rng(7)
    for k in range(1, p + 3):
        for _ in range(20):
            xi = null_vector(rng, p, k)
            assert double_isotropy_condition(p, k, xi)
            g = construct_orbit_map(p, k, xi, double_isotropy=True)
            assert g.column(0) == unit(affine_dim(p), 0)
            assert g.column(1) == xi
    bad = [Fraction(0)] * affine_dim(1)
    bad[1] = bad[3] = Fraction(1)
    with pytest.raises(NoMap):
        construct_orbit_map(1, 1, bad, double_isotropy=True)


def test_lift_affine_isometry():
    xi = [Fraction(v) for v in (1, 0, 0, 2, 3)]
    g0 = construct_orbit_map(1, 3, xi)
    assert g0.exact
    gamma = linalg.zeros(5, 5)
    gamma[0][3], gamma[3][0] = Fraction(2), Fraction(-2)
    gamma[1][4], gamma[4][1] = Fraction(-1), Fraction(1)
    lifted = lift_affine_isometry(g0, gamma, 1, 3)
    assert lifted.n == 10
    assert lifted.column(0)[:5] == xi

    with pytest.raises(ModelError):
        lift_affine_isometry(g0, linalg.identity(5), 1, 3)
    doubled = LinearMap([[2 * v for v in row] for row in linalg.identity(5)])
    with pytest.raises(ModelError):
        lift_affine_isometry(doubled, linalg.zeros(5, 5), 1, 3)
