import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import polynomial as npoly

from sgalab.jets import (
    Poly,
    TruncatedSeries,
    XJetScalar,
    _capped_pairs,
    definite_time_integral,
    monomials,
    series_invert_map,
)


def one_var(coeffs, order):
    return TruncatedSeries.from_coefficients({(k,): c for k, c in enumerate(coeffs) if c}, 1, order)


def dense(series, order):
    return np.array([series.coefficient((k,)) for k in range(order + 1)])


def random_series(rng, num_vars, order, min_degree=0):
    terms = {}
    for d in range(min_degree, order + 1):
        for e in monomials(num_vars, d):
            terms[tuple(int(v) for v in e)] = rng.normal()
    return TruncatedSeries.from_coefficients(terms, num_vars, order)


def exp_compose_oracle(q, order):
    """Truncated ``exp(q(p))`` by repeated numpy polynomial products."""
    total = np.zeros(order + 1)
    power = np.array([1.0])
    fact = 1.0
    for k in range(order + 1):
        if k:
            power = npoly.polymul(power, q)[: order + 1]
            fact *= k
        total[: len(power)] += power / fact
    return total


def test_one_plus_p_times_one_minus_p():
    out = one_var([1, 1], 3) * one_var([1, -1], 3)
    np.testing.assert_allclose(dense(out, 3), [1, 0, -1, 0])


def test_derivative_of_p_squared():
    np.testing.assert_allclose(dense(one_var([0, 0, 1], 3).deriv(0), 3), [0, 2, 0, 0])


def test_exp_series_composed_with_p_plus_p2():
    # exp(q) with q = p + p^2: frozen from exp_compose_oracle
    exp_series = one_var([1, 1, 1 / 2, 1 / 6], 3)
    out = exp_series.compose([one_var([0, 1, 1], 3)])
    np.testing.assert_allclose(dense(out, 3), [1, 1, 3 / 2, 7 / 6], rtol=1e-14)


def test_exp_oracle_agrees_with_frozen_values():
    np.testing.assert_allclose(exp_compose_oracle([0, 1, 1], 3), [1, 1, 3 / 2, 7 / 6], rtol=1e-14)


def test_compose_rejects_constant_term():
    with pytest.raises(ValueError, match="zero constant term"):
        one_var([1, 1], 3).compose([one_var([1, 1], 3)])


def test_from_coefficients_rejects_high_degree():
    with pytest.raises(ValueError, match="exceeds truncation order"):
        TruncatedSeries.from_coefficients({(4,): 1.0}, 1, 3)


def test_invert_identity_map():
    (g,) = series_invert_map([one_var([0, 1], 4)])
    np.testing.assert_allclose(dense(g, 4), [0, 1, 0, 0, 0])


def test_invert_p_plus_p2():
    (g,) = series_invert_map([one_var([0, 1, 1], 4)])
    np.testing.assert_allclose(dense(g, 4), [0, 1, -1, 2, -5], atol=1e-13)
    back = one_var([0, 1, 1], 4).compose([g])
    np.testing.assert_allclose(dense(back, 4), [0, 1, 0, 0, 0], atol=1e-13)


def test_invert_singular_linear_part():
    F = [
        TruncatedSeries.from_coefficients({(1, 0): 1.0, (0, 1): 1.0}, 2, 3),
        TruncatedSeries.from_coefficients({(1, 0): 2.0, (0, 1): 2.0, (2, 0): 1.0}, 2, 3),
    ]
    with pytest.raises(ValueError, match="singular"):
        series_invert_map(F)


@pytest.mark.parametrize(
    "coeffs, expected",
    [
        ([3.0], 3.0),
        ([0.0, 4.0], 2.0),
        ([0.0, 6.0, 6.0], 5.0),
    ],
)
def test_definite_time_integral(coeffs, expected):
    assert definite_time_integral(coeffs) == pytest.approx(expected, rel=1e-15)


def test_definite_time_integral_on_series():
    c = one_var([1, 2], 2)
    out = definite_time_integral([0 * c, c, c])
    np.testing.assert_allclose(dense(out, 2), [5 / 6, 5 / 3, 0])


@given(seed=st.integers(0, 2**32 - 1))
def test_ring_axioms_mod_truncation(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_series(rng, 2, 4) for _ in range(3))
    assert ((a * b) * c - a * (b * c)).max_abs() < 1e-12
    assert (a * b - b * a).max_abs() < 1e-13
    assert (a * (b + c) - (a * b + a * c)).max_abs() < 1e-13


@given(seed=st.integers(0, 2**32 - 1))
def test_inverse_is_two_sided(seed):
    rng = np.random.default_rng(seed)
    order = 5
    # well-conditioned linear part, random higher terms
    A = np.eye(2) + 0.3 * rng.uniform(-1, 1, size=(2, 2))
    F = [random_series(rng, 2, order, min_degree=2) * 0.5 for _ in range(2)]
    F = [f + TruncatedSeries.variable(0, 2, order) * A[i, 0] + TruncatedSeries.variable(1, 2, order) * A[i, 1] for i, f in enumerate(F)]
    G = series_invert_map(F)
    for i in range(2):
        ident = TruncatedSeries.variable(i, 2, order)
        assert (F[i].compose(G) - ident).max_abs() < 1e-10
        assert (G[i].compose(F) - ident).max_abs() < 1e-10


@given(seed=st.integers(0, 2**32 - 1))
def test_capped_pairs_match_full_grid(seed):
    rng = np.random.default_rng(seed)
    nv = 4
    caps = (((0, 1), int(rng.integers(1, 5))), ((2, 3), int(rng.integers(0, 4))))
    e1 = rng.integers(0, 4, size=(int(rng.integers(1, 30)), nv))
    e2 = rng.integers(0, 4, size=(int(rng.integers(1, 30)), nv))
    i, j = _capped_pairs(caps, e1, e2)
    got = sorted(zip(i.tolist(), j.tolist()))
    want = [
        (a, b)
        for a in range(len(e1))
        for b in range(len(e2))
        if all((e1[a, list(g)] + e2[b, list(g)]).sum() <= cap for g, cap in caps)
    ]
    assert got == sorted(want)


@given(seed=st.integers(0, 2**32 - 1))
def test_compose_matches_pointwise_substitution(seed):
    rng = np.random.default_rng(seed)
    outer = Poly.from_terms({(2, 0): rng.normal(), (1, 1): rng.normal(), (0, 3): rng.normal(), (0, 0): 1.0}, 2)
    inner = [
        Poly.from_terms({(1, 0, 0): rng.normal(), (0, 2, 1): rng.normal()}, 3),
        Poly.from_terms({(0, 1, 0): 1.0, (1, 0, 1): rng.normal()}, 3),
    ]
    point = rng.normal(size=3)
    direct = outer.evaluate([q.evaluate(point) for q in inner])
    np.testing.assert_allclose(outer.compose(inner).evaluate(point), direct, rtol=1e-12)


def test_poly_jet_matches_central_differences(rng):
    p = Poly.from_terms({(3, 0, 1): 0.7, (1, 2, 0): -1.3, (0, 1, 2): 0.4, (2, 0, 0): 2.0}, 3)
    x = rng.normal(size=3)
    val, grad, hess = p.jet(x)
    h = 1e-5
    fd_grad = np.array([(p.evaluate(x + h * e) - p.evaluate(x - h * e)) / (2 * h) for e in np.eye(3)])
    fd_hess = np.array([[(p.jet(x + h * e)[1][k] - p.jet(x - h * e)[1][k]) / (2 * h) for e in np.eye(3)] for k in range(3)])
    assert val == pytest.approx(p.evaluate(x))
    np.testing.assert_allclose(grad, fd_grad, rtol=1e-6)
    np.testing.assert_allclose(hess, fd_hess, rtol=1e-6)
    np.testing.assert_allclose(hess, hess.T, atol=1e-14)


def test_xjet_product_rule(rng):
    n = 2
    a = XJetScalar(0.3, rng.normal(size=n), np.eye(n))
    b = XJetScalar(-1.2, rng.normal(size=n), np.array([[0.5, 0.1], [0.1, -0.2]]))
    ab = a * b
    assert ab.value == pytest.approx(a.value * b.value)
    np.testing.assert_allclose(ab.grad_x, a.value * b.grad_x + b.value * a.grad_x)
    hess = a.value * b.hess_x + b.value * a.hess_x + np.outer(a.grad_x, b.grad_x) + np.outer(b.grad_x, a.grad_x)
    np.testing.assert_allclose(ab.hess_x, hess)


def test_truncation_drops_high_degrees():
    a = one_var([0, 1, 1], 3)
    cube = a * a * a * a
    assert all(sum(k) <= 3 for k in cube.coeffs)
    np.testing.assert_allclose(dense(cube, 3), [0, 0, 0, 0])
