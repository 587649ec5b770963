import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ball
from sgalab.cocycles import (
    Cochain1,
    Cochain2,
    CochainError,
    EnhancementFactor,
    _delta_1cochain_series,
    coboundary,
    coboundary_solve_pi0,
    delta0_poly,
    delta_add,
    delta_mult,
    gamma_cochain,
    graded_coboundary_solve,
    identity_axiom_check,
    log_gamma_cochain,
    mixed_hessian,
    mu_sigma,
    pair_groupoid_delta_mult,
    symmetry_and_vanest0,
    unit_propagation_check,
)
from sgalab.jets import Poly, monomials
from sgalab.poisson import builtin_structure
from sgalab.spray_groupoid import build_generating_function


def gf(name, order=10):
    return build_generating_function(builtin_structure(name), None, order)


def smooth_kappa(x, p):
    return np.exp(0.4 * p @ x + 0.3 * p[0] ** 2 - 0.2 * p[-1])


def random_primitive(rng, n, max_degree):
    terms = {}
    for k in range(2, max_degree + 1):
        for e in monomials(n, k):
            for xe in [(0,) * n] + [tuple(r) for r in monomials(n, 1)]:
                terms[tuple(int(v) for v in e) + xe] = float(rng.normal())
    return Poly.from_terms(terms, 2 * n)


def delta0_by_hand(hp, n, p1, p2, x):
    ev = lambda p: hp.evaluate(np.concatenate([p, x]))  # noqa: E731
    return ev(p1) + ev(p2) - ev(p1 + p2)


PAIR_SYM = Cochain2.from_poly(Poly.from_terms({(1, 0, 1, 0, 0, 0): 1.0, (0, 1, 0, 1, 0, 0): 1.0}, 6))
# x1 (p1_1 p2_2 - p1_2 p2_1)
PAIR_SKEW = Cochain2.from_poly(Poly.from_terms({(1, 0, 0, 1, 1, 0): 1.0, (0, 1, 1, 0, 1, 0): -1.0}, 6))


def test_constant_cochain_is_a_cocycle(rng):
    S = gf("so3")
    f = Cochain2.constant(2.5)
    assert delta_mult(f, S, *(ball(rng, 3, 0.2) for _ in range(3)), rng.normal(size=3)) == pytest.approx(1.0, abs=1e-15)


def test_zero_value_is_reported(rng):
    S = gf("zero")
    with pytest.raises(CochainError, match="zero value"):
        delta_mult(Cochain2.constant(0.0), S, *(ball(rng, 3, 0.2) for _ in range(3)), rng.normal(size=3))


@pytest.mark.parametrize("name", ["zero", "constant", "so3", "aff1"])
def test_coboundary_of_arrow_function_is_a_cocycle(name, rng):
    S = gf(name)
    n = S.dim
    f = coboundary(Cochain1(smooth_kappa), S)
    for _ in range(3):
        args = [ball(rng, n, 0.15) for _ in range(3)] + [rng.normal(size=n) * 0.5]
        assert delta_mult(f, S, *args) == pytest.approx(1.0, abs=1e-9)


def test_additive_double_differential_vanishes(rng):
    S = gf("sl2")
    h = coboundary(Cochain1(lambda x, p: np.sin(p @ x) + p[1] ** 3, additive=True), S)
    for _ in range(3):
        assert abs(delta_add(h, S, *(ball(rng, 3, 0.15) for _ in range(3)), rng.normal(size=3))) < 1e-9


def test_constant_arrow_function_has_constant_differential(rng):
    S = gf("so3")
    h = Cochain1(lambda x, p: 1.75, additive=True)
    assert delta_add(h, S, ball(rng, 3, 0.2), ball(rng, 3, 0.2), rng.normal(size=3)) == 1.75


def test_additive_differential_at_zero_structure(rng):
    S = gf("zero")
    hp = random_primitive(rng, 3, 3)
    h = Cochain1.from_poly(hp)
    p1, p2, x = ball(rng, 3, 0.3), ball(rng, 3, 0.3), rng.normal(size=3)
    assert delta_add(h, S, p1, p2, x) == pytest.approx(delta0_by_hand(hp, 3, p1, p2, x), abs=1e-13)
    assert delta0_poly(hp, 3).evaluate(np.concatenate([p1, p2, x])) == pytest.approx(delta0_by_hand(hp, 3, p1, p2, x), abs=1e-13)


def test_pair_groupoid_coboundary(rng):
    g = lambda a, b: np.exp(a @ b) * (2 + np.sin(a[0] - b[1]))  # noqa: E731
    f = lambda a, b, c: g(a, b) * g(b, c) / g(a, c)  # noqa: E731
    xs = rng.normal(size=(4, 2))
    assert pair_groupoid_delta_mult(f, *xs) == pytest.approx(1.0, rel=1e-13)
    not_a_cocycle = lambda a, b, c: 1 + a @ c  # noqa: E731
    assert abs(pair_groupoid_delta_mult(not_a_cocycle, *xs) - 1.0) > 1e-3


def _arrows(rng, n, count, pmax=0.1):
    return [(rng.normal(size=n) * 0.5, ball(rng, n, pmax)) for _ in range(count)]


@pytest.mark.parametrize("name", ["constant", "so3", "h3", "aff1"])
def test_gamma_propagates_units(name, rng):
    S = gf(name)
    report = unit_propagation_check(gamma_cochain(S), S, _arrows(rng, S.dim, 5), 1e-8, name)
    assert report.passed
    assert len(report.records) == 15


def test_coboundary_with_normalized_kappa_propagates_units(rng):
    S = gf("so3")
    kappa = Cochain1(lambda x, p: smooth_kappa(x, p) / smooth_kappa(x, np.zeros_like(p)))
    assert unit_propagation_check(coboundary(kappa, S), S, _arrows(rng, 3, 3)).passed


def test_unit_propagation_locates_violations(rng):
    S = gf("so3")
    f = Cochain2(lambda p1, p2, x: 1.0 + p2[0])
    arrows = _arrows(rng, 3, 4)
    report = unit_propagation_check(f, S, arrows)
    assert not report.passed
    left = [r for r in report.violations if r.check.endswith("left")]
    assert sorted(r.sample for r in left) == [k for k, (_, p) in enumerate(arrows) if abs(p[0]) > 1e-8]
    # inverse record: f(g, g^-1) - f(g^-1, g) = (1 - p_1) - (1 + p_1)
    assert report.max_residual == pytest.approx(2 * max(abs(p[0]) for _, p in arrows), rel=1e-12)


@pytest.mark.parametrize("name", ["zero", "constant", "so3"])
def test_identity_axiom_for_canonical_factor(name, rng):
    S = gf(name)
    report = identity_axiom_check(EnhancementFactor(Cochain2.constant(1.0)), S, _arrows(rng, S.dim, 3, 0.15), 1e-9)
    assert report.passed, report.max_residual


def test_identity_axiom_rescales_mu(rng):
    S = gf("so3")
    ef = EnhancementFactor(Cochain2.constant(2.0))
    assert identity_axiom_check(ef, S, _arrows(rng, 3, 2, 0.15), 1e-9).passed
    x = rng.normal(size=3)
    base = mu_sigma(EnhancementFactor(Cochain2.constant(1.0)), S, x)(np.eye(3))
    assert mu_sigma(ef, S, x)(np.eye(3)) == pytest.approx(base / 2, rel=1e-12)


def test_identity_axiom_for_equivalent_factor(rng):
    S = gf("aff1")
    kappa = Cochain1(lambda x, p: smooth_kappa(x, p) / smooth_kappa(x, np.zeros_like(p)))
    ef = EnhancementFactor(coboundary(kappa, S))
    assert identity_axiom_check(ef, S, _arrows(rng, 2, 2, 0.15), 1e-9).passed


def test_symmetric_pairing_passes_classifier():
    sym, skew, ok = symmetry_and_vanest0(PAIR_SYM, [np.array([1.0, 0.0])], 2)
    assert ok
    np.testing.assert_array_equal(skew[0], np.zeros((2, 2)))
    np.testing.assert_array_equal(sym[0], np.eye(2))


def test_skew_pairing_fails_classifier():
    _, skew, ok = symmetry_and_vanest0(PAIR_SKEW, [np.array([1.0, 0.0])], 2)
    assert not ok
    np.testing.assert_array_equal(skew[0], [[0.0, 1.0], [-1.0, 0.0]])


def test_finite_difference_hessian_matches_polynomial(rng):
    poly = Poly.from_terms({(1, 0, 1, 0, 0, 1): 0.7, (2, 0, 0, 1, 1, 0): 1.1, (0, 1, 0, 1, 0, 0): -0.4, (1, 0, 0, 1, 0, 0): 2.0}, 6)
    exact = Cochain2.from_poly(poly)
    numeric = Cochain2(exact.func)
    x = rng.normal(size=2)
    np.testing.assert_allclose(mixed_hessian(numeric, x, 2), mixed_hessian(exact, x, 2), atol=1e-10)


@pytest.mark.parametrize("name", ["so3", "sl2", "aff1"])
def test_log_gamma_is_symmetric(name, rng):
    S = gf(name)
    _, skew, ok = symmetry_and_vanest0(log_gamma_cochain(S), [rng.normal(size=S.dim) * 0.5], S.dim)
    assert ok, np.max(np.abs(skew[0]))


def test_pi0_solver_on_zero_input():
    res = coboundary_solve_pi0(Poly.zero(6), 2, 4)
    assert res.success
    assert res.primitive.max_abs() == 0.0


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=5)
def test_pi0_round_trip(seed):
    rng = np.random.default_rng(seed)
    hp = random_primitive(rng, 2, 6)
    h = delta0_poly(hp, 2)
    res = coboundary_solve_pi0(h, 2, 6)
    assert res.success
    assert (delta0_poly(res.primitive, 2) - h).max_abs() < 1e-10


def test_pi0_solver_reports_skew_obstruction():
    res = coboundary_solve_pi0(PAIR_SKEW, 2, 4)
    assert not res.success
    assert res.degree == 2
    # the leftover is the skew pairing itself: the image of delta0 in degree 2 is symmetric
    np.testing.assert_allclose(res.residual.evaluate([1, 0, 0, 1, 1, 0]), 1.0)


def test_pi0_solver_rejects_unnormalized_input():
    with pytest.raises(CochainError, match="not normalized"):
        coboundary_solve_pi0(Poly.from_terms({(1, 0, 0, 0, 0, 0): 1.0}, 6), 2, 4)


def test_graded_round_trip_on_aff1(rng):
    S = gf("aff1", 6)
    hp = random_primitive(rng, 2, 6)
    h = _delta_1cochain_series(hp, S.poly, 2, 6)
    res = graded_coboundary_solve(h, S, 6)
    assert res.success
    assert res.roundtrip_error < 1e-10


def test_graded_solver_on_heisenberg_log_gamma():
    S = gf("h3", 6)
    res = graded_coboundary_solve(Poly.zero(9), S, 6)
    assert res.success
    assert res.primitive.max_abs() == 0.0


def test_graded_solver_rejects_non_cocycle():
    S = gf("aff1", 4)
    # p1_1^2 p2_1 has pi = 0 differential -2 p1 p2 p3
    h = Poly.from_terms({(2, 0, 1, 0, 0, 0): 1.0}, 6)
    with pytest.raises(CochainError, match="degree 3"):
        graded_coboundary_solve(h, S, 4)


def test_graded_solver_rejects_skew_input():
    S = gf("aff1", 4)
    with pytest.raises(CochainError, match="symmetry"):
        graded_coboundary_solve(PAIR_SKEW, S, 4, check_cocycle=False)
