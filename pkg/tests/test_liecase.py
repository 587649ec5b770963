import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm, logm

from conftest import ball
from sgalab.liecase import (
    F_CHOICES,
    ActionGroupoidElement,
    LieDomainError,
    action_inverse,
    action_multiply,
    ad_function,
    bch,
    bch_terms,
    coadjoint,
    duflo_factor,
    duflo_factors,
    duflo_identity_residual,
    duflo_tilde_ratio,
    plane_wave_star,
    split_associativity_residual,
)
from sgalab.poisson import builtin_lie
from sgalab.suites import action_triple, broken_factor

ALGEBRAS = ["so3", "sl2", "h3", "aff1"]


def bch_matrix_oracle(lie, u, v):
    return lie.from_matrix(logm(expm(lie.to_matrix(u)) @ expm(lie.to_matrix(v))))


def so3_F_R(p):
    r = np.linalg.norm(p)
    return (np.sin(r / 2) / (r / 2)) ** 2


def test_bch_abelian_is_sum(rng):
    lie = builtin_lie("abelian2")
    u, v = rng.normal(size=(2, 2))
    np.testing.assert_array_equal(bch(lie, u, v), u + v)


def test_bch_heisenberg_terminates(rng):
    lie = builtin_lie("h3")
    u, v = rng.normal(size=(2, 3))
    expected = u + v + 0.5 * lie.bracket(u, v)
    np.testing.assert_allclose(bch(lie, u, v), expected, atol=1e-14)
    np.testing.assert_allclose(bch_matrix_oracle(lie, u, v), expected, atol=1e-10)
    assert all(np.max(np.abs(z)) < 1e-15 for z in bch_terms(lie, u, v)[2:])


def test_bch_so3_third_order_term(rng):
    lie = builtin_lie("so3")
    u, v = rng.normal(size=(2, 3))
    br = lie.bracket
    np.testing.assert_allclose(bch_terms(lie, u, v, 3)[2], (br(u, br(u, v)) + br(v, br(v, u))) / 12, atol=1e-14)


@pytest.mark.parametrize("name", ALGEBRAS)
def test_bch_matches_matrix_log(name, rng):
    lie = builtin_lie(name)
    u, v = ball(rng, lie.dim, 0.2), ball(rng, lie.dim, 0.2)
    np.testing.assert_allclose(bch(lie, u, v), bch_matrix_oracle(lie, u, v), atol=1e-10)


def test_bch_order_is_bounded():
    with pytest.raises(ValueError, match="1..10"):
        bch(builtin_lie("so3"), np.zeros(3), np.zeros(3), order=11)


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(ALGEBRAS))
def test_bch_group_identities(seed, name):
    rng = np.random.default_rng(seed)
    lie = builtin_lie(name)
    u, v = rng.normal(size=(2, lie.dim)) * 0.3
    np.testing.assert_allclose(bch(lie, u, np.zeros(lie.dim)), u, atol=1e-15)
    np.testing.assert_allclose(bch(lie, u, -u), 0.0, atol=1e-15)
    np.testing.assert_allclose(bch(lie, u, v), -bch(lie, -v, -u), atol=1e-14)


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(ALGEBRAS))
def test_bch_stack_matches_rows(seed, name):
    rng = np.random.default_rng(seed)
    lie = builtin_lie(name)
    U, V = rng.normal(size=(2, 4, lie.dim)) * 0.2
    np.testing.assert_allclose(bch(lie, U, V), np.stack([bch(lie, u, v) for u, v in zip(U, V)]), atol=1e-15)


@pytest.mark.parametrize("name", ALGEBRAS)
def test_factors_at_zero(name):
    f = duflo_factors(builtin_lie(name), np.zeros(builtin_lie(name).dim))
    assert (f.F_G, f.F_R, f.F_K, f.F_tilde) == (1.0, 1.0, 1.0, 1.0)


def test_so3_F_R_closed_form(rng):
    lie = builtin_lie("so3")
    for _ in range(5):
        p = ball(rng, 3, 0.9)
        assert duflo_factors(lie, p).F_R == pytest.approx(so3_F_R(p), rel=1e-13)


def test_heisenberg_factors_are_one(rng):
    f = duflo_factors(builtin_lie("h3"), ball(rng, 3, 0.9))
    assert f.F_R == pytest.approx(1.0, abs=1e-15)
    assert f.F_K == pytest.approx(1.0, abs=1e-15)


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(ALGEBRAS))
def test_factor_relations(seed, name):
    rng = np.random.default_rng(seed)
    lie = builtin_lie(name)
    p = ball(rng, lie.dim, 0.4)
    f = duflo_factors(lie, p)
    assert f.F_K**2 == pytest.approx(f.F_R, abs=1e-12)
    half_exp = np.linalg.det(expm(-0.5 * lie.ad(p)))
    assert f.F_tilde / f.F_R == pytest.approx(half_exp, abs=1e-10)


@pytest.mark.parametrize("kind", ["exp", "exp_neg"])
def test_ad_exponentials_match_expm(kind, rng):
    lie = builtin_lie("sl2")
    p = ball(rng, 3, 0.3)
    sign = 1.0 if kind == "exp" else -1.0
    np.testing.assert_allclose(ad_function(lie, p, kind), expm(sign * lie.ad(p)), atol=1e-14)


def test_guard_rejects_large_covectors():
    with pytest.raises(LieDomainError, match="guard"):
        duflo_factors(builtin_lie("so3"), np.array([1.5, 0.0, 0.0]))


def test_unknown_factor():
    with pytest.raises(ValueError, match="F_choice"):
        duflo_factor(builtin_lie("so3"), "F_X", np.zeros(3))


def test_gutt_amplitude_is_one(rng):
    lie = builtin_lie("so3")
    p1, p2 = ball(rng, 3, 0.2), ball(rng, 3, 0.2)
    out, amp = plane_wave_star(lie, "F_G", p1, p2)
    assert amp == 1.0
    np.testing.assert_allclose(out, bch(lie, p1, p2))


def test_so3_kontsevich_amplitude(rng):
    lie = builtin_lie("so3")
    p1, p2 = ball(rng, 3, 0.2), ball(rng, 3, 0.2)
    _, amp = plane_wave_star(lie, "F_K", p1, p2)
    expected = np.sqrt(so3_F_R(p1) * so3_F_R(p2) / so3_F_R(bch_matrix_oracle(lie, p1, p2)))
    assert amp == pytest.approx(expected, rel=1e-10)


def test_abelian_amplitude_is_a_scalar_cocycle(rng):
    lie = builtin_lie("abelian2")
    p1, p2, p3 = rng.normal(size=(3, 2)) * 0.3
    F = lambda p: 1 + p @ p  # noqa: E731
    amp = lambda a, b: F(a) * F(b) / F(a + b)  # noqa: E731
    for choice in F_CHOICES:
        _, a12 = plane_wave_star(lie, choice, p1, p2)
        assert a12 == pytest.approx(1.0)
    # the abelian F-choices are all trivial; a hand-made F still gives an exact cocycle
    assert amp(p1, p2) * amp(p1 + p2, p3) == pytest.approx(amp(p2, p3) * amp(p1, p2 + p3), rel=1e-14)


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(ALGEBRAS), choice=st.sampled_from(F_CHOICES))
def test_plane_wave_star_is_associative(seed, name, choice):
    rng = np.random.default_rng(seed)
    lie = builtin_lie(name)
    p1, p2, p3 = (ball(rng, lie.dim, 0.1) for _ in range(3))
    p12, a12 = plane_wave_star(lie, choice, p1, p2)
    p23, a23 = plane_wave_star(lie, choice, p2, p3)
    left, a12_3 = plane_wave_star(lie, choice, p12, p3)
    right, a1_23 = plane_wave_star(lie, choice, p1, p23)
    np.testing.assert_allclose(left, right, atol=1e-12)
    assert a12 * a12_3 == pytest.approx(a23 * a1_23, rel=1e-10)


def test_action_unit(rng):
    lie = builtin_lie("so3")
    g = ActionGroupoidElement(ball(rng, 3, 0.3), rng.normal(size=3))
    out = action_multiply(lie, g, ActionGroupoidElement(np.zeros(3), g.x))
    np.testing.assert_allclose(out.a, g.a)
    np.testing.assert_allclose(out.x, g.x)


@pytest.mark.parametrize("name", ALGEBRAS)
def test_coadjoint_matches_matrix_exponential(name, rng):
    lie = builtin_lie(name)
    a, x = ball(rng, lie.dim, 0.5), rng.normal(size=lie.dim)
    np.testing.assert_allclose(coadjoint(lie, a, x), expm(-lie.ad(a)).T @ x, atol=1e-13)


def test_target_of_product_is_target_of_first(rng):
    lie = builtin_lie("sl2")
    g1, g2, _ = action_triple(lie, rng, 0.3)
    g12 = action_multiply(lie, g1, g2)
    np.testing.assert_allclose(coadjoint(lie, g12.a, g12.x), coadjoint(lie, g1.a, g1.x), atol=1e-10)


def test_action_inverse(rng):
    lie = builtin_lie("aff1")
    g = ActionGroupoidElement(ball(rng, 2, 0.3), rng.normal(size=2))
    out = action_multiply(lie, g, action_inverse(lie, g))
    np.testing.assert_allclose(out.a, 0.0, atol=1e-15)


def test_action_multiply_rejects_non_composable():
    lie = builtin_lie("so3")
    with pytest.raises(ValueError, match="not composable"):
        action_multiply(lie, ActionGroupoidElement(np.zeros(3), np.ones(3)), ActionGroupoidElement(np.ones(3) * 0.1, np.zeros(3)))


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(ALGEBRAS))
def test_action_multiply_is_associative(seed, name):
    rng = np.random.default_rng(seed)
    lie = builtin_lie(name)
    g1, g2, g3 = action_triple(lie, rng, 0.2)
    left = action_multiply(lie, action_multiply(lie, g1, g2), g3)
    right = action_multiply(lie, g1, action_multiply(lie, g2, g3))
    np.testing.assert_allclose(left.a, right.a, atol=1e-10)
    np.testing.assert_allclose(left.x, right.x, atol=1e-12)


@pytest.mark.parametrize("name", ["so3", "h3", "aff1"])
def test_canonical_enhancement_is_associative(name, rng):
    lie = builtin_lie(name)
    worst = max(split_associativity_residual(lie, action_triple(lie, rng, 0.3)) for _ in range(5))
    assert worst < 1e-7


def test_coboundary_factor_is_associative(rng):
    lie = builtin_lie("so3")

    def kappa(g):
        return np.exp(0.3 * g.a @ g.x + 0.2 * g.a[0])

    def f(g1, g2):
        return kappa(g1) * kappa(g2) / kappa(action_multiply(lie, g1, g2))

    worst = max(split_associativity_residual(lie, action_triple(lie, rng, 0.3), f) for _ in range(3))
    assert worst < 1e-7


def test_broken_factor_is_detected(rng):
    lie = builtin_lie("so3")
    residuals = [split_associativity_residual(lie, action_triple(lie, rng, 0.3), broken_factor) for _ in range(10)]
    assert max(residuals) > 1e-3


def test_heisenberg_duflo_identity(rng):
    lie = builtin_lie("h3")
    for _ in range(3):
        assert duflo_identity_residual(lie, ball(rng, 3, 0.2), ball(rng, 3, 0.2), rng.normal(size=3)) < 1e-9


@pytest.mark.parametrize("name", ["so3", "sl2", "aff1"])
def test_duflo_identity(name, rng):
    lie = builtin_lie(name)
    for _ in range(3):
        p1, p2 = ball(rng, lie.dim, 0.2), ball(rng, lie.dim, 0.2)
        assert duflo_identity_residual(lie, p1, p2, rng.normal(size=lie.dim)) < 1e-6


def test_gutt_factor_fails_duflo_identity(rng):
    lie = builtin_lie("so3")
    residuals = [duflo_identity_residual(lie, ball(rng, 3, 0.2), ball(rng, 3, 0.2), rng.normal(size=3), F_choice="F_G") for _ in range(10)]
    assert max(residuals) > 1e-3


@pytest.mark.parametrize("name", ["so3", "sl2", "h3"])
def test_tilde_ratio_matches_kontsevich_ratio(name, rng):
    lie = builtin_lie(name)
    p1, p2 = ball(rng, 3, 0.2), ball(rng, 3, 0.2)
    _, amp = plane_wave_star(lie, "F_K", p1, p2)
    assert duflo_tilde_ratio(lie, p1, p2) == pytest.approx(amp, rel=1e-10)


def test_duflo_residual_guards():
    lie = builtin_lie("so3")
    with pytest.raises(LieDomainError, match="0.2"):
        duflo_identity_residual(lie, np.array([0.3, 0, 0]), np.zeros(3), np.ones(3))
    with pytest.raises(ValueError, match="at least 8"):
        duflo_identity_residual(lie, np.zeros(3), np.zeros(3), np.ones(3), order=5)
