from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from sgalab.densities import (
    AlphaDensity,
    DensityError,
    GraphTangentData,
    LinearCanonicalRelation,
    ShortExactPresentation,
    compose_enhanced_linear,
    compose_graph_enhancements,
    eval_density,
    graph_relation,
    liouville_half_density,
    liouville_value,
    product_density,
    quotient_density,
    standard_symplectic,
)

HALF = Fraction(1, 2)


def random_symplectic_map(rng, n, scale=0.5):
    """exp(J H) with H symmetric preserves the standard form."""
    H = rng.normal(size=(2 * n, 2 * n)) * scale
    return expm(standard_symplectic(n) @ (H + H.T))


def pfaffian_4x4(a):
    return a[0, 1] * a[2, 3] - a[0, 2] * a[1, 3] + a[0, 3] * a[1, 2]


def graph_density(T, value):
    return AlphaDensity(HALF, np.vstack([np.eye(T.shape[0]), T]), value)


@pytest.mark.parametrize(
    "basis, expected",
    [
        (np.eye(2), 1.0),
        (np.diag([2.0, 1.0]), np.sqrt(2.0)),
    ],
)
def test_half_density_on_plane(basis, expected):
    assert eval_density(AlphaDensity.standard(2), basis) == pytest.approx(expected, rel=1e-15)


def test_order_one_density_with_negative_determinant(rng):
    A = rng.normal(size=(3, 3))
    A *= (2.0 / abs(np.linalg.det(A))) ** (1 / 3)
    if np.linalg.det(A) > 0:
        A[:, [0, 1]] = A[:, [1, 0]]
    assert np.linalg.det(A) == pytest.approx(-2.0)
    d = AlphaDensity.standard(3, value=3.0, order=1)
    assert eval_density(d, A) == pytest.approx(6.0, rel=1e-13)


def test_degenerate_basis_raises():
    with pytest.raises(DensityError, match="degenerate basis"):
        eval_density(AlphaDensity.standard(2), np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_basis_outside_carrier_raises():
    d = AlphaDensity(HALF, np.array([[1.0], [0.0]]), 1.0)
    with pytest.raises(DensityError, match="carrier"):
        eval_density(d, np.array([[0.0], [1.0]]))


def test_rebased_density_is_the_same_density(rng):
    d = AlphaDensity(HALF, rng.normal(size=(3, 3)), 2.0 - 1.0j)
    other = rng.normal(size=(3, 3))
    probe = rng.normal(size=(3, 3))
    assert d.rebased(other)(probe) == pytest.approx(d(probe), rel=1e-12)


@pytest.mark.parametrize(
    "basis, expected",
    [
        (np.eye(2), 1.0),
        (np.diag([2.0, 1.0]), np.sqrt(2.0)),
    ],
)
def test_liouville_on_plane(basis, expected):
    lam = liouville_half_density(standard_symplectic(1))
    assert lam(basis) == pytest.approx(expected, rel=1e-15)


def test_liouville_on_r4_matches_pfaffian(rng):
    W = rng.normal(size=(4, 4))
    omega = W - W.T
    basis = rng.normal(size=(4, 4))
    gram = basis.T @ omega @ basis
    lam = liouville_half_density(omega)
    assert lam(basis) == pytest.approx(abs(pfaffian_4x4(gram)) ** 0.5, rel=1e-12)


@pytest.mark.parametrize(
    "omega, message",
    [
        (np.zeros((2, 2)), "degenerate"),
        (np.eye(2), "not skew"),
        (np.zeros((3, 3)), "even square"),
    ],
)
def test_liouville_rejects_bad_forms(omega, message):
    with pytest.raises(DensityError, match=message):
        liouville_half_density(omega)


def test_quotient_of_product_returns_second_factor(rng):
    s1 = AlphaDensity(HALF, rng.normal(size=(2, 2)), 0.8)
    s2 = AlphaDensity(HALF, rng.normal(size=(3, 3)), -1.5 + 0.2j)
    sigma = product_density(s1, s2)
    pres = ShortExactPresentation.from_kernel(np.hstack([np.zeros((3, 2)), np.eye(3)]))
    s1_in_v = AlphaDensity(HALF, np.vstack([s1.ref_basis, np.zeros((3, 2))]), s1.ref_value)
    q = quotient_density(sigma, s1_in_v, pres)
    probe = rng.normal(size=(3, 3))
    assert q(probe) == pytest.approx(s2(probe), rel=1e-12)


def test_quotient_with_vanishing_divisor_raises():
    pres = ShortExactPresentation.from_kernel(np.array([[0.0, 1.0]]))
    sigma = AlphaDensity.standard(2)
    zero = AlphaDensity(HALF, pres.basis_V1, 0.0)
    with pytest.raises(DensityError, match="vanishing"):
        quotient_density(sigma, zero, pres)


def test_presentation_rejects_bad_projection():
    with pytest.raises(DensityError, match="projection does not vanish"):
        ShortExactPresentation(2, np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]), np.array([[1.0, 1.0]]))


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 5), num=st.integers(1, 3), den=st.integers(1, 4))
def test_scaling_law(seed, d, num, den):
    rng = np.random.default_rng(seed)
    alpha = Fraction(num, den)
    dens = AlphaDensity(alpha, rng.normal(size=(d, d)), complex(*rng.normal(size=2)))
    B = rng.normal(size=(d, d))
    A = rng.normal(size=(d, d))
    expected = abs(np.linalg.det(A)) ** float(alpha) * dens(B)
    assert abs(dens(B @ A) - expected) <= 1e-11 * abs(expected)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_liouville_is_one_on_symplectic_bases(seed, n):
    T = random_symplectic_map(np.random.default_rng(seed), n)
    assert liouville_value(standard_symplectic(n), T) == pytest.approx(1.0, abs=1e-9)


@given(seed=st.integers(0, 2**32 - 1), d1=st.integers(1, 3), d2=st.integers(1, 3))
def test_quotient_is_complement_independent(seed, d1, d2):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(d2, d1 + d2))
    base = ShortExactPresentation.from_kernel(P)
    sigma = AlphaDensity(HALF, rng.normal(size=(d1 + d2, d1 + d2)), 1.3)
    sigma1 = AlphaDensity(HALF, base.basis_V1, 0.7)
    moved = ShortExactPresentation(d1 + d2, base.basis_V1, base.complement + base.basis_V1 @ rng.normal(size=(d1, d2)), P)
    probe = np.eye(d2)
    a = quotient_density(sigma, sigma1, base)(probe)
    b = quotient_density(sigma, sigma1, moved)(probe)
    assert abs(a - b) <= 1e-12 * abs(a)


def test_identity_graph_is_a_unit(rng):
    n = 2
    w = standard_symplectic(n)
    T = random_symplectic_map(rng, n)
    rel, s = graph_relation(w, w, T), graph_density(T, 1.7)
    ident = graph_relation(w, w, np.eye(2 * n))
    lam = graph_density(np.eye(2 * n), 1.0)
    for composed in (compose_enhanced_linear(rel, s, ident, lam), compose_enhanced_linear(ident, lam, rel, s)):
        out_rel, out_s = composed
        assert out_s(s.ref_basis) == pytest.approx(1.7, rel=1e-12)
        assert np.linalg.matrix_rank(np.hstack([out_rel.basis_L, rel.basis_L]), tol=1e-9) == 2 * n


def test_diagonal_relations_on_the_plane():
    # brute force: with the complement (0, w) the change of basis is unit triangular
    # and tau maps it to -Id, so the composite value on (e, e) is v1 v2
    w = standard_symplectic(1)
    diag = graph_relation(w, w, np.eye(2))
    rel, s = compose_enhanced_linear(diag, graph_density(np.eye(2), 2.0), diag, graph_density(np.eye(2), 3.0))
    assert s(np.vstack([np.eye(2), np.eye(2)])) == pytest.approx(6.0, rel=1e-13)
    assert rel.isotropy_defect() < 1e-14


def test_graphs_compose_to_graph_of_product(rng):
    n = 1
    w = standard_symplectic(n)
    T1, T2 = random_symplectic_map(rng, n), random_symplectic_map(rng, n)
    rel, s = compose_enhanced_linear(graph_relation(w, w, T1), graph_density(T1, 0.5), graph_relation(w, w, T2), graph_density(T2, 4.0))
    target = np.vstack([np.eye(2), T2 @ T1])
    assert s(target) == pytest.approx(2.0, rel=1e-11)
    assert np.linalg.matrix_rank(np.hstack([rel.basis_L, target]), tol=1e-9) == 2


def test_non_transverse_composition_raises():
    w = standard_symplectic(1)
    # product of lines l x l: both relations meet the middle space in the same line
    lines = np.zeros((4, 2))
    lines[0, 0] = lines[2, 1] = 1.0
    rel = LinearCanonicalRelation(w, w, lines)
    s = AlphaDensity(HALF, lines, 1.0)
    with pytest.raises(DensityError, match="non-transverse"):
        compose_enhanced_linear(rel, s, rel, s)


def test_relation_must_be_lagrangian():
    w = standard_symplectic(1)
    with pytest.raises(DensityError, match="not Lagrangian"):
        LinearCanonicalRelation(w, w, np.vstack([np.eye(2), 2 * np.eye(2)]))


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 2))
def test_linear_composition_is_associative(seed, n):
    rng = np.random.default_rng(seed)
    w = standard_symplectic(n)
    maps = [random_symplectic_map(rng, n) for _ in range(3)]
    rels = [(graph_relation(w, w, T), graph_density(T, rng.uniform(0.5, 2.0))) for T in maps]
    left = compose_enhanced_linear(*compose_enhanced_linear(*rels[0], *rels[1]), *rels[2])
    right = compose_enhanced_linear(*rels[0], *compose_enhanced_linear(*rels[1], *rels[2]))
    probe = left[1].ref_basis
    assert abs(left[1](probe) - right[1](probe)) <= 1e-9 * abs(left[1](probe))


def test_graph_enhancement_with_identity_returns_first_factor(rng):
    w2 = standard_symplectic(1)
    f1 = GraphTangentData(np.eye(4)[:, :3], rng.normal(size=(2, 4)), w2)
    s1 = AlphaDensity(HALF, f1.tangent_D, 2.5)
    f2 = GraphTangentData(np.eye(2), np.eye(2), w2)
    out = compose_graph_enhancements(f1, s1, f2, liouville_half_density(w2))
    assert out(f1.tangent_D) == pytest.approx(2.5, rel=1e-12)


def test_graph_enhancement_is_complement_independent(rng):
    w2 = standard_symplectic(1)
    f1 = GraphTangentData(np.eye(4), rng.normal(size=(2, 4)), w2)
    s1 = AlphaDensity(HALF, np.eye(4), 1.2)
    f2 = GraphTangentData(np.array([[1.0], [0.3]]), np.eye(2), w2)
    s2 = AlphaDensity(HALF, f2.tangent_D, 0.9)
    first = compose_graph_enhancements(f1, s1, f2, s2)
    D0 = first.ref_basis
    other = first.ref_basis @ rng.normal(size=(3, 1)) + rng.normal(size=(4, 1))
    second = compose_graph_enhancements(f1, s1, f2, s2, complement=other)
    assert second(D0) == pytest.approx(first(D0), rel=1e-12)


def test_graph_enhancement_needs_transversality():
    w2 = standard_symplectic(1)
    f1 = GraphTangentData(np.eye(2)[:, :1], np.array([[1.0, 0.0], [0.0, 0.0]]), w2)
    f2 = GraphTangentData(np.array([[1.0], [0.0]]), np.eye(2), w2)
    with pytest.raises(DensityError, match="transverse"):
        compose_graph_enhancements(f1, AlphaDensity(HALF, f1.tangent_D, 1.0), f2, AlphaDensity(HALF, f2.tangent_D, 1.0))
