"""Linear Poisson structures: BCH products, Duflo factors, plane waves and the action groupoid."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.linalg import null_space
from scipy.special import bernoulli

from .densities import AlphaDensity, ShortExactPresentation, liouville_value, subspace_density
from .jets import Poly
from .poisson import LieAlgebraData, lie_to_poisson

__all__ = [
    "bch",
    "bch_terms",
    "bch_series",
    "DufloFactors",
    "duflo_factors",
    "ad_function",
    "ad_norm",
    "duflo_factor",
    "plane_wave_star",
    "ActionGroupoidElement",
    "coadjoint",
    "action_multiply",
    "action_inverse",
    "LieDomainError",
    "BCH_MAX_ORDER",
    "maurer_cartan",
    "action_symplectic_form",
    "canonical_action_enhancement",
    "canonical_action_enhancement_quotient",
    "split_associativity_residual",
    "duflo_identity_residual",
    "duflo_tilde_ratio",
]

BCH_MAX_ORDER = 10
AD_NORM_GUARD = 1.0
TAYLOR_DEGREE = 20


class LieDomainError(ValueError):
    """Input outside the local chart where the truncated series are trusted."""


@lru_cache(maxsize=None)
def _bernoulli_weights(order: int) -> dict[int, float]:
    """``B_{2p} / (2p)!`` for the even orders used by the recursion."""
    b = bernoulli(order + 1)
    return {r: float(b[r]) / factorial(r) for r in range(2, order + 1, 2)}


def _bch_recursion(x, y, bracket, zero, order: int):
    """Homogeneous BCH components ``Z_1..Z_order`` by the Varadarajan recursion.

    ``(n+1) Z_{n+1} = 1/2 [X - Y, Z_n]
        + sum_p B_2p/(2p)! sum_{k_1+..+k_2p = n} [Z_k1, [.., [Z_k2p, X + Y]..]]``

    Nested brackets are accumulated in ``W[r][m]``, the sum over
    compositions of ``m`` into ``r`` parts.  Works for any objects with
    ``+``, scalar ``*`` and a bilinear ``bracket``.
    """
    weights = _bernoulli_weights(order)
    s = x + y
    d = x - y
    Z = {1: s}
    W = {0: {0: s}}
    for n in range(1, order):
        # extend the nested-bracket table by compositions whose parts are <= n
        for r in range(1, n + 1):
            row = W.setdefault(r, {})
            acc = None
            for k in range(1, n - r + 2):
                prev = W.get(r - 1, {}).get(n - k)
                if prev is None:
                    continue
                term = bracket(Z[k], prev)
                acc = term if acc is None else acc + term
            if acc is not None:
                row[n] = acc
        nxt = bracket(d, Z[n]) * 0.5
        for r, w in weights.items():
            if r <= n and n in W.get(r, {}):
                nxt = nxt + W[r][n] * w
        Z[n + 1] = nxt * (1.0 / (n + 1))
    return [Z[k] for k in range(1, order + 1)]


def bch_terms(lie: LieAlgebraData, p1, p2, order: int = BCH_MAX_ORDER) -> list[np.ndarray]:
    """Numeric homogeneous components of ``log(exp p1 exp p2)`` up to ``order``."""
    if order > BCH_MAX_ORDER or order < 1:
        raise ValueError(f"BCH order must lie in 1..{BCH_MAX_ORDER}")
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    return _bch_recursion(p1, p2, lie.bracket, np.zeros(lie.dim), order)


def bch(lie: LieAlgebraData, p1, p2, order: int = BCH_MAX_ORDER) -> np.ndarray:
    """Truncated BCH product ``p1 . p2`` computed through structure constants; leading axes broadcast."""
    return np.sum(bch_terms(lie, p1, p2, order), axis=0)


@lru_cache(maxsize=32)
def _bch_series_cached(name: str, c_bytes: bytes, n: int, order: int) -> Poly:
    c = np.frombuffer(c_bytes).reshape(n, n, n)
    nv = 2 * n

    def gen(offset):
        exps = np.zeros((n, nv), np.int64)
        exps[np.arange(n), offset + np.arange(n)] = 1
        return Poly(nv, exps, np.eye(n))

    def bracket(a: Poly, b: Poly) -> Poly:
        return a.bilinear(b, lambda u, v: np.einsum("pi,pj,ijk->pk", u, v, c))

    parts = _bch_recursion(gen(0), gen(n), bracket, None, order)
    total = parts[0]
    for z in parts[1:]:
        total = total + z
    return total


def bch_series(lie: LieAlgebraData, order: int = BCH_MAX_ORDER) -> Poly:
    """BCH product as a vector polynomial in ``(u, v)``, variables ``0..n-1`` then ``n..2n-1``."""
    if order > BCH_MAX_ORDER or order < 1:
        raise ValueError(f"BCH order must lie in 1..{BCH_MAX_ORDER}")
    return _bch_series_cached(lie.name, np.ascontiguousarray(lie.c).tobytes(), lie.dim, order)


# ---------------------------------------------------------------------------
# matrix functions of ad


def _taylor_matrix(A: np.ndarray, coeffs) -> np.ndarray:
    out = np.zeros_like(A, dtype=np.result_type(A, float))
    power = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
    for k, ck in enumerate(coeffs):
        if k:
            power = power @ A
        out = out + ck * power
    return out


def ad_norm(lie: LieAlgebraData, p) -> np.ndarray:
    """Spectral norm of ``ad_p``, one value per covector."""
    A = np.einsum("...i,ijk->...kj", np.asarray(p, dtype=float), lie.c)
    return np.linalg.norm(A, 2, axis=(-2, -1))


def ad_function(lie: LieAlgebraData, p, kind: str) -> np.ndarray:
    """Analytic function of ``ad_p`` by its degree-20 Taylor series.

    ``kind`` is ``"sinhc_half"`` for ``sinh(ad/2)/(ad/2)``, ``"theta"`` for
    ``(1 - exp(-ad))/ad``, ``"exp"`` or ``"exp_neg"``.
    """
    # complex input is allowed so callers can take complex-step derivatives;
    # a stack of covectors gives a stack of matrices
    p = np.asarray(p)
    A = np.einsum("...i,ijk->...kj", p, lie.c)
    norm = np.max(ad_norm(lie, p.real if np.iscomplexobj(p) else p), initial=0.0)
    if norm >= AD_NORM_GUARD:
        raise LieDomainError(f"|ad_p| = {norm:.3f} violates the guard |ad_p| < {AD_NORM_GUARD}")
    K = TAYLOR_DEGREE
    if kind == "sinhc_half":
        coeffs = [0.0] * (K + 1)
        for j in range(0, K + 1, 2):
            coeffs[j] = 0.5**j / factorial(j + 1)
    elif kind == "theta":
        coeffs = [(-1.0) ** j / factorial(j + 1) for j in range(K + 1)]
    elif kind == "exp":
        coeffs = [1.0 / factorial(j) for j in range(K + 1)]
    elif kind == "exp_neg":
        coeffs = [(-1.0) ** j / factorial(j) for j in range(K + 1)]
    else:
        raise ValueError(f"unknown matrix function {kind!r}")
    return _taylor_matrix(A, coeffs)


@dataclass(frozen=True)
class DufloFactors:
    """Values of the four factors at one covector."""

    F_G: float
    F_R: float
    F_K: float
    F_tilde: float

    def get(self, choice: str) -> float:
        return {"F_G": self.F_G, "F_R": self.F_R, "F_K": self.F_K, "F_tilde": self.F_tilde}[choice]


F_CHOICES = ("F_G", "F_R", "F_K", "F_tilde")


def duflo_factors(lie: LieAlgebraData, p) -> DufloFactors:
    """``F_G = 1``, ``F_R = det(sinh(ad/2)/(ad/2))``, ``F_K = sqrt(F_R)``, ``F_tilde = det((1-e^{-ad})/ad)``."""
    fr = float(np.linalg.det(ad_function(lie, p, "sinhc_half")))
    ft = float(np.linalg.det(ad_function(lie, p, "theta")))
    if fr <= 0:
        raise LieDomainError("F_R is not positive; covector outside the local chart")
    return DufloFactors(1.0, fr, float(np.sqrt(fr)), ft)


def duflo_factor(lie: LieAlgebraData, F_choice: str, p) -> np.ndarray:
    """One factor at a covector or along a stack of covectors."""
    if F_choice not in F_CHOICES:
        raise ValueError(f"F_choice must be one of {F_CHOICES}")
    p = np.asarray(p, dtype=float)
    if F_choice == "F_G":
        ad_function(lie, p, "exp")  # same domain guard as the other choices
        return np.ones(p.shape[:-1])
    if F_choice == "F_tilde":
        return np.linalg.det(ad_function(lie, p, "theta"))
    fr = np.linalg.det(ad_function(lie, p, "sinhc_half"))
    if np.any(fr <= 0):
        raise LieDomainError("F_R is not positive; covector outside the local chart")
    return fr if F_choice == "F_R" else np.sqrt(fr)


def plane_wave_star(lie: LieAlgebraData, F_choice: str, p1, p2, order: int = BCH_MAX_ORDER):
    """Action of the F-star product on plane waves: ``(p1 . p2, F(p1) F(p2) / F(p1 . p2))``.

    Stacks of covectors give stacks of products and amplitudes.
    """
    out = bch(lie, p1, p2, order)
    f1 = duflo_factor(lie, F_choice, p1)
    f2 = duflo_factor(lie, F_choice, p2)
    f12 = duflo_factor(lie, F_choice, out)
    return out, f1 * f2 / f12


# ---------------------------------------------------------------------------
# coadjoint action groupoid


@dataclass(frozen=True)
class ActionGroupoidElement:
    """Arrow ``(a, x)`` of the action groupoid: local group element in exponential coordinates, base point in the dual."""

    a: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))

    @property
    def source(self) -> np.ndarray:
        return self.x


def coadjoint(lie: LieAlgebraData, a, x) -> np.ndarray:
    """``Ad*_a x = (exp(-ad_a))^T x``."""
    return ad_function(lie, a, "exp_neg").T @ np.asarray(x, dtype=float)


def action_target(lie: LieAlgebraData, g: ActionGroupoidElement) -> np.ndarray:
    return coadjoint(lie, g.a, g.x)


def action_multiply(lie: LieAlgebraData, g1: ActionGroupoidElement, g2: ActionGroupoidElement, tol: float = 1e-9, order: int = BCH_MAX_ORDER) -> ActionGroupoidElement:
    """``(a1, x1)(a2, x2) = (a1 . a2, x2)``, defined when ``x1 = Ad*_{a2} x2``."""
    gap = np.max(np.abs(g1.x - coadjoint(lie, g2.a, g2.x)))
    if gap > tol:
        raise ValueError(f"arrows are not composable (gap {gap:.2e})")
    return ActionGroupoidElement(bch(lie, g1.a, g2.a, order), g2.x)


def action_inverse(lie: LieAlgebraData, g: ActionGroupoidElement) -> ActionGroupoidElement:
    return ActionGroupoidElement(-g.a, coadjoint(lie, g.a, g.x))


# ---------------------------------------------------------------------------
# split-form associativity on the action groupoid
#
# Arrows are (a, x) in exponential coordinates; tangent vectors are
# (da, dx).  Pair tangents of G^(2) are written (da1, dx1, da2, dx2) and
# evaluated by densities in the coordinates (da1, da2, dx2).

CS_STEP = 1e-20
KERNEL_GAP = 1e-8


def maurer_cartan(lie: LieAlgebraData, a) -> np.ndarray:
    """Left Maurer-Cartan form in exponential coordinates, ``(1 - exp(-ad_a)) / ad_a``."""
    return ad_function(lie, a, "theta").real


def _maurer_cartan_derivative(lie: LieAlgebraData, a) -> np.ndarray:
    """``d[i] = dTheta / da_i`` by complex-step differentiation."""
    a = np.asarray(a, dtype=float)
    out = np.empty((lie.dim, lie.dim, lie.dim))
    for i in range(lie.dim):
        z = a.astype(complex)
        z[i] += 1j * CS_STEP
        out[i] = ad_function(lie, z, "theta").imag / CS_STEP
    return out


def action_symplectic_form(lie: LieAlgebraData, g: ActionGroupoidElement) -> np.ndarray:
    """Matrix of ``omega = d<x, theta>`` at ``(a, x)`` in coordinates ``(da, dx)``."""
    n = lie.dim
    theta = maurer_cartan(lie, g.a)
    dtheta = _maurer_cartan_derivative(lie, g.a)
    # primitive coefficients: A_a = theta^T x, A_x = 0; omega_ij = d_i A_j - d_j A_i
    J = np.zeros((2 * n, 2 * n))
    J[:n, :n] = np.einsum("ikj,k->ij", dtheta, g.x)
    J[n:, :n] = theta
    return J - J.T


def _bch_jacobians(lie: LieAlgebraData, u, v):
    Z = bch_series(lie)
    n = lie.dim
    _, grad, _ = Z.jet(np.concatenate([u, v]))
    return grad[:n].T, grad[n:].T


def _coadjoint_jacobian_a(lie: LieAlgebraData, a, x) -> np.ndarray:
    """``d(Ad*_a x) / da`` by complex step."""
    a = np.asarray(a, dtype=float)
    cols = []
    for i in range(lie.dim):
        z = a.astype(complex)
        z[i] += 1j * CS_STEP
        cols.append((ad_function(lie, z, "exp_neg").T @ x).imag / CS_STEP)
    return np.stack(cols, axis=1)


def _kernel_basis(jacobian: np.ndarray, dim: int) -> np.ndarray:
    sv = np.linalg.svd(jacobian, compute_uv=False)
    if sv[-1] < KERNEL_GAP * max(sv[0], 1.0):
        raise LieDomainError("kernel-basis extraction is ill-conditioned")
    ker = null_space(jacobian)
    if ker.shape[1] != dim:
        raise LieDomainError("kernel-basis extraction is ill-conditioned")
    return ker


def _source_kernel(lie: LieAlgebraData, y) -> np.ndarray:
    """Basis of ``A^s_y = ker Ds`` at the unit over ``y``."""
    n = lie.dim
    return _kernel_basis(np.hstack([np.zeros((n, n)), np.eye(n)]), n)


def _target_kernel(lie: LieAlgebraData, y) -> np.ndarray:
    """Basis of ``A^t_y = ker Dt`` at the unit over ``y``."""
    n = lie.dim
    return _kernel_basis(np.hstack([_coadjoint_jacobian_a(lie, np.zeros(n), y), np.eye(n)]), n)


def _sigma_L(lie: LieAlgebraData, g: ActionGroupoidElement, ks: np.ndarray) -> np.ndarray:
    """Matrix of ``Sigma^L_g(k^s, v) = TR_g k^s + h^L_g v`` on (A^s basis coords, v)."""
    n = lie.dim
    d1, _ = _bch_jacobians(lie, np.zeros(n), g.a)
    # right multiplication R_g(h) = (h.a, x): only the group part moves
    tr = np.vstack([d1 @ ks[:n], np.zeros((n, ks.shape[1]))])
    hl = np.vstack([np.zeros((n, n)), np.eye(n)])
    return np.hstack([tr, hl])


def _sigma_R(lie: LieAlgebraData, g: ActionGroupoidElement, kt: np.ndarray) -> np.ndarray:
    """Matrix of ``Sigma^R_g(v, k^t) = h^R_g v + TL_g k^t`` on (v, A^t basis coords)."""
    n = lie.dim
    _, d2 = _bch_jacobians(lie, g.a, np.zeros(n))
    # h^R_g(v) = Tinv(h^L_{g^-1} v) = (0, Ad*_{-a} v) since inv(b, y) = (-b, Ad*_b y)
    hr = np.vstack([np.zeros((n, n)), ad_function(lie, -g.a, "exp_neg").T])
    tl = np.vstack([d2 @ kt[:n], kt[n:]])
    return np.hstack([hr, tl])


def _phi_h(lie, g1, g2, ks, kt):
    """``phi^h_{g1,g2}`` as a (4n x 3n) matrix on (k^s, v, k^t) coordinates."""
    n = lie.dim
    L = _sigma_L(lie, g1, ks)
    R = _sigma_R(lie, g2, kt)
    out = np.zeros((4 * n, 3 * n))
    out[: 2 * n, : 2 * n] = L
    out[2 * n :, n : 3 * n] = R
    return out


def _pair_coordinates(n: int, vectors: np.ndarray) -> np.ndarray:
    """Project pair tangents (da1, dx1, da2, dx2) to chart coordinates (da1, da2, dx2)."""
    return np.vstack([vectors[:n], vectors[2 * n : 3 * n], vectors[3 * n :]])


def canonical_action_enhancement(lie: LieAlgebraData, g1: ActionGroupoidElement, g2: ActionGroupoidElement, basis: np.ndarray) -> float:
    """``mu_L (x) mu_L (x) mu`` with ``mu_L|_g = L_{g^-1}^* |dp|^(1/2)``, on a basis in (da1, da2, dx2)."""
    n = lie.dim
    T = np.eye(3 * n)
    T[:n, :n] = maurer_cartan(lie, g1.a)
    T[n : 2 * n, n : 2 * n] = maurer_cartan(lie, g2.a)
    return float(abs(np.linalg.det(T @ basis)) ** 0.5)


def canonical_action_enhancement_quotient(lie: LieAlgebraData, g1: ActionGroupoidElement, g2: ActionGroupoidElement, basis: np.ndarray) -> float:
    """``(lambda_G x lambda_G) / mu`` through ``0 -> TG^(2) -> TG x TG -> TM -> 0``.

    ``basis`` is given in (da1, da2, dx2) coordinates and is lifted to
    pair tangents using ``dx1 = D(Ad*)(da2, dx2)``.
    """
    n = lie.dim
    W1 = action_symplectic_form(lie, g1)
    W2 = action_symplectic_form(lie, g2)
    W = np.zeros((4 * n, 4 * n))
    W[: 2 * n, : 2 * n] = W1
    W[2 * n :, 2 * n :] = W2
    lam = AlphaDensity(Fraction(1, 2), np.eye(4 * n), liouville_value(W, np.eye(4 * n)))
    mu = AlphaDensity(Fraction(1, 2), np.eye(n), 1.0)
    dt2 = np.hstack([_coadjoint_jacobian_a(lie, g2.a, g2.x), ad_function(lie, g2.a, "exp_neg").T])
    proj = np.hstack([np.zeros((n, n)), np.eye(n), -dt2])  # Ds1 - Dt2
    pres = ShortExactPresentation.from_kernel(proj)
    sub = subspace_density(lam, mu, pres)
    lifted = np.vstack([basis[:n], dt2 @ basis[n:], basis[n:]])
    return float(abs(sub(lifted)))


def _identity_f(g1, g2) -> float:
    return 1.0


def split_associativity_residual(lie: LieAlgebraData, triple, f=None, sigma_c=None) -> float:
    """Relative defect of the split-form associativity equation for ``sigma = f * sigma_c``.

    ``triple`` is a composable ``(g1, g2, g3)``; ``f(g, h)`` defaults to 1
    and ``sigma_c`` to the closed-form canonical enhancement.
    """
    f = f or _identity_f
    sigma_c = sigma_c or canonical_action_enhancement
    g1, g2, g3 = triple
    n = lie.dim
    for left, right in ((g1, g2), (g2, g3)):
        gap = np.max(np.abs(left.x - action_target(lie, right)))
        if gap > 1e-9:
            raise ValueError(f"triple is not composable (gap {gap:.2e})")
    g12 = action_multiply(lie, g1, g2)
    g23 = action_multiply(lie, g2, g3)

    def sigma_h(g, h, ks, kt, coords):
        vecs = _phi_h(lie, g, h, ks, kt) @ coords
        return f(g, h) * sigma_c(lie, g, h, _pair_coordinates(n, vecs))

    def lam(g, basis):
        return liouville_value(action_symplectic_form(lie, g), basis)

    eye3 = np.eye(3 * n)
    ks1 = _source_kernel(lie, action_target(lie, g1))
    kt2 = _target_kernel(lie, g2.x)
    kt3 = _target_kernel(lie, g3.x)
    ks2 = _source_kernel(lie, action_target(lie, g2))

    lhs = sigma_h(g12, g3, ks1, kt3, eye3) * sigma_h(g1, g2, ks1, kt2, eye3)
    lhs /= lam(g12, _sigma_L(lie, g12, ks1))

    # (Sigma^L_{g2})^{-1} Sigma^R_{g2} expressed in (A^s_{t(g2)}, T_{s(g2)}M) coordinates
    change = np.linalg.solve(_sigma_L(lie, g2, ks2), _sigma_R(lie, g2, kt2))
    coords = np.zeros((3 * n, 3 * n))
    coords[: 2 * n, : 2 * n] = change
    coords[2 * n :, 2 * n :] = np.eye(n)
    rhs = sigma_h(g2, g3, ks2, kt3, coords) * sigma_h(g1, g23, ks1, kt3, eye3)
    rhs /= lam(g23, _sigma_R(lie, g23, kt3))
    if lhs == 0:
        raise LieDomainError("left side vanishes")
    return float(abs(lhs - rhs) / abs(lhs))


# ---------------------------------------------------------------------------
# Duflo identity through the spray pipeline

_PIPELINES: dict = {}


def _pipeline(lie: LieAlgebraData, order: int):
    from .spray_groupoid import Spray, build_generating_function

    key = (lie.name, lie.c.tobytes(), order)
    if key not in _PIPELINES:
        pi = lie_to_poisson(lie)
        spray = Spray(pi, order, p_max=0.5)
        S = build_generating_function(pi, "closed_linear", min(order, BCH_MAX_ORDER), lie, p_max=0.5, spray=spray)
        _PIPELINES[key] = S
    return _PIPELINES[key]


def duflo_identity_residual(lie: LieAlgebraData, p1, p2, x, order: int = 10, F_choice: str = "F_K") -> float:
    """Relative gap between ``gamma_S(p1, p2, x)`` and ``F(p1) F(p2) / F(p1 . p2)``."""
    from .spray_groupoid import ComposablePairChart, gamma_S

    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if max(np.linalg.norm(p1), np.linalg.norm(p2)) > 0.2 + 1e-12:
        raise LieDomainError("covectors must satisfy |p| <= 0.2")
    if order < 8:
        raise ValueError("spray order must be at least 8")
    S = _pipeline(lie, order)
    gamma = gamma_S(S, ComposablePairChart(p1, p2, np.asarray(x, dtype=float)))
    _, ratio = plane_wave_star(lie, F_choice, p1, p2)
    return float(abs(gamma - ratio) / abs(ratio))


def duflo_tilde_ratio(lie: LieAlgebraData, p1, p2) -> float:
    """``|F~(p1) F~(p2) / F~(p1 . p2)|^(1/2)``, equal to the F_K ratio when ``tr ad`` vanishes on brackets."""
    f1 = duflo_factors(lie, p1).F_tilde
    f2 = duflo_factors(lie, p2).F_tilde
    f12 = duflo_factors(lie, bch(lie, p1, p2)).F_tilde
    return float(abs(f1 * f2 / f12) ** 0.5)
