"""Groupoid cochains in the J-chart: differentials, checks and coboundary solvers.

A 2-cochain is a function ``f(p1, p2, x)`` of J-chart coordinates of a
composable pair; a 1-cochain is ``kappa(x, p)`` on arrows.  Polynomial forms
use the variable orders ``(p1, p2, x)`` and ``(p, x)`` respectively.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .densities import (
    AlphaDensity,
    GraphTangentData,
    ShortExactPresentation,
    compose_graph_enhancements,
    liouville_value,
    quotient_density,
    standard_symplectic,
)
from .jets import Poly, monomials
from .spray_groupoid import (
    ComposablePairChart,
    GeneratingFunction,
    gamma_S,
    j_chart,
    triple_chart,
    triple_chart_series,
)

__all__ = [
    "CochainError",
    "Cochain1",
    "Cochain2",
    "EnhancementFactor",
    "CheckRecord",
    "CheckReport",
    "CoboundaryResult",
    "gamma_cochain",
    "log_gamma_cochain",
    "coboundary",
    "delta_mult",
    "delta_add",
    "delta_mult_values",
    "pair_groupoid_delta_mult",
    "unit_propagation_check",
    "identity_axiom_check",
    "mu_sigma",
    "mixed_hessian",
    "symmetry_and_vanest0",
    "coboundary_solve_pi0",
    "graded_coboundary_solve",
    "delta0_poly",
]

RANK_TOL = 1e-10
ROUNDTRIP_TOL = 1e-10
FD_STEP = 1e-3


class CochainError(ValueError):
    """Cochain undefined or failing a precondition."""


@dataclass(frozen=True)
class Cochain1:
    """``kappa(x, p)``; additive cochains are written ``h'(x, p)``."""

    func: Callable
    additive: bool = False
    poly: Poly | None = None

    def __call__(self, x, p):
        return self.func(np.asarray(x, dtype=float), np.asarray(p, dtype=float))

    @classmethod
    def from_poly(cls, poly: Poly, additive: bool = True) -> "Cochain1":
        return cls(lambda x, p: float(poly.evaluate(np.concatenate([p, x]))), additive, poly)


@dataclass(frozen=True)
class Cochain2:
    """``f(p1, p2, x)`` in the J-chart; additive cochains are written ``h``."""

    func: Callable
    additive: bool = False
    poly: Poly | None = None

    def __call__(self, p1, p2, x):
        return self.func(np.asarray(p1, dtype=float), np.asarray(p2, dtype=float), np.asarray(x, dtype=float))

    @classmethod
    def from_poly(cls, poly: Poly, additive: bool = True) -> "Cochain2":
        return cls(lambda p1, p2, x: float(poly.evaluate(np.concatenate([p1, p2, x]))), additive, poly)

    @classmethod
    def constant(cls, value, additive: bool = False) -> "Cochain2":
        return cls(lambda p1, p2, x: value, additive)

    def exp(self) -> "Cochain2":
        if not self.additive:
            raise CochainError("exp applies to additive cochains")
        return Cochain2(lambda p1, p2, x: np.exp(self(p1, p2, x)), False)

    def log(self) -> "Cochain2":
        if self.additive:
            raise CochainError("log applies to multiplicative cochains")
        return Cochain2(lambda p1, p2, x: np.log(self(p1, p2, x)), True)

    def times(self, other: "Cochain2") -> "Cochain2":
        return Cochain2(lambda p1, p2, x: self(p1, p2, x) * other(p1, p2, x), False)


@dataclass(frozen=True)
class EnhancementFactor:
    """``sigma = f * sigma_c``; on the J-chart basis ``sigma`` takes the value ``f * gamma_S``."""

    f: Cochain2

    def sigma_value(self, S: GeneratingFunction, p1, p2, x) -> float:
        return self.f(p1, p2, x) * gamma_S(S, ComposablePairChart(p1, p2, x))


@dataclass
class CheckRecord:
    check: str
    structure: str
    sample: int
    residual: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CheckReport:
    check: str
    records: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def max_residual(self) -> float:
        return max((r.residual for r in self.records), default=0.0)

    @property
    def violations(self) -> list:
        return [r for r in self.records if not r.passed]


def gamma_cochain(S: GeneratingFunction) -> Cochain2:
    """``gamma_S`` as a multiplicative 2-cochain."""
    return Cochain2(lambda p1, p2, x: gamma_S(S, ComposablePairChart(p1, p2, x)))


def log_gamma_cochain(S: GeneratingFunction) -> Cochain2:
    return gamma_cochain(S).log()


# ---------------------------------------------------------------------------
# differentials


def delta_mult_values(f23, f12_3, f1_23, f12):
    """``f(g2,g3) f(g1g2,g3)^-1 f(g1,g2g3) f(g1,g2)^-1`` from the four values."""
    if f12_3 == 0 or f12 == 0:
        raise CochainError("cocycle undefined (zero value)")
    return f23 / f12_3 * f1_23 / f12


def _pair_values(f: Cochain2, S: GeneratingFunction, p1, p2, p3, x):
    tc = triple_chart(S, p1, p2, p3, x)
    return f(p2, p3, tc.xtil), f(tc.pbar, p3, x), f(p1, tc.ptil, x), f(p1, p2, tc.xbar)


def _arrow_values(kappa: Cochain1, S: GeneratingFunction, p1, p2, x):
    g1, g2, g12 = j_chart(S, ComposablePairChart(p1, p2, x))
    return kappa(g1.x, g1.p), kappa(g2.x, g2.p), kappa(g12.x, g12.p)


def delta_mult(f, S: GeneratingFunction, *args):
    """Multiplicative differential.

    For a ``Cochain2`` the arguments are ``(p1, p2, p3, x)`` and the value is 1
    exactly at cocycle triples; for a ``Cochain1`` they are ``(p1, p2, x)``
    and the value is ``kappa(g1) kappa(g2) / kappa(g1 g2)``.
    """
    if isinstance(f, Cochain1):
        k1, k2, k12 = _arrow_values(f, S, *args)
        if k12 == 0:
            raise CochainError("cocycle undefined (zero value)")
        return k1 * k2 / k12
    return delta_mult_values(*_pair_values(f, S, *args))


def delta_add(h, S: GeneratingFunction, *args):
    """Additive differential with the same argument conventions as ``delta_mult``."""
    if isinstance(h, Cochain1):
        k1, k2, k12 = _arrow_values(h, S, *args)
        return k1 + k2 - k12
    f23, f12_3, f1_23, f12 = _pair_values(h, S, *args)
    return f23 - f12_3 + f1_23 - f12


def coboundary(kappa: Cochain1, S: GeneratingFunction) -> Cochain2:
    """``delta kappa`` as a 2-cochain, multiplicative or additive to match ``kappa``."""
    if kappa.additive:
        return Cochain2(lambda p1, p2, x: delta_add(kappa, S, p1, p2, x), True)
    return Cochain2(lambda p1, p2, x: delta_mult(kappa, S, p1, p2, x), False)


def pair_groupoid_delta_mult(f: Callable, x1, x2, x3, x4):
    """Differential on the pair groupoid, pairs ``((x1, x2), (x2, x3))`` written ``f(x1, x2, x3)``."""
    return delta_mult_values(f(x2, x3, x4), f(x1, x3, x4), f(x1, x2, x4), f(x1, x2, x3))


# ---------------------------------------------------------------------------
# unit behaviour and the identity axiom


def unit_propagation_check(f: Cochain2, S: GeneratingFunction, samples, tol: float = 1e-8, structure: str = "") -> CheckReport:
    """Check ``f(1, g) = f(1, 1) = f(g, 1)`` and the inverse identity on arrows ``(x, p)``."""
    spray = S.spray
    report = CheckReport("unit_propagation")
    for k, (x, p) in enumerate(samples):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        zero = np.zeros_like(p)
        s = spray.source(x, p)[0]
        t = spray.target(x, p)[0]
        f_tt = f(zero, zero, t)
        f_ss = f(zero, zero, s)
        if f_tt == 0 or f_ss == 0:
            raise CochainError("cocycle undefined (zero value)")
        left = abs(f(zero, p, x) - f_tt)
        right = abs(f(p, zero, x) - f_ss)
        inverse = abs(f(p, -p, t) - f_ss / f_tt * f(-p, p, s))
        for name, r in (("left", left), ("right", right), ("inverse", inverse)):
            report.records.append(CheckRecord(f"unit_propagation:{name}", structure, k, float(r), bool(r <= tol)))
    return report


def _pair_tangent_basis(S: GeneratingFunction, p1, p2, x) -> np.ndarray:
    """J-chart columns ``d/d(p1, p2, x)`` of ``(g1, g2)`` in coordinates ``(x1, p1, x2, p2)``."""
    n = S.dim
    h = S.derivatives(p1, p2, x)[2]
    eye = np.eye(3 * n)
    return np.vstack([h[:n], eye[:n], h[n : 2 * n], eye[n : 2 * n]])


def mu_sigma(ef: EnhancementFactor, S: GeneratingFunction, x) -> AlphaDensity:
    """``(lambda_G x lambda_G) / sigma`` at ``(1_x, 1_x)`` through ``Ds1 - Dt2``."""
    n = S.dim
    x = np.asarray(x, dtype=float)
    zero = np.zeros(n)
    spray = S.spray
    _, s_dx, s_dp = spray.source(x, zero)
    _, t_dx, t_dp = spray.target(x, zero)
    proj = np.hstack([s_dx, s_dp, -t_dx, -t_dp])
    pres = ShortExactPresentation.from_kernel(proj)
    omega = standard_symplectic(n)
    w2 = np.zeros((4 * n, 4 * n))
    w2[: 2 * n, : 2 * n] = omega
    w2[2 * n :, 2 * n :] = omega
    lam = AlphaDensity(Fraction(1, 2), np.eye(4 * n), liouville_value(w2, np.eye(4 * n)))
    basis = _pair_tangent_basis(S, zero, zero, x)
    value = ef.sigma_value(S, zero, zero, x)
    if value == 0:
        raise CochainError("enhancement vanishes at a unit")
    sigma = AlphaDensity(Fraction(1, 2), basis, value)
    return quotient_density(lam, sigma, pres)


def identity_axiom_check(ef: EnhancementFactor, S: GeneratingFunction, samples, tol: float = 1e-8, structure: str = "") -> CheckReport:
    """Compose ``(gr m, f sigma_c)`` with ``(1_M, mu_sigma)`` on either side at sampled arrows.

    The unit map is ``M x G -> G x G``, ``(y, g) -> (1_y, g)`` (and its mirror),
    so the composite lives on ``{(t(g), g)}``; it must equal ``lambda_G``
    read off on the G-part of its tangent basis.  A further record compares
    ``mu_sigma`` with ``mu / f(1_x, 1_x)``.
    """
    n = S.dim
    omega = standard_symplectic(n)
    w2 = np.zeros((4 * n, 4 * n))
    w2[: 2 * n, : 2 * n] = omega
    w2[2 * n :, 2 * n :] = omega
    spray = S.spray
    report = CheckReport("identity_axiom")
    zero = np.zeros(n)
    for k, (x, p) in enumerate(samples):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        s = spray.source(x, p)[0]
        t = spray.target(x, p)[0]
        for side, unit_base, chart in (("left", t, (zero, p, x)), ("right", s, (p, zero, x))):
            mu = mu_sigma(ef, S, unit_base)
            lam_g = AlphaDensity(Fraction(1, 2), np.eye(2 * n), liouville_value(omega, np.eye(2 * n)))
            unit_tangent = np.vstack([np.eye(n), np.zeros((n, n))])  # T1: y -> (y, 0)
            D = np.zeros((4 * n, 3 * n))
            if side == "left":
                # S1 = M x G, f1(y, g) = (1_y, g)
                D[: 2 * n, :n] = unit_tangent
                D[2 * n :, n:] = np.eye(2 * n)
                s1_value = mu(np.eye(n)) * lam_g(np.eye(2 * n))
                g_rows = slice(n, 3 * n)
            else:
                # S1 = G x M, f1(g, y) = (g, 1_y)
                D[: 2 * n, : 2 * n] = np.eye(2 * n)
                D[2 * n :, 2 * n :] = unit_tangent
                s1_value = lam_g(np.eye(2 * n)) * mu(np.eye(n))
                g_rows = slice(0, 2 * n)
            f1 = GraphTangentData(np.eye(3 * n), D, w2)
            s1 = AlphaDensity(Fraction(1, 2), np.eye(3 * n), s1_value)
            T2 = _pair_tangent_basis(S, *chart)
            s2 = AlphaDensity(Fraction(1, 2), T2, ef.sigma_value(S, *chart))
            hess = S.derivatives(*chart)[2]
            product = np.vstack([np.eye(3 * n)[2 * n :], hess[2 * n :]])  # d(x, dS/dx) on J columns
            f2 = GraphTangentData(T2, product @ np.linalg.pinv(T2), omega)
            composite = compose_graph_enhancements(f1, s1, f2, s2)
            tangent = composite.ref_basis
            expected = liouville_value(omega, tangent[g_rows])
            r = abs(abs(composite.ref_value) - expected) / expected
            report.records.append(CheckRecord(f"identity_axiom:{side}", structure, k, float(r), bool(r <= tol)))
        f_unit = ef.f(zero, zero, x)
        mu_x = mu_sigma(ef, S, x)(np.eye(n))
        r = abs(mu_x - 1.0 / f_unit)
        report.records.append(CheckRecord("identity_axiom:mu_scaling", structure, k, float(r), bool(r <= tol)))
    return report


# ---------------------------------------------------------------------------
# symmetry condition and the skew obstruction


def mixed_hessian(h: Cochain2, x, n: int, step: float = FD_STEP) -> np.ndarray:
    """``d^2 h / dp1_i dp2_j`` at ``(0, 0, x)``.

    Exact from the polynomial form when present; otherwise central
    differences at steps ``h`` and ``h/2`` with Richardson extrapolation.
    """
    x = np.asarray(x, dtype=float)
    if h.poly is not None:
        _, _, hess = h.poly.jet(np.concatenate([np.zeros(2 * n), x]))
        return np.asarray(hess[:n, n : 2 * n], dtype=float)

    def central(eps):
        out = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                a = np.zeros(n)
                b = np.zeros(n)
                a[i] = eps
                b[j] = eps
                out[i, j] = (h(a, b, x) - h(a, -b, x) - h(-a, b, x) + h(-a, -b, x)) / (4 * eps * eps)
        return out

    coarse = central(step)
    fine = central(step / 2)
    return (4 * fine - coarse) / 3


def symmetry_and_vanest0(h: Cochain2, xs, n: int, tol: float = 1e-8):
    """Split the mixed Hessian at ``(0, 0, x)`` into symmetric and skew parts.

    Returns ``(symmetric_parts, skew_parts, passed)``; the check passes when
    every skew part is below ``tol``.
    """
    sym, skew = [], []
    for x in xs:
        H = mixed_hessian(h, x, n)
        sym.append(0.5 * (H + H.T))
        skew.append(0.5 * (H - H.T))
    passed = all(np.max(np.abs(k), initial=0.0) < tol for k in skew)
    return sym, skew, passed


# ---------------------------------------------------------------------------
# coboundary solvers


@dataclass
class CoboundaryResult:
    """Outcome of a coboundary solve.

    On success ``primitive`` holds ``h'`` (polynomial in ``(p, x)``); on
    failure ``degree`` names the first unsolvable p-degree and ``residual``
    the part of ``h`` left over there.
    """

    success: bool
    primitive: Poly | None
    residual: Poly | None = None
    degree: int | None = None
    kernel_dims: dict = field(default_factory=dict)
    roundtrip_error: float = 0.0

    @property
    def cochain(self) -> Cochain1 | None:
        return Cochain1.from_poly(self.primitive) if self.primitive is not None else None


def delta0_poly(hp: Poly, n: int) -> Poly:
    """``h'(x, p1) + h'(x, p2) - h'(x, p1 + p2)`` as a polynomial in ``(p1, p2, x)``."""
    V = 3 * n
    X = list(range(2 * n, 3 * n))
    p = [Poly.variable(i, V) for i in range(2 * n)]
    summed = [p[i] + p[n + i] for i in range(n)]
    a = hp.compose(list(range(n)) + X, nvars=V)
    b = hp.compose(list(range(n, 2 * n)) + X, nvars=V)
    c = hp.compose(summed + X, nvars=V, caps=None)
    return a + b - c


def _delta0_block(n: int, k: int):
    cols = monomials(n, k)
    V = 2 * n
    p = [Poly.variable(i, V) for i in range(V)]
    summed = [p[i] + p[n + i] for i in range(n)]
    basis = Poly(n, cols, np.eye(len(cols)))
    img = basis.compose(p[:n], nvars=V) + basis.compose(p[n:], nvars=V) - basis.compose(summed, nvars=V)
    rows = monomials(V, k)
    index = {tuple(r): i for i, r in enumerate(rows)}
    A = np.zeros((len(rows), len(cols)))
    for e, c in zip(img.exps, img.coef):
        A[index[tuple(e)]] += c
    return A, cols, rows, index


def _split_x(poly: Poly, n_p: int):
    out: dict = {}
    for e, c in zip(poly.exps, poly.coef):
        block = out.setdefault(tuple(int(v) for v in e[n_p:]), {})
        key = tuple(int(v) for v in e[:n_p])
        block[key] = block.get(key, 0.0) + float(c)
    return out


def _check_normalized(h: Poly, n: int):
    if h.nterms == 0:
        return
    d1 = h.degrees(range(n))
    d2 = h.degrees(range(n, 2 * n))
    bad = (d1 == 0) | (d2 == 0)
    if np.any(bad & np.any(np.abs(h.coef.reshape(h.nterms, -1)) > 0, axis=1)):
        raise CochainError("input cochain is not normalized: h(0,p,x) or h(p,0,x) is nonzero")


def _solve_degree(R: Poly, n: int, k: int, kernel_dims: dict):
    """Solve ``delta0 h'_k = R`` for one p-degree; returns (primitive terms, leftover Poly)."""
    A, cols, rows, index = _delta0_block(n, k)
    by_x = _split_x(R, 2 * n)
    xkeys = sorted(by_x)
    rhs = np.zeros((len(rows), len(xkeys)))
    for j, xe in enumerate(xkeys):
        for pe, c in by_x[xe].items():
            rhs[index[pe], j] = c
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > RANK_TOL * max(sv[0], 1.0)))
    kernel_dims[k] = A.shape[1] - rank
    coeffs = Vt[:rank].T @ ((U[:, :rank].T @ rhs) / sv[:rank, None]) if rank else np.zeros((len(cols), len(xkeys)))
    left = rhs - A @ coeffs
    terms = {}
    for j, xe in enumerate(xkeys):
        for i, pe in enumerate(cols):
            if abs(coeffs[i, j]) > 1e-15:
                terms[tuple(pe) + xe] = coeffs[i, j]
    leftover = {}
    for j, xe in enumerate(xkeys):
        for r, pe in enumerate(rows):
            if abs(left[r, j]) > ROUNDTRIP_TOL:
                leftover[tuple(pe) + xe] = left[r, j]
    return terms, Poly.from_terms(leftover, 3 * n)


def coboundary_solve_pi0(h: Cochain2 | Poly, n: int, max_degree: int) -> CoboundaryResult:
    """Find ``h'`` with ``h'(x,p1) + h'(x,p2) - h'(x,p1+p2) = h`` degree by degree."""
    poly = h.poly if isinstance(h, Cochain2) else h
    if poly is None:
        raise CochainError("polynomial form required")
    poly = poly.with_caps(None)
    _check_normalized(poly, n)
    pv = range(2 * n)
    if np.any(poly.degrees(pv) > max_degree):
        raise CochainError(f"input has p-degree above max_degree = {max_degree}")
    kernel_dims: dict = {}
    primitive = Poly.zero(2 * n)
    for k in range(2, max_degree + 1):
        R = poly.part(pv, k)
        if R.nterms == 0:
            continue
        terms, leftover = _solve_degree(R, n, k, kernel_dims)
        primitive = primitive + Poly.from_terms(terms, 2 * n)
        if leftover.nterms:
            return CoboundaryResult(False, None, leftover, k, kernel_dims)
    err = (delta0_poly(primitive, n) - poly).max_abs() if primitive.nterms or poly.nterms else 0.0
    return CoboundaryResult(err <= ROUNDTRIP_TOL, primitive, None, None, kernel_dims, float(err))


def _delta_1cochain_series(hp: Poly, S: Poly, n: int, order: int) -> Poly:
    """``h'(dS/dp1, p1) + h'(dS/dp2, p2) - h'(x, dS/dx)`` truncated at p-degree ``order``."""
    caps = ((tuple(range(2 * n)), order),)
    V = 3 * n
    grad = [S.deriv(v) for v in range(V)]
    X = list(range(2 * n, 3 * n))
    a = hp.compose(list(range(n)) + [g.with_caps(caps) for g in grad[:n]], nvars=V, caps=caps)
    b = hp.compose(list(range(n, 2 * n)) + [g.with_caps(caps) for g in grad[n : 2 * n]], nvars=V, caps=caps)
    c = hp.compose([g.with_caps(caps) for g in grad[2 * n :]] + X, nvars=V, caps=caps)
    return a + b - c


def _delta_2cochain_series(h: Poly, S: Poly, n: int, order: int) -> Poly:
    """Additive differential of a polynomial 2-cochain on the triple ring ``(p1, p2, p3, x)``."""
    W = 4 * n
    caps = ((tuple(range(3 * n)), order),)
    xbar, pbar, xtil, ptil = triple_chart_series(S, n, order)
    P = [list(range(k * n, (k + 1) * n)) for k in range(3)]
    X = list(range(3 * n, 4 * n))
    hc = h.with_caps(None)

    def ev(subs):
        return hc.compose(subs, nvars=W, caps=caps)

    return ev(P[1] + P[2] + xtil) - ev(pbar + P[2] + X) + ev(P[0] + ptil + X) - ev(P[0] + P[1] + xbar)


def graded_coboundary_solve(h: Cochain2 | Poly, S: GeneratingFunction, max_degree: int, check_cocycle: bool = True) -> CoboundaryResult:
    """Solve ``delta h' = h`` over the spray groupoid by recursion on p-degree.

    At degree ``m`` the leading operator is the pi = 0 differential, so
    ``delta0 h'_m = [h - delta(h'_2 + .. + h'_{m-1})]_m`` is handed to the
    pi = 0 solver.  The cocycle and symmetry preconditions are checked first.
    """
    poly = h.poly if isinstance(h, Cochain2) else h
    if poly is None:
        raise CochainError("polynomial form required")
    n = S.dim
    poly = poly.with_caps(None)
    _check_normalized(poly, n)
    pv = range(2 * n)
    poly = poly.upto(pv, max_degree)
    if check_cocycle:
        d = _delta_2cochain_series(poly, S.poly, n, max_degree)
        for k in range(max_degree + 1):
            if d.part(range(3 * n), k).max_abs() > ROUNDTRIP_TOL:
                raise CochainError(f"cocycle precondition failed at degree {k}")
    quad = poly.part(pv, 2)
    skew_terms = _split_x(quad, 2 * n)
    for xe, block in skew_terms.items():
        M = np.zeros((n, n))
        for pe, c in block.items():
            i = int(np.argmax(pe[:n]))
            j = int(np.argmax(pe[n:]))
            if sum(pe[:n]) == 1 and sum(pe[n:]) == 1:
                M[i, j] += c
        if np.max(np.abs(M - M.T), initial=0.0) > 1e-8:
            raise CochainError("symmetry precondition failed: skew mixed Hessian")
    kernel_dims: dict = {}
    primitive = Poly.zero(2 * n)
    for m in range(2, max_degree + 1):
        lower = _delta_1cochain_series(primitive, S.poly, n, m) if primitive.nterms else Poly.zero(3 * n)
        R = (poly - lower).part(pv, m)
        if R.max_abs() <= ROUNDTRIP_TOL:
            continue
        terms, leftover = _solve_degree(R, n, m, kernel_dims)
        if leftover.nterms:
            return CoboundaryResult(False, None, leftover, m, kernel_dims)
        primitive = primitive + Poly.from_terms(terms, 2 * n)
    final = _delta_1cochain_series(primitive, S.poly, n, max_degree) if primitive.nterms else Poly.zero(3 * n)
    err = (final - poly).upto(pv, max_degree).max_abs()
    return CoboundaryResult(err <= ROUNDTRIP_TOL, primitive, None, None, kernel_dims, float(err))
