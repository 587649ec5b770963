"""Local symplectic groupoid on T*M built from the flat Poisson spray.

Coordinates: an arrow is ``g = (x, p)``; composable pairs are parameterized
by ``(p1, p2, x)`` through the generating function ``S``:
``g1 = (dS/dp1, p1)``, ``g2 = (dS/dp2, p2)``, ``g1 g2 = (x, dS/dx)``.
Generating-function polynomials use the variable order ``(p1, p2, x)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .jets import Poly, TruncatedSeries, XJetScalar, definite_time_integral, monomials
from .poisson import LieAlgebraData, PoissonStructure

__all__ = [
    "DomainError",
    "GroupoidPoint",
    "ComposablePairChart",
    "TripleChart",
    "Spray",
    "GeneratingFunction",
    "spray_average_Q",
    "spray_average_Q_poly",
    "source_series_poly",
    "source_target",
    "realization_residual",
    "build_generating_function",
    "multiply",
    "j_chart",
    "gamma_S",
    "triple_chart",
    "sga_residual",
    "a0_residual",
    "convolve_bisections",
    "taylor_S_family",
    "triple_chart_series",
    "sga_defect_series",
    "DEFAULT_ORDER",
    "P_MAX",
]

DEFAULT_ORDER = 8
P_MAX = 0.25
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12
RANK_TOL = 1e-10


class DomainError(ValueError):
    """Point outside the local domain where the implicit solves converge."""


@dataclass(frozen=True)
class GroupoidPoint:
    """Arrow ``(x, p)`` of the local groupoid; units are ``(x, 0)``."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))

    @property
    def is_unit(self) -> bool:
        return not np.any(self.p)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])


@dataclass(frozen=True)
class ComposablePairChart:
    """J-chart coordinates ``(p1, p2, x)`` of a composable pair."""

    p1: np.ndarray
    p2: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        for name in ("p1", "p2", "x"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


@dataclass(frozen=True)
class TripleChart:
    """Solved auxiliary points of a composable triple ``(p1, p2, p3, x)``."""

    xbar: np.ndarray
    pbar: np.ndarray
    xtil: np.ndarray
    ptil: np.ndarray


# ---------------------------------------------------------------------------
# spray flow and its time average


def _picard_flow(pi: PoissonStructure, x0: list, pvars: list, part: Callable, order: int) -> list:
    """Time-one flow of ``x' = pi(x) p`` as a series in p.

    The flow at time ``u`` is the time-one flow at ``u p``, so the degree-k
    part of the time-one map carries ``u^k``.  One Picard step reads
    ``phi <- x0 + sum_m (1/m) [pi(phi) p]_m`` and fixes one more order.
    """
    n = pi.dim
    phi = list(x0)
    if pi.is_zero:
        return phi
    for _ in range(order):
        rhs = pi.apply_series(phi, pvars)
        new = []
        for i in range(n):
            acc = x0[i]
            if rhs[i] is not None:
                for m in range(1, order + 1):
                    acc = acc + part(rhs[i], m) * (1.0 / m)
            new.append(acc)
        phi = new
    return phi


def _average(phi: list, part: Callable, order: int) -> list:
    """``Q = int_0^1 phi_u du`` using the u-grading of the p-degree parts."""
    return [definite_time_integral([part(c, k) for k in range(order + 1)]) for c in phi]


def spray_average_Q(pi: PoissonStructure, x_tilde, order: int = DEFAULT_ORDER) -> list[TruncatedSeries]:
    """``Q(x_tilde, p)`` as series in p whose coefficients are x-jets at ``x_tilde``."""
    if order < 1:
        raise ValueError("order must be at least 1")
    n = pi.dim
    x_tilde = np.asarray(x_tilde, dtype=float)
    x0 = [TruncatedSeries.constant(XJetScalar.coordinate(x_tilde, i), n, order) for i in range(n)]
    pvars = [TruncatedSeries.variable(j, n, order) for j in range(n)]
    part = lambda s, m: s.homogeneous(m)  # noqa: E731
    phi = _picard_flow(pi, x0, pvars, part, order)
    return _average(phi, part, order)


def spray_average_Q_poly(pi: PoissonStructure, order: int = DEFAULT_ORDER) -> Poly:
    """``Q`` as a vector polynomial in ``(x_tilde, p)`` truncated at p-degree ``order``."""
    n = pi.dim
    pv = tuple(range(n, 2 * n))
    caps = ((pv, order),)
    x0 = [Poly.variable(i, 2 * n, caps) for i in range(n)]
    pvars = [Poly.variable(n + j, 2 * n, caps) for j in range(n)]
    part = lambda s, m: s.part(pv, m)  # noqa: E731
    phi = _picard_flow(pi, x0, pvars, part, order)
    return Poly.stack(_average(phi, part, order))


def _vector_identity(n: int, nvars: int, offset: int, caps) -> Poly:
    exps = np.zeros((n, nvars), np.int64)
    exps[np.arange(n), offset + np.arange(n)] = 1
    return Poly(nvars, exps, np.eye(n), caps)


def source_series_poly(Q: Poly, n: int, order: int) -> Poly:
    """Series of ``s(x, p)`` solving ``Q(s, p) = x``, by the iteration ``s <- s + x - Q(s, p)``."""
    caps = Q.caps
    xvec = _vector_identity(n, 2 * n, 0, caps)
    s = xvec
    for _ in range(order + 1):
        comps = [s.component(i) for i in range(n)]
        Qs = Q.compose(comps + [n + j for j in range(n)])
        s = s + xvec - Qs
    return s


class Spray:
    """Evaluator of ``Q``, the source and the target of one Poisson structure.

    With ``symbolic=True`` (default for structures of degree at most two)
    ``Q`` is kept as a polynomial in ``(x_tilde, p)``; otherwise it is
    rebuilt as an x-jet series at each base point.
    """

    def __init__(self, pi: PoissonStructure, order: int = DEFAULT_ORDER, p_max: float = P_MAX, symbolic: bool | None = None):
        self.pi = pi
        self.n = pi.dim
        self.order = int(order)
        self.p_max = float(p_max)
        self.symbolic = pi.degree <= 2 if symbolic is None else bool(symbolic)
        self.Q_poly = spray_average_Q_poly(pi, self.order) if self.symbolic else None
        self.s_poly = source_series_poly(self.Q_poly, self.n, self.order) if self.symbolic else None

    def _check_p(self, p):
        if np.linalg.norm(p) > self.p_max:
            raise DomainError(f"outside local domain: |p| = {np.linalg.norm(p):.3g} exceeds p_max = {self.p_max}")

    def Q(self, x_tilde, p):
        """``(Q, dQ/dx_tilde, dQ/dp)`` at one point."""
        x_tilde = np.asarray(x_tilde, dtype=float)
        p = np.asarray(p, dtype=float)
        n = self.n
        if self.symbolic:
            val, grad, _ = self.Q_poly.jet(np.concatenate([x_tilde, p]))
            return val, grad[:n].T, grad[n:].T
        series = spray_average_Q(self.pi, x_tilde, self.order)
        val = np.empty(n)
        dx = np.empty((n, n))
        dp = np.empty((n, n))
        for i, s in enumerate(series):
            v, g, _ = s.poly.jet(p)
            val[i] = v[0]
            dx[i] = v[1 : 1 + n]
            dp[i] = g[:, 0]
        return val, dx, dp

    def initial_source(self, x, p) -> np.ndarray:
        if self.s_poly is not None:
            return self.s_poly.evaluate(np.concatenate([x, p]))
        return x - 0.5 * self.pi.matrix(x) @ p

    def source(self, x, p, check_domain: bool = True):
        """``(s, ds/dx, ds/dp)`` by Newton on ``Q(s, p) = x``."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if check_domain:
            self._check_p(p)
        xt = self.initial_source(x, p)
        scale = 1.0 + np.max(np.abs(x))
        for _ in range(NEWTON_MAX_ITER):
            val, dx, dp = self.Q(xt, p)
            r = val - x
            if np.max(np.abs(r)) <= NEWTON_TOL * scale:
                # one polishing step keeps the result smooth in (x, p)
                xt = xt - np.linalg.solve(dx, r)
                _, dx, dp = self.Q(xt, p)
                inv = np.linalg.inv(dx)
                return xt, inv, -inv @ dp
            xt = xt - np.linalg.solve(dx, r)
        raise DomainError("outside local domain: source Newton did not converge in 50 iterations")

    def target(self, x, p, check_domain: bool = True):
        """``t(x, p) = s(x, -p)`` with derivatives."""
        t, dx, dp = self.source(x, -np.asarray(p, dtype=float), check_domain)
        return t, dx, -dp


@dataclass(frozen=True)
class MapJet:
    """Value of a map ``(x, p) -> M`` with its x- and p-Jacobians."""

    value: np.ndarray
    d_x: np.ndarray
    d_p: np.ndarray


def realization_residual(spray: Spray, x, p) -> float:
    """``max |{s^i, s^j} - pi^{ij}(s)|`` for the canonical bracket on ``(x, p)``."""
    s, A, B = spray.source(x, p)
    return float(np.max(np.abs(A @ B.T - B @ A.T - spray.pi.matrix(s))))


def source_target(pi: PoissonStructure, x, p, order: int = DEFAULT_ORDER, spray: Spray | None = None):
    """``(s(x, p), t(x, p))`` with first derivatives."""
    spray = spray or Spray(pi, order)
    return MapJet(*spray.source(x, p)), MapJet(*spray.target(x, p))


# ---------------------------------------------------------------------------
# generating function


def _split(n: int, grad: np.ndarray):
    return grad[:n], grad[n : 2 * n], grad[2 * n :]


@dataclass
class GeneratingFunction:
    """Evaluator of ``S(p1, p2, x)`` with gradient and Hessian in the order ``(p1, p2, x)``.

    ``poly`` holds the polynomial form whenever the backend has one; the
    series backend and all closed forms do.
    """

    backend: str
    pi: PoissonStructure
    order: int
    poly: Poly
    lie: LieAlgebraData | None = None
    orientation: str = "p2p1"
    bch_poly: Poly | None = None
    p_max: float = P_MAX
    warnings: list = field(default_factory=list)
    _spray: Spray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.pi.dim

    @property
    def spray(self) -> Spray:
        if self._spray is None:
            self._spray = Spray(self.pi, max(self.order, DEFAULT_ORDER), self.p_max)
        return self._spray

    def with_spray(self, spray: Spray) -> "GeneratingFunction":
        self._spray = spray
        return self

    def derivatives(self, p1, p2, x):
        """``(S, grad S, Hess S)`` at one point."""
        n = self.dim
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.backend == "closed_zero":
            return _zero_derivatives(p1, p2, x)
        if self.backend == "closed_constant":
            val, grad, hess = _zero_derivatives(p1, p2, x)
            P = self.pi.matrix(np.zeros(n))
            val = val + 0.5 * p1 @ P @ p2
            grad[:n] += 0.5 * P @ p2
            grad[n : 2 * n] += 0.5 * P.T @ p1
            hess[:n, n : 2 * n] += 0.5 * P
            hess[n : 2 * n, :n] += 0.5 * P.T
            return val, grad, hess
        if self.backend == "closed_linear":
            return self._linear_derivatives(p1, p2, x)
        return self.poly.jet(np.concatenate([p1, p2, x]))

    def _linear_derivatives(self, p1, p2, x):
        n = self.dim
        first, second = (p2, p1) if self.orientation == "p2p1" else (p1, p2)
        zval, zgrad, zhess = self.bch_poly.jet(np.concatenate([first, second]))
        # reorder (first, second) blocks to (p1, p2)
        perm = np.r_[n:2 * n, 0:n] if self.orientation == "p2p1" else np.arange(2 * n)
        zgrad = zgrad[perm]
        zhess = zhess[np.ix_(perm, perm)]
        val = float(x @ zval)
        grad = np.concatenate([zgrad @ x, zval])
        hess = np.zeros((3 * n, 3 * n))
        hess[: 2 * n, : 2 * n] = zhess @ x
        hess[: 2 * n, 2 * n :] = zgrad
        hess[2 * n :, : 2 * n] = zgrad.T
        return val, grad, hess

    def value(self, p1, p2, x) -> float:
        if self.backend in ("closed_zero", "closed_constant", "closed_linear"):
            return float(self.derivatives(p1, p2, x)[0])
        return float(self.poly.evaluate(np.concatenate([p1, p2, x])))

    def gradients(self, p1, p2, x):
        """``(dS/dp1, dS/dp2, dS/dx)``."""
        return _split(self.dim, self.derivatives(p1, p2, x)[1])

    def hessian_blocks(self, p1, p2, x) -> dict:
        n = self.dim
        h = self.derivatives(p1, p2, x)[2]
        sl = {"p1": slice(0, n), "p2": slice(n, 2 * n), "x": slice(2 * n, 3 * n)}
        return {(a, b): h[sl[a], sl[b]] for a in sl for b in sl}


def _zero_derivatives(p1, p2, x):
    n = len(x)
    val = float(x @ (p1 + p2))
    grad = np.concatenate([x, x, p1 + p2])
    hess = np.zeros((3 * n, 3 * n))
    eye = np.eye(n)
    hess[:n, 2 * n :] = eye
    hess[n : 2 * n, 2 * n :] = eye
    hess[2 * n :, :n] = eye
    hess[2 * n :, n : 2 * n] = eye
    return val, grad, hess


def _s_caps(n: int, order: int):
    return ((tuple(range(2 * n)), order),)


def _zero_poly(n: int, order: int) -> Poly:
    caps = _s_caps(n, order)
    terms = {}
    for i in range(n):
        for off in (0, n):
            e = [0] * (3 * n)
            e[off + i] = 1
            e[2 * n + i] = 1
            terms[tuple(e)] = 1.0
    return Poly.from_terms(terms, 3 * n, (), caps)


def _constant_poly(pi: PoissonStructure, order: int) -> Poly:
    n = pi.dim
    P = pi.matrix(np.zeros(n))
    terms = {}
    for i in range(n):
        for j in range(n):
            if P[i, j]:
                e = [0] * (3 * n)
                e[i] += 1
                e[n + j] += 1
                terms[tuple(e)] = 0.5 * P[i, j]
    return _zero_poly(n, order) + Poly.from_terms(terms, 3 * n, (), _s_caps(n, order))


def _linear_poly(lie: LieAlgebraData, Z: Poly, orientation: str, order: int) -> Poly:
    n = lie.dim
    caps = _s_caps(n, order)
    first, second = (range(n, 2 * n), range(n)) if orientation == "p2p1" else (range(n), range(n, 2 * n))
    mapping = list(first) + list(second)
    total = Poly.zero(3 * n, (), caps)
    for k in range(n):
        comp = Z.component(k).embed(mapping, 3 * n, caps)
        total = total + comp * Poly.variable(2 * n + k, 3 * n, caps)
    return total


def _linear_orientation(pi: PoissonStructure, lie: LieAlgebraData) -> str:
    """Pick the BCH argument order matching the sign in ``pi = sign * c x``."""
    n = pi.dim
    minus = all(np.allclose(pi.matrix(np.eye(n)[k]), -lie.c[:, :, k]) for k in range(n))
    plus = all(np.allclose(pi.matrix(np.eye(n)[k]), lie.c[:, :, k]) for k in range(n))
    if minus:
        return "p2p1"
    if plus:
        return "p1p2"
    raise ValueError("Poisson structure is not the linear structure of the given Lie algebra")


def build_generating_function(pi: PoissonStructure, backend: str | None = None, order: int = DEFAULT_ORDER, lie: LieAlgebraData | None = None, p_max: float = P_MAX, spray: Spray | None = None) -> GeneratingFunction:
    """Generating function of the spray groupoid.

    Backends: ``closed_zero`` (``x.(p1+p2)``), ``closed_constant``
    (``+ 1/2 p1.pi p2``), ``closed_linear`` (``<x, BCH>``, argument order
    fixed by the sign of ``pi``) and ``series`` (order-by-order solve).
    ``backend=None`` picks the closed form that fits the structure.
    """
    lie = lie if lie is not None else pi.lie
    if backend is None:
        if pi.is_zero:
            backend = "closed_zero"
        elif pi.degree == 0:
            backend = "closed_constant"
        elif pi.degree == 1 and lie is not None:
            backend = "closed_linear"
        else:
            backend = "series"
    n = pi.dim
    if backend == "closed_zero":
        if not pi.is_zero:
            raise ValueError("closed_zero requires the zero structure")
        gf = GeneratingFunction(backend, pi, order, _zero_poly(n, order), p_max=p_max)
    elif backend == "closed_constant":
        if pi.degree > 0:
            raise ValueError("closed_constant requires a constant structure")
        gf = GeneratingFunction(backend, pi, order, _constant_poly(pi, order), p_max=p_max)
    elif backend == "closed_linear":
        if lie is None:
            raise ValueError("closed_linear requires Lie algebra data")
        from .liecase import bch_series

        orientation = _linear_orientation(pi, lie)
        Z = bch_series(lie, order)
        gf = GeneratingFunction(backend, pi, order, _linear_poly(lie, Z, orientation, order), lie, orientation, Z, p_max=p_max)
    elif backend == "series":
        poly, notes = _solve_series(pi, order)
        gf = GeneratingFunction(backend, pi, order, poly, lie, p_max=p_max, warnings=notes)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if spray is not None:
        gf.with_spray(spray)
    return gf


# ---------------------------------------------------------------------------
# series machinery on the triple ring (p1, p2, p3, x)


def triple_chart_series(S: Poly, n: int, order: int, iterations: int | None = None, start=None):
    """``(xbar, pbar, xtil, ptil)`` as vector polynomials in ``(p1, p2, p3, x)``.

    Fixed-point iteration of the defining relations, truncated at p-degree
    ``order``; each pass fixes at least one more order.  ``start`` is an
    initial chart, e.g. the one from a lower truncation of ``S``.
    """
    W = 4 * n
    caps = ((tuple(range(3 * n)), order),)
    P = [list(range(k * n, (k + 1) * n)) for k in range(3)]
    X = list(range(3 * n, 4 * n))
    grad = [S.deriv(v).with_caps(None) for v in range(3 * n)]
    ga, gb, gy = (Poly.stack(grad[k * n : (k + 1) * n]) for k in range(3))

    def var(i):
        return Poly.variable(i, W, caps)

    def sub(stacked, subs):
        out = stacked.compose(subs, nvars=W, caps=caps)
        return [out.component(i) for i in range(n)]

    if start is not None:
        xbar, pbar, xtil, ptil = ([q.with_caps(caps) for q in block] for block in start)
    else:
        xbar = [var(i) for i in X]
        pbar = [var(a) + var(b) for a, b in zip(P[0], P[1])]
        xtil = [var(i) for i in X]
        ptil = [var(a) + var(b) for a, b in zip(P[1], P[2])]
    for _ in range(iterations if iterations is not None else order + 1):
        xbar = sub(ga, pbar + P[2] + X)
        pbar = sub(gy, P[0] + P[1] + xbar)
        xtil = sub(gb, P[0] + ptil + X)
        ptil = sub(gy, P[1] + P[2] + xtil)
    return xbar, pbar, xtil, ptil


def _dot(a: list, b: list) -> Poly:
    out = a[0] * b[0]
    for u, v in zip(a[1:], b[1:]):
        out = out + u * v
    return out


def sga_defect_series(S: Poly, n: int, order: int, chart=None) -> Poly:
    """``LHS - RHS`` of the SGA equation as a polynomial in ``(p1, p2, p3, x)``."""
    W = 4 * n
    caps = ((tuple(range(3 * n)), order),)
    xbar, pbar, xtil, ptil = chart or triple_chart_series(S, n, order)
    P = [list(range(k * n, (k + 1) * n)) for k in range(3)]
    X = list(range(3 * n, 4 * n))
    Sc = S.with_caps(None)

    def ev(subs):
        return Sc.compose(subs, nvars=W, caps=caps)

    lhs = ev(P[0] + P[1] + xbar) + ev(pbar + P[2] + X) - _dot(xbar, pbar)
    rhs = ev(P[1] + P[2] + xtil) + ev(P[0] + ptil + X) - _dot(xtil, ptil)
    return lhs - rhs


@lru_cache(maxsize=64)
def _delta0_matrix(n: int, k: int):
    """Matrix of ``m -> m(p1,p2) + m(p1+p2,p3) - m(p2,p3) - m(p1,p2+p3)`` on degree-k monomials."""
    cols = monomials(2 * n, k)
    rows = monomials(3 * n, k)
    row_index = {tuple(r): i for i, r in enumerate(rows)}
    V = 3 * n
    p = [Poly.variable(i, V) for i in range(V)]
    P1, P2, P3 = p[:n], p[n : 2 * n], p[2 * n :]
    s12 = [a + b for a, b in zip(P1, P2)]
    s23 = [a + b for a, b in zip(P2, P3)]
    # all monomials at once: payload j carries monomial j
    basis = Poly(2 * n, cols, np.eye(len(cols)))
    total = (
        basis.compose(P1 + P2, nvars=V)
        + basis.compose(s12 + P3, nvars=V)
        - basis.compose(P2 + P3, nvars=V)
        - basis.compose(P1 + s23, nvars=V)
    )
    A = np.zeros((len(rows), len(cols)))
    for row, c in zip(total.exps, total.coef):
        A[row_index[tuple(row)]] += c
    return A, cols, rows


@lru_cache(maxsize=64)
def _slice_matrices(n: int, k: int):
    """Linear maps from degree-k S blocks to the degree-(k-1) slices s, t and Q."""
    cols = monomials(2 * n, k)
    tgt = monomials(n, k - 1)
    tindex = {tuple(r): i for i, r in enumerate(tgt)}
    p = [Poly.variable(i, n) for i in range(n)]
    zero = Poly.zero(n)
    basis = Poly(2 * n, cols, np.eye(len(cols)))
    mats = {}
    subs = {
        "s": (p, [zero] * n, n),  # d/dp2 at (p, 0)
        "t": ([zero] * n, p, 0),  # d/dp1 at (0, p)
        "Q": ([-q for q in p], p, n),  # d/dp2 at (-p, p)
    }
    for name, (a, b, off) in subs.items():
        M = np.zeros((n * len(tgt), len(cols)))
        for i in range(n):
            val = basis.deriv(off + i).compose(a + b, nvars=n)
            for row, c in zip(val.exps, val.coef):
                M[i * len(tgt) + tindex[tuple(row)]] += c
        mats[name] = M
    return mats, cols, tgt


def _split_by_x(poly: Poly, p_vars, x_vars):
    """Map x-exponent tuple -> {p-exponent tuple: coefficient}."""
    out: dict = {}
    for row, c in zip(poly.exps, poly.coef):
        xe = tuple(int(v) for v in row[x_vars])
        pe = tuple(int(v) for v in row[p_vars])
        block = out.setdefault(xe, {})
        block[pe] = block.get(pe, 0.0) + float(c)
    return out


def _solve_series(pi: PoissonStructure, order: int):
    """Order-by-order solve of the SGA equation with spray slice constraints."""
    n = pi.dim
    notes = []
    caps = _s_caps(n, order)
    S = _zero_poly(n, order)
    if order < 2:
        return S, notes
    Q = spray_average_Q_poly(pi, order - 1)
    s_poly = source_series_poly(Q, n, order - 1)
    t_poly = s_poly.compose(list(range(n)) + [Poly.variable(n + j, 2 * n, s_poly.caps) * -1.0 for j in range(n)])
    slices = {"s": s_poly, "t": t_poly, "Q": Q}
    pv2 = np.arange(n, 2 * n)
    xv2 = np.arange(n)
    chart = None
    for k in range(2, order + 1):
        # the degree k-1 block added last step moves the chart from degree k-2 up,
        # so three passes from the previous chart reach degree k
        chart = triple_chart_series(S, n, k, 3, chart) if chart else triple_chart_series(S, n, k)
        defect = sga_defect_series(S, n, k, chart).part(range(3 * n), k)
        A, cols, rows = _delta0_matrix(n, k)
        mats, _, tgt = _slice_matrices(n, k)
        M = np.vstack([A, mats["s"], mats["t"], mats["Q"]])
        row_index = {tuple(r): i for i, r in enumerate(rows)}
        tindex = {tuple(r): i for i, r in enumerate(tgt)}
        by_x = _split_by_x(defect, np.arange(3 * n), np.arange(3 * n, 4 * n))
        slice_by_x = {}
        for name, poly in slices.items():
            for i in range(n):
                comp = poly.component(i).part(range(n, 2 * n), k - 1)
                for xe, terms in _split_by_x(comp, pv2, xv2).items():
                    slice_by_x.setdefault(xe, {}).setdefault(name, {})[i] = terms
        xkeys = sorted(set(by_x) | set(slice_by_x))
        rhs = np.zeros((M.shape[0], len(xkeys)))
        ntgt = len(tgt)
        offsets = {"s": A.shape[0], "t": A.shape[0] + n * ntgt, "Q": A.shape[0] + 2 * n * ntgt}
        for col, xe in enumerate(xkeys):
            for pe, c in by_x.get(xe, {}).items():
                rhs[row_index[pe], col] = -c
            for name, comps in slice_by_x.get(xe, {}).items():
                for i, terms in comps.items():
                    for pe, c in terms.items():
                        rhs[offsets[name] + i * ntgt + tindex[pe], col] += c
        U, sv, Vt = np.linalg.svd(M, full_matrices=False)
        rank = int(np.sum(sv > RANK_TOL * sv[0]))
        if rank < M.shape[1]:
            msg = f"order {k}: system underdetermined (rank {rank} < {M.shape[1]}); minimal-norm block taken"
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        coeffs = Vt[:rank].T @ ((U[:, :rank].T @ rhs) / sv[:rank, None])
        resid = np.max(np.abs(M @ coeffs - rhs), initial=0.0)
        if resid > 1e-8 * max(1.0, np.max(np.abs(rhs), initial=0.0)):
            raise ValueError(f"series backend: slice-consistency check failed at order {k} (residual {resid:.2e})")
        terms = {}
        for col, xe in enumerate(xkeys):
            for j, pe in enumerate(cols):
                c = coeffs[j, col]
                if abs(c) > 1e-15:
                    terms[tuple(pe) + xe] = c
        S = S + Poly.from_terms(terms, 3 * n, (), caps)
    return S, notes


def taylor_S_family(pi: PoissonStructure, max_order: int, gf: GeneratingFunction | None = None) -> dict[int, Poly]:
    """Blocks of the series generating function grouped by p-degree.

    The degree-k block carries ``eps^(k-1)`` under ``pi -> eps pi``.
    """
    gf = gf or build_generating_function(pi, "series", max_order)
    n = pi.dim
    return {k: gf.poly.part(range(2 * n), k) for k in range(1, max_order + 1)}


# ---------------------------------------------------------------------------
# pointwise groupoid operations


def j_chart(S: GeneratingFunction, chart: ComposablePairChart):
    """``(g1, g2, g1 g2)`` for J-chart coordinates."""
    g1p, g2p, gx = S.gradients(chart.p1, chart.p2, chart.x)
    return GroupoidPoint(g1p, chart.p1), GroupoidPoint(g2p, chart.p2), GroupoidPoint(chart.x, gx)


def multiply(S: GeneratingFunction, g1: GroupoidPoint, g2: GroupoidPoint, tol: float = 1e-9) -> GroupoidPoint:
    """Product of two composable arrows through the generating function."""
    spray = S.spray
    s1 = spray.source(g1.x, g1.p)[0]
    t2 = spray.target(g2.x, g2.p)[0]
    if np.max(np.abs(s1 - t2)) > tol:
        raise ValueError(f"arrows are not composable (gap {np.max(np.abs(s1 - t2)):.2e})")
    n = S.dim
    x = g1.x.copy()
    target = np.concatenate([g1.x, g2.x])
    for _ in range(NEWTON_MAX_ITER):
        _, grad, hess = S.derivatives(g1.p, g2.p, x)
        r = grad[: 2 * n] - target
        if np.max(np.abs(r)) <= NEWTON_TOL * (1 + np.max(np.abs(target))):
            return GroupoidPoint(x, grad[2 * n :])
        J = hess[: 2 * n, 2 * n :]
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        x = x - step
    raise DomainError("outside local domain: multiplication Newton did not converge")


def _mixed_p1x(S: GeneratingFunction, p1, p2, x):
    n = S.dim
    _, grad, hess = S.derivatives(p1, p2, x)
    return grad, hess[:n, 2 * n :]


def gamma_S(S: GeneratingFunction, chart: ComposablePairChart, spray: Spray | None = None) -> float:
    """Canonical factor of the J-chart: ``|det(dx~/dx) det(dQ(x~,p1)) det(dQ~(x~,p2))|^(1/2)``."""
    spray = spray or S.spray
    n = S.dim
    grad, dx1_dx = _mixed_p1x(S, chart.p1, chart.p2, chart.x)
    x1 = grad[:n]
    xt, _, _ = spray.source(x1, chart.p1)
    _, Qx1, _ = spray.Q(xt, chart.p1)
    _, Qx2, _ = spray.Q(xt, -chart.p2)
    dxt_dx = np.linalg.solve(Qx1, dx1_dx)
    return float(abs(np.linalg.det(dxt_dx) * np.linalg.det(Qx1) * np.linalg.det(Qx2)) ** 0.5)


def _newton_pair(F, z0, scale):
    z = z0.copy()
    r, J = F(z)
    norm = np.max(np.abs(r))
    for _ in range(NEWTON_MAX_ITER):
        if norm <= 1e-13 * scale:
            return z
        step = np.linalg.solve(J, r)
        lam = 1.0
        while True:
            cand = z - lam * step
            rc, Jc = F(cand)
            nc = np.max(np.abs(rc))
            if nc < norm or lam < 1e-4:
                break
            lam *= 0.5
        z, r, J, norm = cand, rc, Jc, nc
    if norm <= 1e-11 * scale:
        return z
    raise DomainError("outside local domain: implicit triple solve did not converge")


def triple_chart(S: GeneratingFunction, p1, p2, p3, x) -> TripleChart:
    """Solve for ``(xbar, pbar)`` and ``(xtil, ptil)`` by damped Newton."""
    n = S.dim
    p1, p2, p3, x = (np.asarray(v, dtype=float) for v in (p1, p2, p3, x))
    eye = np.eye(n)
    scale = 1.0 + np.max(np.abs(x))

    def bar(z):
        xb, pb = z[:n], z[n:]
        _, ga, ha = S.derivatives(pb, p3, x)
        _, gb, hb = S.derivatives(p1, p2, xb)
        r = np.concatenate([xb - ga[:n], pb - gb[2 * n :]])
        J = np.block([[eye, -ha[:n, :n]], [-hb[2 * n :, 2 * n :], eye]])
        return r, J

    def til(z):
        xt, pt = z[:n], z[n:]
        _, ga, ha = S.derivatives(p1, pt, x)
        _, gb, hb = S.derivatives(p2, p3, xt)
        r = np.concatenate([xt - ga[n : 2 * n], pt - gb[2 * n :]])
        J = np.block([[eye, -ha[n : 2 * n, n : 2 * n]], [-hb[2 * n :, 2 * n :], eye]])
        return r, J

    zb = _newton_pair(bar, np.concatenate([x, p1 + p2]), scale)
    zt = _newton_pair(til, np.concatenate([x, p2 + p3]), scale)
    return TripleChart(zb[:n], zb[n:], zt[:n], zt[n:])


def sga_sides(S: GeneratingFunction, p1, p2, p3, x, tc: TripleChart | None = None):
    tc = tc or triple_chart(S, p1, p2, p3, x)
    lhs = S.value(p1, p2, tc.xbar) + S.value(tc.pbar, p3, x) - tc.xbar @ tc.pbar
    rhs = S.value(p2, p3, tc.xtil) + S.value(p1, tc.ptil, x) - tc.xtil @ tc.ptil
    return lhs, rhs


def sga_residual(S: GeneratingFunction, p1, p2, p3, x) -> float:
    """``|LHS - RHS|`` of the SGA equation at one triple."""
    lhs, rhs = sga_sides(S, p1, p2, p3, x)
    return float(abs(lhs - rhs))


def a0_residual(S: GeneratingFunction, a0: Callable, p1, p2, p3, x) -> float:
    """``|LHS - RHS|`` of the leading-symbol equation for ``a0(p1, p2, x)``."""
    n = S.dim
    tc = triple_chart(S, p1, p2, p3, x)
    h_b1 = S.hessian_blocks(p1, p2, tc.xbar)
    h_b2 = S.hessian_blocks(tc.pbar, p3, x)
    h_t1 = S.hessian_blocks(p2, p3, tc.xtil)
    h_t2 = S.hessian_blocks(p1, tc.ptil, x)
    eye = np.eye(n)
    d_l = np.linalg.det(eye - h_b1[("x", "x")] @ h_b2[("p1", "p1")])
    d_r = np.linalg.det(eye - h_t1[("x", "x")] @ h_t2[("p2", "p2")])
    if d_l == 0 or d_r == 0:
        raise DomainError("determinant factor vanishes")
    lhs = a0(p1, p2, tc.xbar) * a0(tc.pbar, p3, x) * abs(d_l) ** -0.5
    rhs = a0(p2, p3, tc.xtil) * a0(p1, tc.ptil, x) * abs(d_r) ** -0.5
    return float(abs(lhs - rhs))


def convolve_bisections(S: GeneratingFunction, a0: Callable, p1, p2, f1: Callable, f2: Callable, x):
    """Convolution of two enhanced horizontal bisections at the base point ``x``.

    Returns ``(S(p1,p2,x), dS/dx, f1(dS/dp1) f2(dS/dp2) a0(p1,p2,x))``.
    """
    val, grad, _ = S.derivatives(p1, p2, x)
    g1, g2, gx = _split(S.dim, grad)
    return float(val), gx, f1(g1) * f2(g2) * a0(p1, p2, x)
