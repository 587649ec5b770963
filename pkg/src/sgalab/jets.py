"""Truncated multivariate power series.

Two layers live here.

``Poly`` is a sparse polynomial engine: exponent rows are stored as an
integer array, coefficients as a numpy array whose trailing axes form a
payload (scalar, vector, or an x-jet block).  Truncation is expressed as
caps on the total degree of groups of variables, so that a series in
``(p1, p2, x)`` can be cut at p-degree ``N`` while staying exact in ``x``.

``TruncatedSeries`` and ``XJetScalar`` are the small public types used by
the spray construction: a series in covector variables whose coefficients
carry a base-point value, x-gradient and x-Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse

__all__ = [
    "Poly",
    "XJetScalar",
    "TruncatedSeries",
    "definite_time_integral",
    "series_invert_map",
    "jet_payload_size",
]

_KEY_LIMIT = 2**62


def jet_payload_size(n: int) -> int:
    """Length of the flattened (value, gradient, Hessian) block for n base variables."""
    return 1 + n + n * n


def _jet_mul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Product rule on flattened jet blocks, vectorized over the leading axis."""
    va, vb = a[:, :1], b[:, :1]
    ga, gb = a[:, 1 : 1 + n], b[:, 1 : 1 + n]
    ha, hb = a[:, 1 + n :], b[:, 1 + n :]
    outer = (ga[:, :, None] * gb[:, None, :]).reshape(len(a), n * n)
    outer = outer + (gb[:, :, None] * ga[:, None, :]).reshape(len(a), n * n)
    return np.concatenate([va * vb, va * gb + vb * ga, va * hb + vb * ha + outer], axis=1)


def _normalize_caps(caps) -> tuple | None:
    if caps is None:
        return None
    return tuple((tuple(int(v) for v in group), int(cap)) for group, cap in caps)


class Poly:
    """Sparse truncated polynomial with array-valued coefficients.

    Parameters
    ----------
    nvars : int
        Number of variables.
    exps : array_like, shape (T, nvars)
        Exponent rows.  Duplicates are summed.
    coef : array_like, shape (T,) + payload
        Coefficients.
    caps : sequence of (variables, cap), optional
        Terms whose degree in ``variables`` exceeds ``cap`` are discarded.
    jet_n : int
        If positive the payload is a flattened x-jet block of that many base
        variables and products follow the product rule.
    """

    __slots__ = ("nvars", "exps", "coef", "caps", "jet_n", "_jet_op")

    def __init__(self, nvars, exps, coef, caps=None, jet_n=0, _clean=False):
        self.nvars = int(nvars)
        self.caps = _normalize_caps(caps)
        self.jet_n = int(jet_n)
        exps = np.asarray(exps, dtype=np.int64).reshape(-1, self.nvars)
        coef = np.asarray(coef, dtype=float)
        if coef.shape[0] != exps.shape[0]:
            raise ValueError("exponent rows and coefficients disagree in length")
        if not _clean:
            exps, coef = self._truncate_arrays(exps, coef)
            exps, coef = _reduce(exps, coef)
        self.exps = exps
        self.coef = coef
        self._jet_op = None

    # -- construction -------------------------------------------------
    @classmethod
    def zero(cls, nvars, shape=(), caps=None, jet_n=0) -> "Poly":
        return cls(nvars, np.zeros((0, nvars), np.int64), np.zeros((0,) + tuple(shape)), caps, jet_n, True)

    @classmethod
    def constant(cls, value, nvars, caps=None, jet_n=0) -> "Poly":
        value = np.asarray(value, dtype=float)
        return cls(nvars, np.zeros((1, nvars), np.int64), value[None], caps, jet_n)

    @classmethod
    def variable(cls, index, nvars, caps=None) -> "Poly":
        e = np.zeros((1, nvars), np.int64)
        e[0, index] = 1
        return cls(nvars, e, np.ones(1), caps)

    @classmethod
    def from_terms(cls, terms: dict, nvars, shape=(), caps=None, jet_n=0) -> "Poly":
        if not terms:
            return cls.zero(nvars, shape, caps, jet_n)
        keys = list(terms)
        exps = np.array(keys, dtype=np.int64).reshape(len(keys), nvars)
        coef = np.array([np.asarray(terms[k], dtype=float) for k in keys])
        return cls(nvars, exps, coef, caps, jet_n)

    def _like(self, exps, coef, clean=False, caps="same", jet_n=None) -> "Poly":
        return Poly(
            self.nvars,
            exps,
            coef,
            self.caps if caps == "same" else caps,
            self.jet_n if jet_n is None else jet_n,
            clean,
        )

    # -- basic properties ---------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.coef.shape[1:]

    @property
    def nterms(self) -> int:
        return self.exps.shape[0]

    def __repr__(self) -> str:
        return f"Poly(nvars={self.nvars}, terms={self.nterms}, payload={self.shape}, caps={self.caps})"

    def terms(self) -> dict:
        """Dictionary from exponent tuples to coefficient arrays."""
        return {tuple(int(e) for e in row): c for row, c in zip(self.exps, self.coef)}

    def coefficient(self, exps) -> np.ndarray:
        """Coefficient of one monomial (zero if absent)."""
        target = np.asarray(exps, dtype=np.int64)
        hit = np.flatnonzero(np.all(self.exps == target, axis=1))
        if hit.size == 0:
            return np.zeros(self.shape)
        return self.coef[hit[0]].copy()

    def degrees(self, variables) -> np.ndarray:
        """Per-term total degree in the listed variables."""
        return self.exps[:, list(variables)].sum(axis=1)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coef))) if self.nterms else 0.0

    def select(self, mask) -> "Poly":
        return self._like(self.exps[mask], self.coef[mask], clean=True)

    def part(self, variables, degree) -> "Poly":
        """Terms of exactly the given degree in ``variables``."""
        return self.select(self.degrees(variables) == degree)

    def upto(self, variables, degree) -> "Poly":
        return self.select(self.degrees(variables) <= degree)

    def with_caps(self, caps) -> "Poly":
        return Poly(self.nvars, self.exps, self.coef, caps, self.jet_n)

    def component(self, index) -> "Poly":
        """Scalar polynomial of one payload entry."""
        return Poly(self.nvars, self.exps, self.coef[(slice(None),) + tuple(np.atleast_1d(index))], self.caps)

    @staticmethod
    def stack(polys: Sequence["Poly"]) -> "Poly":
        """Stack scalar polynomials into one vector-valued polynomial."""
        nv = polys[0].nvars
        exps = np.concatenate([p.exps for p in polys])
        k = len(polys)
        coef = np.zeros((exps.shape[0], k))
        row = 0
        for i, p in enumerate(polys):
            coef[row : row + p.nterms, i] = p.coef
            row += p.nterms
        return Poly(nv, exps, coef, polys[0].caps)

    # -- truncation ---------------------------------------------------
    def _truncate_arrays(self, exps, coef):
        if self.caps is None or exps.shape[0] == 0:
            return exps, coef
        keep = np.ones(exps.shape[0], bool)
        for group, cap in self.caps:
            keep &= exps[:, list(group)].sum(axis=1) <= cap
        return exps[keep], coef[keep]

    def _cap_degrees(self, exps) -> np.ndarray:
        return np.stack([exps[:, list(g)].sum(axis=1) for g, _ in self.caps], axis=1)

    # -- arithmetic ---------------------------------------------------
    def _check(self, other: "Poly"):
        if other.nvars != self.nvars:
            raise ValueError("polynomials live in different variable sets")

    def as_jet(self, n: int) -> "Poly":
        """Scalar polynomial viewed as x-independent jet coefficients."""
        if self.jet_n == n:
            return self
        if self.jet_n or self.shape != ():
            raise ValueError("only scalar payloads can be promoted to jets")
        coef = np.zeros((self.nterms, jet_payload_size(n)))
        coef[:, 0] = self.coef
        return Poly(self.nvars, self.exps, coef, self.caps, n, True)

    def __add__(self, other):
        if not isinstance(other, Poly):
            if self.jet_n:
                other = Poly.constant(float(other), self.nvars, self.caps).as_jet(self.jet_n)
            else:
                other = Poly.constant(np.broadcast_to(other, self.shape), self.nvars, self.caps)
        self._check(other)
        return _sum_polys([self, other], self.nvars, self.caps if self.caps is not None else other.caps, max(self.jet_n, other.jet_n), keep_empty=True)

    __radd__ = __add__

    def __neg__(self):
        return self._like(self.exps, -self.coef, clean=True)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor) -> "Poly":
        """Multiply every coefficient by a scalar or broadcastable array."""
        return self._like(self.exps, self.coef * factor)

    def __mul__(self, other):
        return self.multiply(other)

    def multiply(self, other, merge: bool = True):
        """Product; with ``merge=False`` duplicate exponent rows are left for a later merge."""
        if not isinstance(other, Poly):
            return self.scale(other)
        if self.jet_n and other.jet_n:
            if self.jet_n != other.jet_n:
                raise ValueError("jet dimensions differ")
            n = self.jet_n
            return self.bilinear(other, lambda a, b: _jet_mul(a, b, n), jet_n=n, merge=merge)
        if self.shape == () and other.shape != ():
            return other.multiply(self, merge)
        if other.shape == ():
            extra = (1,) * len(self.shape)
            return self.bilinear(other, lambda a, b: a * b.reshape(b.shape + extra), merge=merge)
        return self.bilinear(other, lambda a, b: a * b, merge=merge)

    __rmul__ = __mul__

    def bilinear(self, other: "Poly", op: Callable, jet_n=None, merge: bool = True) -> "Poly":
        """Product of two polynomials with a custom bilinear payload operation.

        ``op(A, B)`` receives coefficient arrays of matched term pairs along
        the leading axis and returns the paired payloads.
        """
        self._check(other)
        caps = self.caps if self.caps is not None else other.caps
        jn = self.jet_n if jet_n is None else jet_n
        if self.nterms == 0 or other.nterms == 0:
            probe = op(np.zeros((1,) + self.shape), np.zeros((1,) + other.shape))
            return Poly.zero(self.nvars, probe.shape[1:], caps, jn)
        if caps is None:
            i, j = np.indices((self.nterms, other.nterms)).reshape(2, -1)
        else:
            i, j = _capped_pairs(caps, self.exps, other.exps)
        if i.size == 0:
            probe = op(np.zeros((1,) + self.shape), np.zeros((1,) + other.shape))
            return Poly.zero(self.nvars, probe.shape[1:], caps, jn)
        exps = self.exps[i] + other.exps[j]
        coef = op(self.coef[i], other.coef[j])
        out = Poly(self.nvars, exps, coef, caps, jn, _clean=True)
        if merge:
            out.exps, out.coef = _reduce(exps, coef)
        return out

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative power")
        out = Poly.constant(np.ones(()), self.nvars, self.caps)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    # -- calculus -----------------------------------------------------
    def deriv(self, var: int) -> "Poly":
        """Partial derivative in one variable."""
        mask = self.exps[:, var] > 0
        exps = self.exps[mask].copy()
        mult = exps[:, var].astype(float)
        exps[:, var] -= 1
        coef = self.coef[mask] * mult.reshape((-1,) + (1,) * len(self.shape))
        return self._like(exps, coef, clean=True)

    def gradient(self, variables) -> list["Poly"]:
        return [self.deriv(v) for v in variables]

    # -- substitution -------------------------------------------------
    def embed(self, mapping: Sequence[int], nvars: int, caps=None) -> "Poly":
        """Rename variable ``v`` to ``mapping[v]`` in a ring with ``nvars`` variables."""
        exps = np.zeros((self.nterms, nvars), np.int64)
        for v, w in enumerate(mapping):
            exps[:, w] += self.exps[:, v]
        return Poly(nvars, exps, self.coef, caps, self.jet_n)

    def compose(self, subs: Sequence, nvars: int | None = None, caps="inherit") -> "Poly":
        """Substitute polynomials for variables.

        ``subs[v]`` is either an integer (rename to that target variable) or
        a ``Poly`` in the target ring.  Terms are grouped by the exponent
        pattern of the substituted variables so the number of products stays
        proportional to the number of distinct patterns.
        """
        polys = [s for s in subs if isinstance(s, Poly)]
        if nvars is None:
            if not polys:
                raise ValueError("target ring size is needed when only renaming")
            nvars = polys[0].nvars
        if caps == "inherit":
            caps = polys[0].caps if polys else self.caps
        sub_vars = [v for v, s in enumerate(subs) if isinstance(s, Poly)]
        kept = [(v, int(s)) for v, s in enumerate(subs) if not isinstance(s, Poly)]
        kept_exps = np.zeros((self.nterms, nvars), np.int64)
        for v, w in kept:
            kept_exps[:, w] += self.exps[:, v]
        jet_n = max([self.jet_n] + [p.jet_n for p in polys])
        if not sub_vars:
            return Poly(nvars, kept_exps, self.coef, caps, jet_n)
        pattern = self.exps[:, sub_vars]
        uniq, inverse = np.unique(pattern, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        powers: dict[tuple[int, int], Poly] = {}

        def power(v, e):
            key = (v, e)
            if key not in powers:
                if e == 0:
                    powers[key] = Poly.constant(np.ones(()), nvars, caps)
                elif e == 1:
                    powers[key] = subs[v].with_caps(caps)
                else:
                    powers[key] = power(v, e - 1) * power(v, 1)
            return powers[key]

        prefix: dict[tuple, Poly] = {}

        def factor(pat):
            pat = tuple(int(e) for e in pat)
            if pat in prefix:
                return prefix[pat]
            last = max((k for k, e in enumerate(pat) if e), default=None)
            if last is None:
                val = Poly.constant(np.ones(()), nvars, caps)
            else:
                head = list(pat)
                head[last] = 0
                val = factor(head) * power(sub_vars[last], pat[last])
            prefix[pat] = val
            return val

        pieces = []
        for u, pat in enumerate(uniq):
            rows = inverse == u
            base = Poly(nvars, kept_exps[rows], self.coef[rows], caps, self.jet_n)
            pieces.append(factor(pat).multiply(base, merge=False))
        return _sum_polys(pieces, nvars, caps, jet_n)

    # -- evaluation ---------------------------------------------------
    def evaluate(self, point) -> np.ndarray:
        """Value at a numeric point."""
        point = np.asarray(point, dtype=float)
        if self.nterms == 0:
            return np.zeros(self.shape)
        mono = _monomials(self.exps, point)
        return np.tensordot(mono, self.coef, axes=(0, 0))

    def jet(self, point):
        """Value, gradient and Hessian at a numeric point.

        Returns arrays of shapes ``payload``, ``(nvars,) + payload`` and
        ``(nvars, nvars) + payload``.
        """
        point = np.asarray(point, dtype=float)
        V = self.nvars
        shape = self.shape
        if self.nterms == 0:
            return np.zeros(shape), np.zeros((V,) + shape), np.zeros((V, V) + shape)
        if self._jet_op is None:
            self._jet_op = _derivative_operator(self.exps, self.coef.reshape(self.nterms, -1))
        support, op = self._jet_op
        out = (op @ _monomials(support, point)).reshape(1 + V + V * V, -1)
        val, grad, hess = out[0], out[1 : 1 + V], out[1 + V :]
        return val.reshape(shape), grad.reshape((V,) + shape), hess.reshape((V, V) + shape)


def _sum_polys(pieces, nvars, caps, jet_n, keep_empty=False) -> Poly:
    if jet_n:
        pieces = [p.as_jet(jet_n) for p in pieces]
    if not keep_empty:
        pieces = [p for p in pieces if p.nterms]
    if not pieces:
        return Poly.zero(nvars, (jet_payload_size(jet_n),) if jet_n else (), caps, jet_n)
    shape = pieces[0].shape
    for p in pieces:
        if p.shape != shape:
            shape = np.broadcast_shapes(shape, p.shape)
    coefs = []
    for p in pieces:
        c = p.coef
        if c.shape[1:] != shape:
            c = np.broadcast_to(c.reshape(c.shape[:1] + (1,) * (len(shape) - c.ndim + 1) + c.shape[1:]), c.shape[:1] + shape)
        coefs.append(c)
    return Poly(nvars, np.concatenate([p.exps for p in pieces]), np.concatenate(coefs), caps, jet_n)


def _capped_pairs(caps, exps1: np.ndarray, exps2: np.ndarray):
    """Index pairs whose product respects every cap.

    Pairs are enumerated from the first cap by sorting degrees, so the cost
    follows the number of surviving pairs rather than the full product grid.
    """
    deg1 = np.stack([exps1[:, list(g)].sum(axis=1) for g, _ in caps], axis=1)
    deg2 = np.stack([exps2[:, list(g)].sum(axis=1) for g, _ in caps], axis=1)
    order = np.argsort(deg2[:, 0], kind="stable")
    counts = np.searchsorted(deg2[order, 0], caps[0][1] - deg1[:, 0], side="right")
    i = np.repeat(np.arange(exps1.shape[0]), counts)
    starts = np.cumsum(counts) - counts
    j = order[np.arange(i.size) - np.repeat(starts, counts)]
    if len(caps) > 1:
        lim = np.array([c for _, c in caps[1:]])
        keep = np.all(deg1[i, 1:] + deg2[j, 1:] <= lim, axis=1)
        i, j = i[keep], j[keep]
    return i, j


def _reduce(exps: np.ndarray, coef: np.ndarray):
    """Merge duplicate exponent rows and drop exact zeros."""
    if exps.shape[0] == 0:
        return exps, coef
    radix = exps.max(axis=0) + 1
    if np.prod(radix.astype(float)) < _KEY_LIMIT:
        mult = np.concatenate([[1], np.cumprod(radix[:-1])]).astype(np.int64)
        keys = exps @ mult
        order = np.argsort(keys, kind="stable")
        ks = keys[order]
        starts = np.flatnonzero(np.concatenate([[True], ks[1:] != ks[:-1]]))
        exps_u = exps[order[starts]]
        coef_u = np.add.reduceat(coef[order], starts, axis=0)
    else:
        exps_u, inverse = np.unique(exps, axis=0, return_inverse=True)
        coef_u = np.zeros((exps_u.shape[0],) + coef.shape[1:])
        np.add.at(coef_u, inverse.reshape(-1), coef)
    nz = np.any(coef_u.reshape(coef_u.shape[0], -1) != 0, axis=1) if coef_u.ndim > 1 else coef_u != 0
    return exps_u[nz], coef_u[nz]


def _monomials(E: np.ndarray, point: np.ndarray) -> np.ndarray:
    out = np.ones(E.shape[0])
    if E.size == 0:
        return out
    powers = point[None, :] ** np.arange(int(E.max()) + 1)[:, None]
    for v in range(E.shape[1]):
        col = E[:, v]
        if col.any():
            out *= powers[col, v]
    return out


def _derivative_operator(E: np.ndarray, C: np.ndarray):
    """Monomial support and sparse map from its values to value, gradient and Hessian.

    Output rows are ordered (value, d_j, d_j d_k) with the payload innermost.
    """
    T, V = E.shape
    eye = np.eye(V, dtype=np.int64)
    blocks = [(E, np.ones(T), np.zeros(T, np.int64))]
    for j in range(V):
        blocks.append((E - eye[j], E[:, j].astype(float), np.full(T, 1 + j)))
        for k in range(V):
            w = E[:, j] * (E[:, k] - (j == k))
            blocks.append((E - eye[j] - eye[k], w.astype(float), np.full(T, 1 + V + j * V + k)))
    exps = np.concatenate([b[0] for b in blocks])
    weight = np.concatenate([b[1] for b in blocks])
    slot = np.concatenate([b[2] for b in blocks])
    term = np.tile(np.arange(T), len(blocks))
    live = weight != 0
    exps, weight, slot, term = exps[live], weight[live], slot[live], term[live]
    support, column = np.unique(exps, axis=0, return_inverse=True)
    width = C.shape[1]
    rows = (slot[:, None] * width + np.arange(width)).ravel()
    cols = np.repeat(column.reshape(-1), width)
    vals = (weight[:, None] * C[term]).ravel()
    op = sparse.csr_matrix((vals, (rows, cols)), shape=((1 + V + V * V) * width, support.shape[0]))
    return support, op


# ---------------------------------------------------------------------------
# x-jets and covector series


@dataclass(frozen=True)
class XJetScalar:
    """Value of a function of x together with its gradient and Hessian at a base point."""

    value: float
    grad_x: np.ndarray
    hess_x: np.ndarray

    @property
    def n(self) -> int:
        return len(self.grad_x)

    @classmethod
    def constant(cls, value, n) -> "XJetScalar":
        return cls(float(value), np.zeros(n), np.zeros((n, n)))

    @classmethod
    def coordinate(cls, x, i) -> "XJetScalar":
        """The coordinate function x_i at the point x."""
        x = np.asarray(x, dtype=float)
        g = np.zeros(len(x))
        g[i] = 1.0
        return cls(float(x[i]), g, np.zeros((len(x), len(x))))

    @classmethod
    def from_vector(cls, vec, n) -> "XJetScalar":
        vec = np.asarray(vec, dtype=float)
        return cls(float(vec[0]), vec[1 : 1 + n].copy(), vec[1 + n :].reshape(n, n).copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.value], self.grad_x, self.hess_x.ravel()])

    def __add__(self, other):
        if not isinstance(other, XJetScalar):
            return XJetScalar(self.value + float(other), self.grad_x, self.hess_x)
        return XJetScalar(self.value + other.value, self.grad_x + other.grad_x, self.hess_x + other.hess_x)

    __radd__ = __add__

    def __neg__(self):
        return XJetScalar(-self.value, -self.grad_x, -self.hess_x)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, XJetScalar):
            c = float(other)
            return XJetScalar(self.value * c, self.grad_x * c, self.hess_x * c)
        out = _jet_mul(self.to_vector()[None], other.to_vector()[None], self.n)[0]
        return XJetScalar.from_vector(out, self.n)

    __rmul__ = __mul__


class TruncatedSeries:
    """Power series in ``num_vars`` covector variables, truncated at total degree ``order``.

    Coefficients are plain reals when ``n_x == 0`` and ``XJetScalar`` blocks
    over ``n_x`` base variables otherwise.
    """

    __slots__ = ("poly", "num_vars", "order", "n_x")

    def __init__(self, poly: Poly, order: int, n_x: int = 0):
        self.num_vars = poly.nvars
        self.order = int(order)
        self.n_x = int(n_x)
        caps = ((tuple(range(self.num_vars)), self.order),)
        self.poly = poly if poly.caps == caps else poly.with_caps(caps)

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, num_vars, order, n_x=0) -> "TruncatedSeries":
        shape = (jet_payload_size(n_x),) if n_x else ()
        return cls(Poly.zero(num_vars, shape, jet_n=n_x), order, n_x)

    @classmethod
    def constant(cls, value, num_vars, order, n_x=0) -> "TruncatedSeries":
        if isinstance(value, XJetScalar):
            return cls(Poly.constant(value.to_vector(), num_vars, jet_n=value.n), order, value.n)
        if n_x:
            return cls.constant(XJetScalar.constant(value, n_x), num_vars, order)
        return cls(Poly.constant(float(value), num_vars), order)

    @classmethod
    def variable(cls, index, num_vars, order) -> "TruncatedSeries":
        return cls(Poly.variable(index, num_vars), order)

    @classmethod
    def from_coefficients(cls, coeffs: dict, num_vars, order, n_x=0) -> "TruncatedSeries":
        """Build from a map multi-index -> real or XJetScalar."""
        for k in coeffs:
            if sum(k) > order:
                raise ValueError(f"multi-index {k} exceeds truncation order {order}")
        if n_x:
            terms = {k: (v.to_vector() if isinstance(v, XJetScalar) else XJetScalar.constant(v, n_x).to_vector()) for k, v in coeffs.items()}
            shape = (jet_payload_size(n_x),)
        else:
            terms = {k: float(v) for k, v in coeffs.items()}
            shape = ()
        return cls(Poly.from_terms(terms, num_vars, shape, jet_n=n_x), order, n_x)

    # -- access -------------------------------------------------------
    @property
    def coeffs(self) -> dict:
        """Map from multi-index to coefficient (real or XJetScalar)."""
        out = {}
        for k, c in self.poly.terms().items():
            out[k] = XJetScalar.from_vector(c, self.n_x) if self.n_x else float(c)
        return out

    def coefficient(self, index):
        c = self.poly.coefficient(index)
        return XJetScalar.from_vector(c, self.n_x) if self.n_x else float(c)

    def homogeneous(self, degree) -> "TruncatedSeries":
        return TruncatedSeries(self.poly.part(range(self.num_vars), degree), self.order, self.n_x)

    def max_abs(self) -> float:
        return self.poly.max_abs()

    def __repr__(self) -> str:
        return f"TruncatedSeries(num_vars={self.num_vars}, order={self.order}, n_x={self.n_x}, terms={self.poly.nterms})"

    # -- ring operations ----------------------------------------------
    def _wrap(self, poly, other=None) -> "TruncatedSeries":
        n_x = max(self.n_x, other.n_x if isinstance(other, TruncatedSeries) else 0)
        return TruncatedSeries(poly, self.order, n_x)

    def _check(self, other: "TruncatedSeries"):
        if other.num_vars != self.num_vars or other.order != self.order:
            raise ValueError("series differ in variables or truncation order")

    def _lift(self, other):
        if isinstance(other, TruncatedSeries):
            self._check(other)
            return other
        if isinstance(other, XJetScalar):
            return TruncatedSeries.constant(other, self.num_vars, self.order)
        return TruncatedSeries.constant(float(other), self.num_vars, self.order, self.n_x)

    def __add__(self, other):
        other = self._lift(other)
        return self._wrap(self.poly + other.poly, other)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self.poly, self.order, self.n_x)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return TruncatedSeries(self.poly.scale(float(other)), self.order, self.n_x)
        other = self._lift(other)
        return self._wrap(self.poly * other.poly, other)

    __rmul__ = __mul__

    def deriv(self, index) -> "TruncatedSeries":
        """Partial derivative in one covector variable (order drops by one)."""
        return TruncatedSeries(self.poly.deriv(index), self.order, self.n_x)

    def compose(self, inner: Sequence["TruncatedSeries"]) -> "TruncatedSeries":
        """Substitute series with zero constant term for every variable."""
        if len(inner) != self.num_vars:
            raise ValueError("need one inner series per variable")
        zero = np.zeros(inner[0].num_vars, np.int64)
        for s in inner:
            if np.any(np.all(s.poly.exps == zero, axis=1)) and np.any(s.poly.coefficient(zero) != 0):
                raise ValueError("inner series must have zero constant term")
        n_x = max([self.n_x] + [s.n_x for s in inner])
        out = self.poly.compose([s.poly for s in inner])
        return TruncatedSeries(out, inner[0].order, n_x)

    def evaluate(self, p):
        """Sum the series at a numeric covector (real or XJetScalar)."""
        v = self.poly.evaluate(p)
        return XJetScalar.from_vector(v, self.n_x) if self.n_x else float(v)


def series_invert_map(F: Sequence[TruncatedSeries]) -> list[TruncatedSeries]:
    """Compositional inverse of a map with zero constant term and invertible linear part.

    Uses the fixed point ``G <- G - A^{-1}(F(G) - id)``, each pass fixing one
    more order.
    """
    m = len(F)
    if any(f.num_vars != m for f in F):
        raise ValueError("map must be square")
    order = F[0].order
    A = np.zeros((m, m))
    for i, f in enumerate(F):
        for j in range(m):
            e = [0] * m
            e[j] = 1
            A[i, j] = f.poly.coefficient(e)
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise ValueError("linear part is singular")
    Ainv = np.linalg.inv(A)
    ident = [TruncatedSeries.variable(j, m, order) for j in range(m)]
    G = [sum((ident[j] * Ainv[i, j] for j in range(m)), TruncatedSeries.zeros(m, order)) for i in range(m)]
    for _ in range(order):
        FG = [f.compose(G) for f in F]
        err = [FG[i] - ident[i] for i in range(m)]
        G = [G[i] - sum((err[j] * Ainv[i, j] for j in range(m)), TruncatedSeries.zeros(m, order)) for i in range(m)]
    return G


def definite_time_integral(u_coefficients: Sequence):
    """Integrate ``sum_k u^k c_k`` over ``u`` in [0, 1] term by term.

    ``u_coefficients[k]`` is the coefficient of ``u^k``; any type supporting
    addition and multiplication by floats works (numbers, arrays, series).
    """
    total = None
    for k, c in enumerate(u_coefficients):
        term = c * (1.0 / (k + 1))
        total = term if total is None else total + term
    if total is None:
        raise ValueError("empty integrand")
    return total


def count_monomials(nvars: int, degree: int) -> int:
    """Number of monomials of total degree <= ``degree`` in ``nvars`` variables."""
    return comb(nvars + degree, degree)


def monomials(nvars: int, degree: int) -> np.ndarray:
    """Exponent rows of all monomials of exact total degree ``degree``."""
    if nvars == 0:
        return np.zeros((1 if degree == 0 else 0, 0), np.int64)
    rows = []

    def rec(prefix, left, slots):
        if slots == 1:
            rows.append(prefix + [left])
            return
        for e in range(left, -1, -1):
            rec(prefix + [e], left - e, slots - 1)

    rec([], degree, nvars)
    return np.array(rows, dtype=np.int64)


def iter_unique_rows(a: np.ndarray) -> Iterable[tuple]:
    for row in np.unique(a, axis=0):
        yield tuple(int(v) for v in row)
