"""Coordinate Poisson structures with polynomial coefficients and Lie algebra data."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .jets import Poly, XJetScalar

__all__ = [
    "PoissonStructure",
    "LieAlgebraData",
    "BivectorJet",
    "eval_bivector",
    "jacobi_residual",
    "lie_to_poisson",
    "lie_jacobi_residual",
    "builtin_structure",
    "builtin_lie",
    "BUILTIN_STRUCTURES",
    "BUILTIN_LIE",
    "LINEAR_NAMES",
    "load_structure_config",
    "ConfigError",
]


class ConfigError(ValueError):
    """Malformed structure configuration."""


@dataclass(frozen=True)
class PoissonStructure:
    """Bivector ``pi^{ij}(x)`` on R^n with polynomial entries.

    ``coeffs`` maps ``(i, j)`` with ``i < j`` to a list of
    ``(exponents, coefficient)`` pairs; ``pi^{ji} = -pi^{ij}``.
    """

    dim: int
    coeffs: dict
    name: str = "custom"
    lie: "LieAlgebraData | None" = field(default=None, compare=False)

    def __post_init__(self):
        clean = {}
        for (i, j), terms in self.coeffs.items():
            if not (0 <= i < self.dim and 0 <= j < self.dim) or i == j:
                raise ConfigError(f"invalid index pair ({i}, {j})")
            sign = 1.0
            if i > j:
                i, j, sign = j, i, -1.0
            lst = clean.setdefault((i, j), [])
            for exps, c in terms:
                exps = tuple(int(e) for e in exps)
                if len(exps) != self.dim or min(exps, default=0) < 0:
                    raise ConfigError(f"exponent {exps} does not match dimension {self.dim}")
                lst.append((exps, sign * float(c)))
        object.__setattr__(self, "coeffs", clean)

    @property
    def degree(self) -> int:
        """Largest polynomial degree among the entries (-1 for the zero structure)."""
        degs = [sum(e) for terms in self.coeffs.values() for e, c in terms if c != 0]
        return max(degs, default=-1)

    @property
    def is_zero(self) -> bool:
        return self.degree < 0

    def matrix(self, x) -> np.ndarray:
        """Numeric skew matrix ``pi(x)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.dim, self.dim))
        for (i, j), terms in self.coeffs.items():
            v = sum(c * np.prod(x ** np.array(e)) for e, c in terms)
            out[i, j] += v
            out[j, i] -= v
        return out

    def entry_polys(self) -> Poly:
        """All entries as one matrix-valued polynomial in x (payload shape (n, n))."""
        n = self.dim
        terms: dict = {}
        for (i, j), lst in self.coeffs.items():
            for e, c in lst:
                block = terms.setdefault(e, np.zeros((n, n)))
                block[i, j] += c
                block[j, i] -= c
        if not terms:
            return Poly.zero(n, (n, n))
        return Poly.from_terms(terms, n, (n, n))

    def apply_series(self, phi: Sequence, p: Sequence):
        """``sum_j pi^{ij}(phi) p_j`` for series-like ``phi`` and ``p`` supporting + and *.

        Monomials of ``phi`` are cached, so each distinct power product is
        formed once.
        """
        n = self.dim
        cache: dict = {}

        def mono(e):
            if e in cache:
                return cache[e]
            last = max((k for k, v in enumerate(e) if v), default=None)
            if last is None:
                val = None
            else:
                head = list(e)
                head[last] -= 1
                prev = mono(tuple(head))
                val = phi[last] if prev is None else prev * phi[last]
            cache[e] = val
            return val

        out = [None] * n
        for (i, j), lst in self.coeffs.items():
            entry = None
            for e, c in lst:
                m = mono(e)
                term = c if m is None else m * c
                entry = term if entry is None else entry + term
            if entry is None:
                continue
            for row, col, sgn in ((i, j, 1.0), (j, i, -1.0)):
                contrib = (entry * p[col]) * sgn if not isinstance(entry, float) else p[col] * (entry * sgn)
                out[row] = contrib if out[row] is None else out[row] + contrib
        return out

    def to_config(self) -> dict:
        return {
            "dim": self.dim,
            "pi": [
                {"i": i, "j": j, "terms": [{"exps": list(e), "c": c} for e, c in lst]}
                for (i, j), lst in sorted(self.coeffs.items())
            ],
        }


@dataclass(frozen=True)
class BivectorJet:
    """Bivector entries at a point with their x-gradients and x-Hessians."""

    value: np.ndarray
    grad: np.ndarray  # (n, n, n): d pi^{ij} / dx^l at [i, j, l]
    hess: np.ndarray  # (n, n, n, n)

    def entry(self, i: int, j: int) -> XJetScalar:
        return XJetScalar(float(self.value[i, j]), self.grad[i, j].copy(), self.hess[i, j].copy())


def eval_bivector(pi: PoissonStructure, x) -> BivectorJet:
    """Skew matrix ``pi(x)`` with exact polynomial derivatives."""
    val, grad, hess = pi.entry_polys().jet(np.asarray(x, dtype=float))
    return BivectorJet(val, np.moveaxis(grad, 0, -1), np.moveaxis(hess, (0, 1), (-2, -1)))


def jacobi_residual(pi: PoissonStructure, x) -> float:
    """Max abs component of ``sum_cyc pi^{il} d_l pi^{jk}``."""
    jet = eval_bivector(pi, x)
    P, D = jet.value, jet.grad
    t = np.einsum("il,jkl->ijk", P, D)
    cyc = t + np.transpose(t, (1, 2, 0)) + np.transpose(t, (2, 0, 1))
    return float(np.max(np.abs(cyc), initial=0.0))


@dataclass(frozen=True)
class LieAlgebraData:
    """Structure constants ``[e_i, e_j] = c[i, j, k] e_k`` and an optional matrix representation."""

    name: str
    dim: int
    c: np.ndarray
    rep: tuple | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.dim,) * 3:
            raise ConfigError("structure constants must have shape (n, n, n)")
        if np.max(np.abs(c + c.transpose(1, 0, 2)), initial=0.0) > 1e-12:
            raise ConfigError("structure constants are not antisymmetric")
        object.__setattr__(self, "c", c)
        if self.rep is not None:
            object.__setattr__(self, "rep", tuple(np.asarray(m, dtype=float) for m in self.rep))

    def bracket(self, u, v) -> np.ndarray:
        """Bracket of coordinate vectors; leading axes broadcast."""
        return np.einsum("...i,...j,ijk->...k", u, v, self.c)

    def ad(self, a) -> np.ndarray:
        """Matrix of ``ad_a`` acting on coordinate vectors: ``(ad_a)[k, j] = a_i c[i, j, k]``."""
        return np.einsum("i,ijk->kj", np.asarray(a, dtype=float), self.c)

    def to_matrix(self, a) -> np.ndarray:
        if self.rep is None:
            raise ValueError(f"{self.name} has no matrix representation")
        return sum(ai * m for ai, m in zip(a, self.rep))

    def from_matrix(self, m) -> np.ndarray:
        basis = np.stack([r.ravel() for r in self.rep], axis=1)
        coeffs, *_ = np.linalg.lstsq(basis, np.real(m).ravel(), rcond=None)
        return coeffs


def lie_jacobi_residual(lie: LieAlgebraData) -> float:
    """Max abs component of the Jacobi identity on structure constants."""
    c = lie.c
    t = np.einsum("ijl,lkm->ijkm", c, c)
    cyc = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
    return float(np.max(np.abs(cyc), initial=0.0))


def lie_to_poisson(lie: LieAlgebraData, sign: float = -1.0) -> PoissonStructure:
    """Linear Poisson structure ``pi^{ij}(x) = sign * c^{ij}_k x^k`` on the dual.

    The default ``sign = -1`` is the standard convention for the
    Kirillov-Kostant-Souriau bracket used throughout the package.
    """
    n = lie.dim
    coeffs = {}
    for i in range(n):
        for j in range(i + 1, n):
            terms = []
            for k in range(n):
                if lie.c[i, j, k] != 0:
                    e = [0] * n
                    e[k] = 1
                    terms.append((tuple(e), sign * lie.c[i, j, k]))
            if terms:
                coeffs[(i, j)] = terms
    return PoissonStructure(n, coeffs, name=lie.name, lie=lie)


# ---------------------------------------------------------------------------
# builtins


def _so3() -> LieAlgebraData:
    c = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[i, j, k], c[j, i, k] = 1.0, -1.0
    rep = []
    for k in range(3):
        m = np.zeros((3, 3))
        i, j = (k + 1) % 3, (k + 2) % 3
        m[j, i], m[i, j] = 1.0, -1.0
        rep.append(m)
    return LieAlgebraData("so3", 3, c, tuple(rep))


def _sl2() -> LieAlgebraData:
    # basis h, e, f with [h,e]=2e, [h,f]=-2f, [e,f]=h
    c = np.zeros((3, 3, 3))
    for (i, j, k, v) in ((0, 1, 1, 2.0), (0, 2, 2, -2.0), (1, 2, 0, 1.0)):
        c[i, j, k], c[j, i, k] = v, -v
    rep = (np.array([[1.0, 0], [0, -1]]), np.array([[0, 1.0], [0, 0]]), np.array([[0, 0], [1.0, 0]]))
    return LieAlgebraData("sl2", 3, c, rep)


def _h3() -> LieAlgebraData:
    c = np.zeros((3, 3, 3))
    c[0, 1, 2], c[1, 0, 2] = 1.0, -1.0
    rep = []
    for (r, s) in ((0, 1), (1, 2), (0, 2)):
        m = np.zeros((3, 3))
        m[r, s] = 1.0
        rep.append(m)
    return LieAlgebraData("h3", 3, c, tuple(rep))


def _aff1() -> LieAlgebraData:
    c = np.zeros((2, 2, 2))
    c[0, 1, 1], c[1, 0, 1] = 1.0, -1.0
    rep = (np.array([[1.0, 0], [0, 0]]), np.array([[0, 1.0], [0, 0]]))
    return LieAlgebraData("aff1", 2, c, rep)


def _abelian2() -> LieAlgebraData:
    rep = (np.array([[1.0, 0], [0, 0]]), np.array([[0, 0], [0, 1.0]]))
    return LieAlgebraData("abelian2", 2, np.zeros((2, 2, 2)), rep)


BUILTIN_LIE = {"so3": _so3, "sl2": _sl2, "h3": _h3, "aff1": _aff1, "abelian2": _abelian2}
LINEAR_NAMES = ("so3", "sl2", "h3", "aff1")


def builtin_lie(name: str) -> LieAlgebraData:
    try:
        return BUILTIN_LIE[name]()
    except KeyError:
        raise ConfigError(f"unknown Lie algebra {name!r}; choose from {sorted(BUILTIN_LIE)}") from None


def _constant_matrix(m: np.ndarray, name: str) -> PoissonStructure:
    n = m.shape[0]
    coeffs = {(i, j): [((0,) * n, m[i, j])] for i in range(n) for j in range(i + 1, n) if m[i, j] != 0}
    return PoissonStructure(n, coeffs, name=name)


def _quadratic() -> PoissonStructure:
    # {x1,x2} = x1 x2, {x2,x3} = x2 x3, {x3,x1} = x3 x1: the cross product
    # with the gradient of the Casimir x1 x2 x3, hence Poisson.
    coeffs = {(0, 1): [((1, 1, 0), 1.0)], (1, 2): [((0, 1, 1), 1.0)], (0, 2): [((1, 0, 1), -1.0)]}
    return PoissonStructure(3, coeffs, name="quadratic")


BUILTIN_STRUCTURES = {
    "zero": lambda: PoissonStructure(3, {}, name="zero"),
    "constant": lambda: _constant_matrix(np.array([[0, 1.0, 0.5], [-1.0, 0, -0.25], [-0.5, 0.25, 0]]), "constant"),
    "symplectic2": lambda: _constant_matrix(np.array([[0, 1.0], [-1.0, 0]]), "symplectic2"),
    "quadratic": _quadratic,
}


def builtin_structure(name: str, sign: float = -1.0) -> PoissonStructure:
    """Shipped structure by name; Lie algebra names give their linear structures."""
    if name in BUILTIN_STRUCTURES:
        return BUILTIN_STRUCTURES[name]()
    if name in BUILTIN_LIE:
        return lie_to_poisson(builtin_lie(name), sign)
    raise ConfigError(f"unknown structure {name!r}; choose from {sorted(BUILTIN_STRUCTURES) + sorted(BUILTIN_LIE)}")


def _parse_pi(cfg: dict) -> PoissonStructure:
    try:
        dim = int(cfg["dim"])
        coeffs: dict = {}
        for entry in cfg.get("pi", []):
            key = (int(entry["i"]), int(entry["j"]))
            coeffs.setdefault(key, []).extend((tuple(t["exps"]), float(t["c"])) for t in entry["terms"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed Poisson config: {exc}") from None
    return PoissonStructure(dim, coeffs, name=str(cfg.get("name", "custom")))


def _parse_lie(cfg: dict) -> LieAlgebraData:
    try:
        dim = int(cfg["dim"])
        c = np.zeros((dim, dim, dim))
        for i, j, k, v in cfg["c"]:
            c[int(i), int(j), int(k)] = float(v)
            c[int(j), int(i), int(k)] = -float(v)
        rep = cfg.get("rep")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed Lie config: {exc}") from None
    return LieAlgebraData(str(cfg.get("name", "custom")), dim, c, tuple(rep) if rep else None)


def load_structure_config(source: str | dict, sign: float = -1.0):
    """Parse a structure from a dict, JSON text, or ``file:`` path.

    Returns a ``PoissonStructure``; for ``{"lie": ...}`` configs the result
    carries its ``LieAlgebraData`` in the ``lie`` attribute.
    """
    if isinstance(source, str):
        text = source
        if source.startswith("file:"):
            path = Path(source[5:])
            try:
                text = path.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read {path}: {exc}") from None
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    else:
        cfg = source
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if "lie" in cfg:
        return lie_to_poisson(_parse_lie(cfg["lie"]), sign)
    if "dim" in cfg:
        return _parse_pi(cfg)
    raise ConfigError("config needs either a 'lie' or a 'dim'/'pi' section")
