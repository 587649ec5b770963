"""Alpha-densities on finite-dimensional vector spaces.

An alpha-density is a function on ordered bases with
``d(beta @ A) = |det A|**alpha * d(beta)``; it is stored by its value on one
reference basis.  Reference bases may span a proper subspace of the ambient
coordinate space, which is how densities on tangent subspaces (graphs,
kernels, fibers) are represented throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import null_space

__all__ = [
    "AlphaDensity",
    "LinearCanonicalRelation",
    "ShortExactPresentation",
    "GraphTangentData",
    "DensityError",
    "eval_density",
    "liouville_half_density",
    "liouville_value",
    "quotient_density",
    "subspace_density",
    "product_density",
    "compose_enhanced_linear",
    "compose_graph_enhancements",
    "graph_relation",
    "standard_symplectic",
]

TRANSVERSALITY_TOL = 1e-8
SPAN_TOL = 1e-9


class DensityError(ValueError):
    """Raised for degenerate bases, vanishing divisors and non-transverse data."""


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return m.reshape(m.shape[0], -1) if m.ndim == 2 else np.atleast_2d(m)


@dataclass(frozen=True)
class AlphaDensity:
    """Density of order ``order`` with value ``ref_value`` on the columns of ``ref_basis``."""

    order: Fraction
    ref_basis: np.ndarray
    ref_value: complex

    def __post_init__(self):
        object.__setattr__(self, "order", Fraction(self.order).limit_denominator(1000))
        object.__setattr__(self, "ref_basis", _as_matrix(self.ref_basis))
        object.__setattr__(self, "ref_value", complex(self.ref_value))

    @property
    def dim(self) -> int:
        return self.ref_basis.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.ref_basis.shape[0]

    @classmethod
    def standard(cls, dim: int, value=1.0, order=Fraction(1, 2)) -> "AlphaDensity":
        return cls(order, np.eye(dim), value)

    def __call__(self, basis) -> complex:
        return eval_density(self, basis)

    def scaled(self, factor) -> "AlphaDensity":
        return AlphaDensity(self.order, self.ref_basis, self.ref_value * complex(factor))

    def rebased(self, basis) -> "AlphaDensity":
        """Same density, stored against a different basis of the same space."""
        return AlphaDensity(self.order, basis, eval_density(self, basis))


def _coordinates(ref_basis: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Coordinates of ``basis`` columns in the span of ``ref_basis``."""
    coords, *_ = np.linalg.lstsq(ref_basis, basis, rcond=None)
    scale = max(np.linalg.norm(basis), 1.0)
    if np.linalg.norm(ref_basis @ coords - basis) > SPAN_TOL * scale:
        raise DensityError("basis does not lie in the carrier subspace of the density")
    return coords


def eval_density(d: AlphaDensity, basis) -> complex:
    """Value of ``d`` on a basis of its carrier space.

    Raises
    ------
    DensityError
        If the basis is singular ("degenerate basis") or leaves the carrier.
    """
    basis = _as_matrix(basis)
    if basis.shape != d.ref_basis.shape:
        raise DensityError(f"basis shape {basis.shape} does not match carrier shape {d.ref_basis.shape}")
    if d.dim == 0:
        return d.ref_value
    coords = _coordinates(d.ref_basis, basis)
    det = np.linalg.det(coords)
    sv = np.linalg.svd(coords, compute_uv=False)
    if sv[-1] <= 1e-14 * max(sv[0], 1.0):
        raise DensityError("degenerate basis")
    return d.ref_value * abs(det) ** float(d.order)


def liouville_value(omega, basis) -> float:
    """``|det(omega(b_i, b_j))|**(1/4)`` for a basis of a symplectic space."""
    omega = np.asarray(omega, dtype=float)
    basis = _as_matrix(basis)
    gram = basis.T @ omega @ basis
    return abs(np.linalg.det(gram)) ** 0.25


def liouville_half_density(omega) -> AlphaDensity:
    """Liouville half-density of a symplectic form given as a skew matrix.

    On a standard symplectic basis the value is one.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1] or omega.shape[0] % 2:
        raise DensityError("symplectic form must be an even square matrix")
    if np.max(np.abs(omega + omega.T)) > 1e-12 * max(1.0, np.max(np.abs(omega))):
        raise DensityError("form is not skew")
    sv = np.linalg.svd(omega, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise DensityError("degenerate symplectic form")
    dim = omega.shape[0]
    return AlphaDensity(Fraction(1, 2), np.eye(dim), liouville_value(omega, np.eye(dim)))


def standard_symplectic(n: int) -> np.ndarray:
    """Canonical form on coordinates (x, p) of T*R^n: ``omega((dx,dp),(dx',dp')) = dp.dx' - dx.dp'``."""
    z = np.zeros((n, n))
    return np.block([[z, -np.eye(n)], [np.eye(n), z]])


def product_density(d1: AlphaDensity, d2: AlphaDensity) -> AlphaDensity:
    """Density on the direct sum of two ambient spaces."""
    if d1.order != d2.order:
        raise DensityError("orders differ")
    b1, b2 = d1.ref_basis, d2.ref_basis
    basis = np.block([[b1, np.zeros((b1.shape[0], b2.shape[1]))], [np.zeros((b2.shape[0], b1.shape[1])), b2]])
    return AlphaDensity(d1.order, basis, d1.ref_value * d2.ref_value)


@dataclass(frozen=True)
class ShortExactPresentation:
    """``0 -> V1 -> V -> V2 -> 0`` in coordinates.

    ``basis_V1`` spans the image of V1, ``complement`` holds lifts of a basis
    of V2 and ``projection`` realizes ``V -> V2``.
    """

    ambient_dim: int
    basis_V1: np.ndarray
    complement: np.ndarray
    projection: np.ndarray

    def __post_init__(self):
        b1 = _as_matrix(self.basis_V1) if np.size(self.basis_V1) else np.zeros((self.ambient_dim, 0))
        c = _as_matrix(self.complement) if np.size(self.complement) else np.zeros((self.ambient_dim, 0))
        object.__setattr__(self, "basis_V1", b1)
        object.__setattr__(self, "complement", c)
        proj = np.asarray(self.projection, dtype=float).reshape(-1, self.ambient_dim)
        object.__setattr__(self, "projection", proj)
        full = np.hstack([b1, c])
        if full.shape[1] != self.ambient_dim or np.linalg.matrix_rank(full) < self.ambient_dim:
            raise DensityError("V1 basis and complement do not form a basis of V")
        if b1.shape[1] and np.max(np.abs(proj @ b1)) > 1e-9 * max(1.0, np.max(np.abs(proj))):
            raise DensityError("projection does not vanish on V1")

    @classmethod
    def from_kernel(cls, projection, complement=None) -> "ShortExactPresentation":
        """Presentation with V1 = ker(projection) and, by default, orthogonal complement."""
        projection = _as_matrix(projection)
        ker = null_space(projection, rcond=1e-12)
        if complement is None:
            complement = null_space(ker.T) if ker.shape[1] else np.eye(projection.shape[1])
        return cls(projection.shape[1], ker, complement, projection)

    def lift(self, basis_v2) -> np.ndarray:
        """Lift a basis of V2 through the complement."""
        pc = self.projection @ self.complement
        return self.complement @ np.linalg.solve(pc, basis_v2)


def quotient_density(sigma: AlphaDensity, sigma1: AlphaDensity, pres: ShortExactPresentation) -> AlphaDensity:
    """``sigma / sigma1`` as a density on V2 (coordinates of ``pres.projection``).

    The value on a basis ``g`` of V2 is ``sigma(b1 | lift(g)) / sigma1(b1)``;
    block-triangularity makes it independent of the chosen complement.
    """
    if sigma.order != sigma1.order:
        raise DensityError("orders differ")
    b1 = pres.basis_V1
    s1 = eval_density(sigma1, b1) if b1.shape[1] else sigma1.ref_value
    if abs(s1) == 0:
        raise DensityError("division by vanishing density")
    d2 = pres.projection.shape[0]
    ident = np.eye(d2)
    value = eval_density(sigma, np.hstack([b1, pres.lift(ident)])) / s1
    return AlphaDensity(sigma.order, ident, value)


def subspace_density(sigma: AlphaDensity, sigma2: AlphaDensity, pres: ShortExactPresentation) -> AlphaDensity:
    """``sigma / sigma2`` as a density on the subspace V1 (ambient coordinates)."""
    if sigma.order != sigma2.order:
        raise DensityError("orders differ")
    c = pres.complement
    image = pres.projection @ c
    s2 = eval_density(sigma2, image) if image.shape[1] else sigma2.ref_value
    if abs(s2) == 0:
        raise DensityError("division by vanishing density")
    b1 = pres.basis_V1
    value = eval_density(sigma, np.hstack([b1, c])) / s2
    return AlphaDensity(sigma.order, b1, value)


@dataclass(frozen=True)
class LinearCanonicalRelation:
    """Lagrangian subspace ``L`` of ``V1-bar x V2`` spanned by the columns of ``basis_L``."""

    omega1: np.ndarray
    omega2: np.ndarray
    basis_L: np.ndarray
    _checked: bool = field(default=True, repr=False)

    def __post_init__(self):
        o1 = np.asarray(self.omega1, dtype=float)
        o2 = np.asarray(self.omega2, dtype=float)
        object.__setattr__(self, "omega1", o1)
        object.__setattr__(self, "omega2", o2)
        b = _as_matrix(self.basis_L)
        object.__setattr__(self, "basis_L", b)
        d1, d2 = o1.shape[0], o2.shape[0]
        if b.shape[0] != d1 + d2:
            raise DensityError("relation basis has the wrong ambient size")
        if self._checked:
            if b.shape[1] != (d1 + d2) // 2 or np.linalg.matrix_rank(b, tol=1e-10 * max(1, np.abs(b).max())) < b.shape[1]:
                raise DensityError("relation basis is not a basis of a half-dimensional subspace")
            if self.isotropy_defect() > 1e-8 * max(1.0, np.abs(b).max() ** 2):
                raise DensityError("relation is not Lagrangian")

    @property
    def dims(self) -> tuple[int, int]:
        return self.omega1.shape[0], self.omega2.shape[0]

    @property
    def product_form(self) -> np.ndarray:
        d1, d2 = self.dims
        out = np.zeros((d1 + d2, d1 + d2))
        out[:d1, :d1] = -self.omega1
        out[d1:, d1:] = self.omega2
        return out

    def isotropy_defect(self) -> float:
        return float(np.max(np.abs(self.basis_L.T @ self.product_form @ self.basis_L), initial=0.0))


def graph_relation(omega1, omega2, T) -> LinearCanonicalRelation:
    """Graph ``{(v, T v)}`` of a linear map as a relation ``V1 -> V2``."""
    T = np.asarray(T, dtype=float)
    basis = np.vstack([np.eye(T.shape[1]), T])
    return LinearCanonicalRelation(omega1, omega2, basis)


def _orthonormal_complement(kernel: np.ndarray, dim: int) -> np.ndarray:
    if kernel.shape[1] == 0:
        return np.eye(dim)
    return null_space(kernel.T)


def _check_transverse(matrix: np.ndarray, what: str):
    if matrix.size == 0:
        return
    sv = np.linalg.svd(matrix, compute_uv=False)
    if sv[-1] <= TRANSVERSALITY_TOL * sv[0]:
        raise DensityError(f"non-transverse composition (clean case unsupported): {what}")


def compose_enhanced_linear(rel1: LinearCanonicalRelation, s1: AlphaDensity, rel2: LinearCanonicalRelation, s2: AlphaDensity):
    """Compose two enhanced linear canonical relations ``V1 -> V2 -> V3``.

    Builds the fiber product ``L2 * L1`` as the kernel of
    ``tau(l1, l2) = pr2(l1) - pr2(l2)``, maps it to ``V1 x V3`` and evaluates
    ``(s1 x s2)(beta* | beta2) / lambda_V2(tau beta2)`` with ``beta2`` the
    orthogonal complement of the kernel.

    Returns
    -------
    (LinearCanonicalRelation, AlphaDensity)
    """
    d1, d2 = rel1.dims
    e2, d3 = rel2.dims
    if d2 != e2 or np.max(np.abs(rel1.omega2 - rel2.omega1)) > 1e-12:
        raise DensityError("middle spaces do not match")
    B1, B2 = rel1.basis_L, rel2.basis_L
    k1, k2 = B1.shape[1], B2.shape[1]
    tau = np.hstack([B1[d1:], -B2[:d2]])
    if tau.shape[0] > tau.shape[1]:
        raise DensityError("non-transverse composition (clean case unsupported): dimension count")
    _check_transverse(tau, "fiber product map is not onto the middle space")
    kernel = null_space(tau, rcond=1e-12)
    alpha = np.vstack([np.hstack([B1[:d1], np.zeros((d1, k2))]), np.hstack([np.zeros((d3, k1)), B2[d2:]])])
    image = alpha @ kernel
    _check_transverse(image, "Ker(alpha) is nonzero")
    beta2 = _orthonormal_complement(kernel, k1 + k2)
    change = np.hstack([kernel, beta2])
    v1 = eval_density(s1, B1)
    v2 = eval_density(s2, B2)
    half = float(s1.order)
    num = v1 * v2 * abs(np.linalg.det(change)) ** half
    den = liouville_value(rel1.omega2, tau @ beta2) ** (2 * half)
    if den == 0:
        raise DensityError("division by vanishing density")
    rel = LinearCanonicalRelation(rel1.omega1, rel2.omega2, image)
    return rel, AlphaDensity(s1.order, image, num / den)


@dataclass(frozen=True)
class GraphTangentData:
    """Tangent data of a map ``f: D -> S2`` defined on a submanifold ``D`` of ``S1``.

    ``tangent_D`` spans ``T_x D`` in coordinates of ``S1``; ``differential``
    is the Jacobian of ``f`` in ambient coordinates (only its action on
    ``T_x D`` matters); ``omega_target`` is the symplectic form of ``S2``,
    the space receiving ``f``.
    """

    tangent_D: np.ndarray
    differential: np.ndarray
    omega_target: np.ndarray


def compose_graph_enhancements(f1: GraphTangentData, s1: AlphaDensity, f2: GraphTangentData, s2: AlphaDensity, point=None, complement=None) -> AlphaDensity:
    """Density of ``(gr f2, s2) o (gr f1, s1)`` on ``T_x D0`` with ``D0 = f1^{-1}(D2)``.

    Evaluates ``s2([T D2]) s1([T D0] | [C]) / lambda_S2([T D2] | Df1 [C])``
    where ``C`` complements ``T D0`` inside ``T D1``.  The default complement
    is orthogonal; any other may be passed in ``complement`` (columns in
    ``S1`` coordinates), and the result does not depend on it.

    ``point`` is accepted for bookkeeping only; all data are tangent data at it.
    """
    del point
    T1 = _as_matrix(f1.tangent_D)
    T2 = _as_matrix(f2.tangent_D)
    Df = _as_matrix(f1.differential)
    image = Df @ T1
    dim_s2 = Df.shape[0]
    if T2.shape[1]:
        q, _ = np.linalg.qr(T2)
        perp = np.eye(dim_s2) - q @ q.T
    else:
        perp = np.eye(dim_s2)
    coeffs = null_space(perp @ image, rcond=1e-12)
    tangent_D0 = T1 @ coeffs
    if complement is None:
        cplx = T1 @ _orthonormal_complement(coeffs, T1.shape[1])
    else:
        cplx = _as_matrix(complement)
    stacked = np.hstack([T2, Df @ cplx])
    if stacked.shape[1] != dim_s2:
        raise DensityError("D f1 is not transverse to D2 (dimension count)")
    _check_transverse(stacked, "D f1 is not transverse to D2")
    half = float(s1.order)
    num = eval_density(s2, T2) * eval_density(s1, np.hstack([tangent_D0, cplx]))
    den = liouville_value(f1.omega_target, stacked) ** (2 * half)
    return AlphaDensity(s1.order, tangent_D0, num / den)
