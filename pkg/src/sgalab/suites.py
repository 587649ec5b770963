"""Named verification checks shared by the command line and the suite runner.

Every check returns a ``Report`` whose records are plain dictionaries, so
identical seeds give identical output.
"""

from __future__ import annotations

import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from . import cocycles as cc
from .densities import (
    AlphaDensity,
    ShortExactPresentation,
    compose_enhanced_linear,
    graph_relation,
    liouville_value,
    quotient_density,
    standard_symplectic,
)
from .jets import Poly, monomials
from .liecase import (
    F_CHOICES,
    ActionGroupoidElement,
    AD_NORM_GUARD,
    LieDomainError,
    ad_function,
    ad_norm,
    bch,
    coadjoint,
    duflo_identity_residual,
    plane_wave_star,
    split_associativity_residual,
)
from .poisson import (
    BUILTIN_LIE,
    BUILTIN_STRUCTURES,
    LINEAR_NAMES,
    ConfigError,
    LieAlgebraData,
    PoissonStructure,
    builtin_lie,
    builtin_structure,
    load_structure_config,
)
from .spray_groupoid import (
    Spray,
    a0_residual,
    build_generating_function,
    realization_residual,
    sga_residual,
)

__all__ = ["Report", "SUITES", "run_suite", "sampler", "DEFAULT_TOL"]

DEFAULT_TOL = {
    "density-scaling": 1e-9,
    "liouville-normalization": 1e-9,
    "quotient-complement": 1e-9,
    "composition-associativity": 1e-9,
    "realization": 1e-6,
    "sga": 1e-8,
    "series-constant": 1e-10,
    "gamma-cocycle": 1e-6,
    "leading-symbol": 1e-6,
    "identity-axiom": 1e-9,
    "unit-propagation": 1e-8,
    "split-associativity": 1e-7,
    "split-broken": 1e-3,
    "duflo": 1e-6,
    "duflo-gutt": 1e-3,
    "star": 1e-10,
    "symmetry-classifier": 1e-8,
    "coboundary-pi0": 1e-10,
    "coboundary-graded": 1e-10,
    "log-gamma-symmetry": 1e-8,
    "taylor-family": 1e-10,
}

TAGS = {
    "density-scaling": "density scaling law",
    "liouville-normalization": "Liouville half-density normalization",
    "quotient-complement": "quotient density independent of complement",
    "composition-associativity": "enhanced linear composition is associative",
    "realization": "source map is a Poisson realization",
    "sga": "symplectic groupoid associativity equation for S",
    "series-constant": "series S agrees with the closed form",
    "gamma-cocycle": "canonical factor is a multiplicative cocycle",
    "leading-symbol": "leading-symbol equation for the canonical factor",
    "identity-axiom": "identity axiom for f sigma_c",
    "unit-propagation": "unit propagation and inverse identity",
    "split-associativity": "split-form associativity of sigma_c",
    "split-broken": "split-form criterion detects a non-cocycle",
    "duflo": "canonical factor equals the F_K ratio",
    "duflo-gutt": "canonical factor differs from the F_G ratio",
    "star": "plane-wave amplitude cocycle",
    "symmetry-classifier": "skew mixed Hessian detects obstructions",
    "coboundary-pi0": "zero-structure coboundary round trip",
    "coboundary-graded": "graded coboundary round trip",
    "log-gamma-symmetry": "log of the canonical factor is symmetric",
    "taylor-family": "first graded blocks of S",
}

# checks that pass when the residual is large
DETECTION = {"split-broken", "duflo-gutt"}

# series order for structures without a closed form
QUADRATIC_SERIES_ORDER = 6

# at radius 0.2 the order-10 BCH truncation leaves about 2e-10 in the sl2 amplitude cocycle
STAR_PMAX = 0.1


@dataclass
class Report:
    """Residuals of one check on one structure."""

    check: str
    structure: str
    tol: float
    order: int | None = None
    residuals: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    wall_time: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def detection(self) -> bool:
        return self.check in DETECTION

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    def sample_passed(self, r: float) -> bool:
        return bool(r > self.tol) if self.detection else bool(r < self.tol)

    @property
    def passed(self) -> bool:
        if not self.residuals:
            return False
        if self.detection:
            return self.max_residual > self.tol
        return all(self.sample_passed(r) for r in self.residuals)

    def records(self, timing: bool = False) -> list[dict]:
        out = []
        for k, r in enumerate(self.residuals):
            rec = {"check": self.check, "tag": TAGS[self.check], "structure": self.structure, "sample": k, "residual": float(r), "pass": self.sample_passed(r)}
            if k < len(self.inputs):
                rec["inputs"] = self.inputs[k]
            out.append(rec)
        summary = {
            "check": self.check,
            "tag": TAGS[self.check],
            "structure": self.structure,
            "summary": True,
            "samples": len(self.residuals),
            "max_residual": float(self.max_residual),
            "tol": self.tol,
            "criterion": "max > tol" if self.detection else "max < tol",
            "order": self.order,
            "pass": self.passed,
        }
        if self.notes:
            summary["notes"] = list(self.notes)
        if timing:
            summary["wall_time"] = round(self.wall_time, 3)
        out.append(summary)
        return out


def sampler(seed: int, *labels) -> np.random.Generator:
    """Generator keyed by the seed and the check labels, independent of run order."""
    key = zlib.crc32("/".join(str(x) for x in labels).encode())
    return np.random.default_rng([int(seed), key])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SGALAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn: Callable, items: list) -> list:
    """Evaluate in order, optionally on a thread pool; results keep input order."""
    workers = _threads()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    v = rng.normal(size=n)
    return v / np.linalg.norm(v) * radius * rng.random() ** (1.0 / n)


def _vec(v) -> list:
    return [float(a) for a in np.ravel(v)]


def _timed(report: Report, fn: Callable, items: list, encode: Callable | None = None) -> Report:
    start = time.perf_counter()
    report.residuals = [float(r) for r in _map(fn, items)]
    if encode is not None:
        report.inputs = [encode(it) for it in items]
    report.wall_time = time.perf_counter() - start
    return report


def resolve_structure(spec) -> PoissonStructure:
    """Shipped name, ``file:`` path, inline JSON or an existing structure."""
    if isinstance(spec, PoissonStructure):
        return spec
    if spec in BUILTIN_STRUCTURES or spec in BUILTIN_LIE:
        return builtin_structure(spec)
    return load_structure_config(spec)


def resolve_lie(spec) -> LieAlgebraData:
    if isinstance(spec, LieAlgebraData):
        return spec
    if spec in BUILTIN_LIE:
        return builtin_lie(spec)
    lie = resolve_structure(spec).lie
    if lie is None:
        raise ConfigError("a Lie algebra config is required here")
    return lie


# ---------------------------------------------------------------------------
# density algebra


def _random_symplectic(rng, n: int) -> np.ndarray:
    """Product of symmetric shears, symplectic for the standard form."""
    T = np.eye(2 * n)
    for _ in range(2):
        A = rng.normal(size=(n, n))
        B = rng.normal(size=(n, n))
        upper = np.eye(2 * n)
        upper[:n, n:] = 0.3 * (A + A.T)
        lower = np.eye(2 * n)
        lower[n:, :n] = 0.3 * (B + B.T)
        T = T @ upper @ lower
    return T


def check_density_scaling(seed: int, samples: int = 200) -> Report:
    rng = sampler(seed, "density-scaling")
    items = []
    for _ in range(samples):
        d = int(rng.integers(1, 6))
        alpha = Fraction(int(rng.integers(1, 4)), int(rng.integers(1, 5)))
        items.append((alpha, rng.normal(size=(d, d)), rng.normal(size=(d, d)), complex(rng.normal(), rng.normal())))

    def one(it):
        alpha, ref, change, value = it
        dens = AlphaDensity(alpha, ref, value)
        B = rng_free_basis(ref)
        lhs = dens(B @ change)
        rhs = abs(np.linalg.det(change)) ** float(alpha) * dens(B)
        return abs(lhs - rhs) / max(abs(rhs), 1e-300)

    return _timed(Report("density-scaling", "-", DEFAULT_TOL["density-scaling"]), one, items)


def rng_free_basis(ref: np.ndarray) -> np.ndarray:
    """A second basis of the same space, built deterministically from ``ref``."""
    d = ref.shape[1]
    return ref @ (np.eye(d) + 0.25 * np.tril(np.ones((d, d)), -1))


def check_liouville(seed: int, samples: int = 200) -> Report:
    rng = sampler(seed, "liouville")
    items = [_random_symplectic(rng, int(rng.integers(1, 4))) for _ in range(samples)]
    return _timed(
        Report("liouville-normalization", "-", DEFAULT_TOL["liouville-normalization"]),
        lambda T: abs(liouville_value(standard_symplectic(T.shape[0] // 2), T) - 1.0),
        items,
    )


def check_quotient(seed: int, samples: int = 200) -> Report:
    rng = sampler(seed, "quotient")
    items = []
    for _ in range(samples):
        d2 = int(rng.integers(1, 4))
        d1 = int(rng.integers(1, 4))
        items.append((rng.normal(size=(d2, d1 + d2)), rng.normal(size=(d1 + d2, d1 + d2)), rng.normal(size=(d1, d1)), rng.normal(size=(d1, d2))))

    def one(it):
        P, ref, ref1, shift = it
        base = ShortExactPresentation.from_kernel(P)
        sigma = AlphaDensity(Fraction(1, 2), ref, 1.7)
        sigma1 = AlphaDensity(Fraction(1, 2), base.basis_V1 @ ref1, 0.6)
        moved = ShortExactPresentation(P.shape[1], base.basis_V1, base.complement + base.basis_V1 @ shift, P)
        q1 = quotient_density(sigma, sigma1, base)
        q2 = quotient_density(sigma, sigma1, moved)
        probe = np.eye(P.shape[0])
        return abs(q1(probe) - q2(probe)) / abs(q1(probe))

    return _timed(Report("quotient-complement", "-", DEFAULT_TOL["quotient-complement"]), one, items)


def check_composition(seed: int, samples: int = 200) -> Report:
    rng = sampler(seed, "composition")
    items = []
    for _ in range(samples):
        n = int(rng.integers(1, 3))
        items.append([(_random_symplectic(rng, n), float(rng.uniform(0.5, 2.0))) for _ in range(3)])

    def one(maps):
        n = maps[0][0].shape[0] // 2
        w = standard_symplectic(n)
        rels = [(graph_relation(w, w, T), AlphaDensity(Fraction(1, 2), np.vstack([np.eye(2 * n), T]), v)) for T, v in maps]
        r12 = compose_enhanced_linear(*rels[0], *rels[1])
        left = compose_enhanced_linear(*r12, *rels[2])
        r23 = compose_enhanced_linear(*rels[1], *rels[2])
        right = compose_enhanced_linear(*rels[0], *r23)
        probe = left[1].ref_basis
        a = left[1](probe)
        b = right[1](probe)
        return abs(a - b) / abs(a)

    return _timed(Report("composition-associativity", "-", DEFAULT_TOL["composition-associativity"]), one, items)


# ---------------------------------------------------------------------------
# spray groupoid


def check_realization(seed: int, name: str, samples: int = 20, order: int = 8, pmax: float = 0.1) -> Report:
    pi = resolve_structure(name)
    label = pi.name
    rng = sampler(seed, "realization", label)
    items = [(rng.normal(size=pi.dim) * 0.5, ball(rng, pi.dim, pmax)) for _ in range(samples)]
    spray = Spray(pi, order)
    return _timed(
        Report("realization", label, DEFAULT_TOL["realization"], order),
        lambda it: realization_residual(spray, *it),
        items,
        lambda it: {"x": _vec(it[0]), "p": _vec(it[1])},
    )


def _triples(rng, n: int, samples: int, pmax: float):
    return [(ball(rng, n, pmax), ball(rng, n, pmax), ball(rng, n, pmax), rng.normal(size=n) * 0.5) for _ in range(samples)]


def _encode_triple(it):
    return {"p1": _vec(it[0]), "p2": _vec(it[1]), "p3": _vec(it[2]), "x": _vec(it[3])}


def check_sga(seed: int, name: str, samples: int = 50, order: int = 10, pmax: float = 0.2, backend: str | None = None) -> Report:
    pi = resolve_structure(name)
    label = pi.name
    S = build_generating_function(pi, backend, order)
    rng = sampler(seed, "sga", label)
    items = _triples(rng, pi.dim, samples, pmax)
    rep = Report("sga", label, DEFAULT_TOL["sga"], order)
    rep.notes.append(f"backend={S.backend}")
    return _timed(rep, lambda it: sga_residual(S, *it), items, _encode_triple)


def check_series_constant(seed: int, order: int = 6) -> Report:
    pi = resolve_structure("constant")
    series = build_generating_function(pi, "series", order)
    closed = build_generating_function(pi, "closed_constant", order)
    rep = Report("series-constant", "constant", DEFAULT_TOL["series-constant"], order)
    return _timed(rep, lambda _: (series.poly - closed.poly).max_abs(), [None])


@lru_cache(maxsize=None)
def _gf_for(name: str, order: int):
    pi = resolve_structure(name)
    if pi.degree <= 1:
        return build_generating_function(pi, None, order)
    return build_generating_function(pi, "series", min(order, QUADRATIC_SERIES_ORDER))


def check_gamma_cocycle(seed: int, name: str, samples: int = 50, order: int = 10, pmax: float = 0.1) -> Report:
    """Multiplicative cocycle test of gamma_S; for structures with x-curvature of S the leading-symbol equation is used."""
    S = _gf_for(name, order)
    label = S.pi.name
    rng = sampler(seed, "gamma-cocycle", label)
    items = _triples(rng, S.dim, samples, pmax)
    gamma = cc.gamma_cochain(S)
    if S.pi.degree <= 1:
        rep = Report("gamma-cocycle", label, DEFAULT_TOL["gamma-cocycle"], S.order)
        return _timed(rep, lambda it: abs(cc.delta_mult(gamma, S, *it) - 1.0), items, _encode_triple)
    rep = Report("leading-symbol", label, DEFAULT_TOL["leading-symbol"], S.order)
    return _timed(rep, lambda it: a0_residual(S, gamma, *it), items, _encode_triple)


def _arrows(rng, n: int, samples: int, pmax: float):
    return [(rng.normal(size=n) * 0.5, ball(rng, n, pmax)) for _ in range(samples)]


def check_identity_axiom(seed: int, name: str, samples: int = 5, order: int = 10, pmax: float = 0.15, factor: float = 1.0) -> Report:
    S = _gf_for(name, order)
    label = S.pi.name
    rng = sampler(seed, "identity-axiom", label)
    arrows = _arrows(rng, S.dim, samples, pmax)
    ef = cc.EnhancementFactor(cc.Cochain2.constant(factor))
    rep = Report("identity-axiom", label, DEFAULT_TOL["identity-axiom"], S.order)
    start = time.perf_counter()
    result = cc.identity_axiom_check(ef, S, arrows, rep.tol, label)
    rep.residuals = [r.residual for r in result.records]
    rep.wall_time = time.perf_counter() - start
    return rep


def check_unit_propagation(seed: int, name: str, samples: int = 20, order: int = 10, pmax: float = 0.1) -> Report:
    S = _gf_for(name, order)
    label = S.pi.name
    rng = sampler(seed, "unit-propagation", label)
    arrows = _arrows(rng, S.dim, samples, pmax)
    rep = Report("unit-propagation", label, DEFAULT_TOL["unit-propagation"], S.order)
    start = time.perf_counter()
    result = cc.unit_propagation_check(cc.gamma_cochain(S), S, arrows, rep.tol, label)
    rep.residuals = [r.residual for r in result.records]
    rep.wall_time = time.perf_counter() - start
    return rep


# ---------------------------------------------------------------------------
# linear structures


def action_triple(lie, rng, amax: float):
    a1, a2, a3 = (ball(rng, lie.dim, amax) for _ in range(3))
    x3 = rng.normal(size=lie.dim)
    g3 = ActionGroupoidElement(a3, x3)
    g2 = ActionGroupoidElement(a2, coadjoint(lie, a3, x3))
    g1 = ActionGroupoidElement(a1, coadjoint(lie, a2, g2.x))
    return g1, g2, g3


def broken_factor(g1, g2) -> float:
    """``1 + |a1|^2``: normalized on the right but not a cocycle."""
    return 1.0 + float(g1.a @ g1.a)


def check_split(seed: int, name: str, samples: int = 20, amax: float = 0.3, broken: bool = False) -> Report:
    lie = resolve_lie(name)
    label = lie.name
    rng = sampler(seed, "split", label)
    items = [action_triple(lie, rng, amax) for _ in range(samples)]
    f = broken_factor if broken else None
    check = "split-broken" if broken else "split-associativity"
    rep = Report(check, label, DEFAULT_TOL[check])
    return _timed(
        rep,
        lambda t: split_associativity_residual(lie, t, f),
        items,
        lambda t: {"a": [_vec(g.a) for g in t], "x3": _vec(t[2].x)},
    )


def _guarded(rng, draw: Callable, accept: Callable, count: int, limit: int = 10000):
    """Draw until ``count`` samples pass the domain guard; returns (samples, rejected)."""
    out, rejected = [], 0
    while len(out) < count:
        if rejected > limit:
            raise LieDomainError("too many samples rejected by the domain guard")
        item = draw()
        try:
            accept(item)
        except LieDomainError:
            rejected += 1
            continue
        out.append(item)
    return out, rejected


def check_duflo(seed: int, name: str, samples: int = 50, order: int = 10, pmax: float = 0.2, F_choice: str = "F_K") -> Report:
    lie = resolve_lie(name)
    label = lie.name
    rng = sampler(seed, "duflo", label)
    items, rejected = _guarded(
        rng,
        lambda: (ball(rng, lie.dim, pmax), ball(rng, lie.dim, pmax), rng.normal(size=lie.dim)),
        lambda it: plane_wave_star(lie, "F_K", it[0], it[1]),
        samples,
    )
    check = "duflo" if F_choice == "F_K" else "duflo-gutt"
    rep = Report(check, label, DEFAULT_TOL[check], order)
    if rejected:
        rep.notes.append(f"rejected_by_guard={rejected}")
    return _timed(
        rep,
        lambda it: duflo_identity_residual(lie, it[0], it[1], it[2], order, F_choice),
        items,
        lambda it: {"p1": _vec(it[0]), "p2": _vec(it[1]), "x": _vec(it[2])},
    )


def star_residual(lie, F_choice: str, p1, p2, p3):
    """``|delta(amplitude) - 1|`` for ``e^{p1} * e^{p2} = a(p1, p2) e^{p1.p2}``; stacks give one value per row."""
    p12, a12 = plane_wave_star(lie, F_choice, p1, p2)
    p23, a23 = plane_wave_star(lie, F_choice, p2, p3)
    _, a12_3 = plane_wave_star(lie, F_choice, p12, p3)
    _, a1_23 = plane_wave_star(lie, F_choice, p1, p23)
    return np.abs(a23 * a1_23 / (a12_3 * a12) - 1.0)


def star_chart_mask(lie, p1, p2, p3) -> np.ndarray:
    """Rows whose covectors, including the partial products, pass the domain guard."""
    p12 = bch(lie, p1, p2)
    p23 = bch(lie, p2, p3)
    pts = [p1, p2, p3, p12, p23, bch(lie, p12, p3), bch(lie, p1, p23)]
    ok = np.ones(len(p1), bool)
    for q in pts:
        ok &= ad_norm(lie, q) < AD_NORM_GUARD
        ok[ok] &= np.linalg.det(ad_function(lie, q[ok], "sinhc_half")) > 0
    return ok


def check_star(seed: int, name: str, F_choice: str, samples: int = 100, pmax: float = STAR_PMAX) -> Report:
    lie = resolve_lie(name)
    label = lie.name
    rng = sampler(seed, "star", label, F_choice)
    rows, rejected = [], 0
    while sum(len(r[0]) for r in rows) < samples:
        cand = [np.array([ball(rng, lie.dim, pmax) for _ in range(samples)]) for _ in range(3)]
        ok = star_chart_mask(lie, *cand)
        rejected += int(np.count_nonzero(~ok))
        rows.append([c[ok] for c in cand])
    P1, P2, P3 = (np.concatenate([r[k] for r in rows])[:samples] for k in range(3))
    rep = Report("star", f"{label}:{F_choice}", DEFAULT_TOL["star"])
    if rejected:
        rep.notes.append(f"rejected_by_guard={rejected}")
    start = time.perf_counter()
    rep.residuals = [float(r) for r in star_residual(lie, F_choice, P1, P2, P3)]
    rep.inputs = [{"p": [_vec(P1[k]), _vec(P2[k]), _vec(P3[k])]} for k in range(samples)]
    rep.wall_time = time.perf_counter() - start
    return rep


# ---------------------------------------------------------------------------
# cocycle machinery


def check_symmetry_classifier(seed: int) -> Report:
    """Residual 0 for a symmetric pairing; the skew test cochain must report exactly its 2-form."""
    n = 2
    sym = cc.Cochain2.from_poly(Poly.from_terms({(1, 0, 1, 0, 0, 0): 1.0, (0, 1, 0, 1, 0, 0): 1.0}, 3 * n))
    skew = cc.Cochain2.from_poly(Poly.from_terms({(1, 0, 0, 1, 1, 0): 1.0, (0, 1, 1, 0, 1, 0): -1.0}, 3 * n))
    x = np.array([1.0, 0.0])
    _, k_sym, ok_sym = cc.symmetry_and_vanest0(sym, [x], n)
    _, k_skew, ok_skew = cc.symmetry_and_vanest0(skew, [x], n)
    expected = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rep = Report("symmetry-classifier", "pair-forms", DEFAULT_TOL["symmetry-classifier"])
    rep.residuals = [
        float(np.max(np.abs(k_sym[0]))) + (0.0 if ok_sym else 1.0),
        float(np.max(np.abs(k_skew[0] - expected))) + (1.0 if ok_skew else 0.0),
    ]
    return rep


def _random_primitive(rng, n: int, max_degree: int) -> Poly:
    terms = {}
    xmons = [tuple([0] * n)] + [tuple(r) for r in monomials(n, 1)]
    for k in range(2, max_degree + 1):
        for e in monomials(n, k):
            for xe in xmons:
                terms[tuple(int(v) for v in e) + xe] = float(rng.normal())
    return Poly.from_terms(terms, 2 * n)


def check_coboundary_pi0(seed: int, samples: int = 5, max_degree: int = 6) -> Report:
    rng = sampler(seed, "coboundary-pi0")
    n = 2
    items = [_random_primitive(rng, n, max_degree) for _ in range(samples)]

    def one(hp):
        res = cc.coboundary_solve_pi0(cc.delta0_poly(hp, n), n, max_degree)
        return res.roundtrip_error if res.success else np.inf

    return _timed(Report("coboundary-pi0", "zero", DEFAULT_TOL["coboundary-pi0"], max_degree), one, items)


def check_coboundary_graded(seed: int, name: str = "aff1", samples: int = 2, max_degree: int = 6) -> Report:
    from .cocycles import _delta_1cochain_series

    pi = resolve_structure(name)
    label = pi.name
    S = build_generating_function(pi, None, max_degree)
    rng = sampler(seed, "coboundary-graded", label)
    items = [_random_primitive(rng, pi.dim, max_degree) for _ in range(samples)]

    def one(hp):
        h = _delta_1cochain_series(hp, S.poly, pi.dim, max_degree)
        res = cc.graded_coboundary_solve(h, S, max_degree)
        return res.roundtrip_error if res.success else np.inf

    return _timed(Report("coboundary-graded", label, DEFAULT_TOL["coboundary-graded"], max_degree), one, items)


def check_log_gamma_symmetry(seed: int, name: str, samples: int = 2, order: int = 10) -> Report:
    S = _gf_for(name, order)
    label = S.pi.name
    rng = sampler(seed, "log-gamma-symmetry", label)
    xs = [rng.normal(size=S.dim) * 0.5 for _ in range(samples)]
    h = cc.log_gamma_cochain(S)

    def one(x):
        _, skew, _ = cc.symmetry_and_vanest0(h, [x], S.dim)
        return float(np.max(np.abs(skew[0])))

    return _timed(Report("log-gamma-symmetry", label, DEFAULT_TOL["log-gamma-symmetry"], S.order), one, xs, lambda x: {"x": _vec(x)})


def check_taylor(seed: int, name: str, order: int = 3) -> Report:
    pi = resolve_structure(name)
    label = pi.name
    n = pi.dim
    S = build_generating_function(pi, "series", order)
    V = 3 * n
    first = Poly.zero(V)
    for i in range(n):
        xi = Poly.variable(2 * n + i, V)
        first = first + xi * (Poly.variable(i, V) + Poly.variable(n + i, V))
    entries = pi.entry_polys()  # payload (n, n), polynomial in x
    second = Poly.zero(V)
    for i in range(n):
        for j in range(n):
            e = entries.with_caps(None)
            comp = Poly(n, e.exps, e.coef[:, i, j]).embed(list(range(2 * n, 3 * n)), V)
            second = second + comp * Poly.variable(i, V) * Poly.variable(n + j, V) * 0.5
    pv = range(2 * n)
    rep = Report("taylor-family", label, DEFAULT_TOL["taylor-family"], order)
    rep.residuals = [(S.poly.part(pv, 1) - first).max_abs(), (S.poly.part(pv, 2) - second).max_abs()]
    return rep


# ---------------------------------------------------------------------------
# suites

REALIZATION_NAMES = ("zero", "constant") + LINEAR_NAMES + ("quadratic",)
CLOSED_NAMES = ("zero", "constant") + LINEAR_NAMES
SPLIT_NAMES = ("so3", "h3", "aff1")


def suite_densities(seed: int) -> list[Report]:
    return [check_density_scaling(seed), check_liouville(seed), check_quotient(seed), check_composition(seed)]


def suite_realization(seed: int) -> list[Report]:
    reports = [check_realization(seed, name) for name in REALIZATION_NAMES]
    reports += [check_sga(seed, name) for name in CLOSED_NAMES]
    reports.append(check_series_constant(seed))
    reports += [check_taylor(seed, name) for name in ("constant",) + LINEAR_NAMES]
    return reports


def suite_cocycle(seed: int) -> list[Report]:
    reports = []
    for name in REALIZATION_NAMES:
        reports.append(check_gamma_cocycle(seed, name))
        reports.append(check_identity_axiom(seed, name))
        reports.append(check_unit_propagation(seed, name))
    reports += [check_split(seed, name) for name in SPLIT_NAMES]
    reports += [check_split(seed, name, broken=True) for name in SPLIT_NAMES]
    return reports


def suite_duflo(seed: int, names=LINEAR_NAMES) -> list[Report]:
    reports = [check_duflo(seed, name) for name in names]
    reports += [check_duflo(seed, name, F_choice="F_G") for name in names if name != "h3"]
    reports += [check_star(seed, name, F) for name in names for F in F_CHOICES]
    return reports


def suite_solver(seed: int) -> list[Report]:
    reports = [check_symmetry_classifier(seed), check_coboundary_pi0(seed), check_coboundary_graded(seed)]
    reports += [check_log_gamma_symmetry(seed, name) for name in LINEAR_NAMES + ("quadratic",)]
    return reports


SUITES = {
    "densities": suite_densities,
    "realization": suite_realization,
    "cocycle": suite_cocycle,
    "duflo": suite_duflo,
    "solver": suite_solver,
}


def run_suite(name: str, seed: int, **kwargs) -> list[Report]:
    if name == "all":
        out = []
        for key in ("densities", "realization", "cocycle", "duflo", "solver"):
            out += SUITES[key](seed)
        return out
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}")
    return SUITES[name](seed, **kwargs)
