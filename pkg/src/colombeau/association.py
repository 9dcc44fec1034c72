"""Weak-limit association machinery.

Pairs expression trees against compactly supported test functions, sends
eps to zero along ratio-2 grids with two-level Richardson extrapolation,
and issues association verdicts.  The existential quantifiers of the
definitions cannot be witnessed by finite scans, so reports name the
mollifiers used and verdicts require unanimity across all tested pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymptotics import Inconclusive, SLOPE_MARGIN, estimate_order
from .distributions import Distribution, LinComb, Regular, SmoothMultiple, DeltaAt, Derivative, pair
from .functions import PiecewiseSmooth, piecewise_product
from .genfunc import (
    Const,
    EvalContext,
    Iota,
    IotaMinusSigma,
    Product,
    Sigma,
    Sum,
    evaluate,
    iota,
    normalize,
    partial,
    sigma,
)
from .quadrature import integrate


@dataclass(frozen=True)
class AssociatedTo:
    label: str


@dataclass(frozen=True)
class AssociatedToZero:
    pass


@dataclass(frozen=True)
class Divergent:
    order: int


@dataclass(frozen=True)
class AssociationCase:
    psi: str
    phi_order: int
    phi_label: str
    eps_values: tuple
    pairings: tuple
    extrapolated: float
    error_bar: float
    candidate_value: float | None
    deviation: float | None
    growth_slope: float


@dataclass(frozen=True)
class AssociationReport:
    cases: tuple
    verdict: object
    tol: float
    candidate_label: str | None = None


# ---------------------------------------------------------------------------
# structural feature extraction (quadrature hints)


def _dist_features(T):
    pts = set()
    if isinstance(T, DeltaAt):
        pts.add(T.point[0])
    elif isinstance(T, (Derivative, SmoothMultiple)):
        pts |= _dist_features(T.inner)
    elif isinstance(T, LinComb):
        for _, t in T.terms:
            pts |= _dist_features(t)
    elif isinstance(T, Regular) and T.ndim == 1:
        pts |= set(T.density.breakpoints)
        for s in T.density.support:
            if np.isfinite(s):
                pts.add(float(s))
    return pts


def feature_points(F, ctx: EvalContext):
    """x locations where F(phi_eps, .) has kernel-scale features."""
    r = ctx.eps * ctx.mollifier.support_radius
    pts = set()

    def walk(expr):
        if isinstance(expr, Iota):
            for p in _dist_features(expr.dist):
                pts.update((p - r, p, p + r))
        elif isinstance(expr, IotaMinusSigma):
            sup = expr.fn.support
            if sup is not None:
                pts.update((sup[0] - r, sup[0] + r, sup[1] - r, sup[1] + r))
        elif isinstance(expr, Sigma) and not isinstance(expr.fn, tuple):
            if expr.fn.support is not None:
                pts.update(expr.fn.support)
        elif isinstance(expr, Sum):
            for c in expr.children:
                walk(c)
        elif isinstance(expr, Product):
            walk(expr.left)
            walk(expr.right)

    walk(normalize(F))
    return sorted(pts)


def _dist_support(T, r):
    if isinstance(T, DeltaAt):
        p = T.point[0]
        return (p - r, p + r)
    if isinstance(T, (Derivative, SmoothMultiple)):
        return _dist_support(T.inner, r)
    if isinstance(T, LinComb):
        lo, hi = math.inf, -math.inf
        for _, t in T.terms:
            s = _dist_support(t, r)
            if s is None:
                return None
            lo, hi = min(lo, s[0]), max(hi, s[1])
        return (lo, hi) if lo < hi else (0.0, 0.0)
    if isinstance(T, Regular) and T.ndim == 1:
        lo, hi = T.density.support
        if np.isfinite(lo) and np.isfinite(hi):
            return (lo - r, hi + r)
    return None


def support_interval(F, ctx: EvalContext):
    """Interval outside which F(phi_eps, .) vanishes, or None if unbounded."""
    r = ctx.eps * ctx.mollifier.support_radius

    def walk(expr):
        if isinstance(expr, Iota):
            return _dist_support(expr.dist, r)
        if isinstance(expr, IotaMinusSigma):
            sup = expr.fn.support
            return None if sup is None else (sup[0] - r, sup[1] + r)
        if isinstance(expr, Sigma) and not isinstance(expr.fn, tuple):
            return expr.fn.support
        if isinstance(expr, Const):
            return (0.0, 0.0) if expr.value == 0 else None
        if isinstance(expr, Sum):
            lo, hi = math.inf, -math.inf
            for c in expr.children:
                s = walk(c)
                if s is None:
                    return None
                lo, hi = min(lo, s[0]), max(hi, s[1])
            return (lo, hi) if lo <= hi else (0.0, 0.0)
        if isinstance(expr, Product):
            s1, s2 = walk(expr.left), walk(expr.right)
            if s1 is None:
                return s2
            if s2 is None:
                return s1
            return (max(s1[0], s2[0]), min(s1[1], s2[1]))
        return None

    return walk(normalize(F))


# ---------------------------------------------------------------------------
# weak pairing and extrapolation


def weak_pairing(F, ctx: EvalContext, psi, tol: float | None = None) -> float:
    """integral of F(phi_eps, x) Psi(x) dx over the support of Psi.

    Quadrature panels split at the kernel-feature locations of F, so the
    eps-scale structure is resolved instead of aliased.
    """
    if ctx.ndim != 1:
        raise NotImplementedError("weak pairings are 1D")
    (lo, hi), = psi.support
    sup = support_interval(F, ctx)
    if sup is not None:
        lo, hi = max(lo, sup[0]), min(hi, sup[1])
        if hi <= lo:
            return 0.0
    cuts = [p for p in feature_points(F, ctx) if lo < p < hi]

    def integrand(xs):
        return np.asarray(evaluate(F, ctx, xs), dtype=float) * np.asarray(psi.value(xs), dtype=float)

    return float(integrate(integrand, lo, hi, tol=tol or ctx.quad_tol, breakpoints=cuts))


def richardson_limit(values):
    """Two-level Richardson on a ratio-2 grid (three values, eps decreasing).

    Cancels the eps and eps^2 error terms; the error bar is the difference
    between the final extrapolant and the last first-level one.
    """
    v0, v1, v2 = values[-3], values[-2], values[-1]
    r1a = 2 * v1 - v0
    r1b = 2 * v2 - v1
    r2 = (4 * r1b - r1a) / 3
    return float(r2), float(abs(r2 - r1b))


def _dyadic_eps(eps_min: float, levels: int):
    return [eps_min * 2 ** (levels - 1 - j) for j in range(levels)]


def associate(F, psis, mollifiers, eps_min: float = 1e-3, candidate=None,
              tol: float = 1e-3, levels: int = 8) -> AssociationReport:
    """Associate F with a candidate distribution (or 0, or divergence).

    Per test function and mollifier, pairings run along a ratio-2 grid down
    to eps_min; the three smallest levels feed Richardson extrapolation.
    The verdict requires unanimity over all (psi, phi) cases.
    """
    eps_levels = _dyadic_eps(eps_min, levels)
    cases = []
    cand_label = _dist_label(candidate) if candidate is not None else None
    for psi in psis:
        cval = pair(candidate, psi) if candidate is not None else None
        for m in mollifiers:
            pairings = []
            for eps in eps_levels:
                ctx = EvalContext(m, eps)
                pairings.append(weak_pairing(F, ctx, psi))
            extrap, err = richardson_limit(pairings)
            dev = abs(extrap - cval) if cval is not None else None
            growth = estimate_order(list(zip(eps_levels, pairings))).slope
            cases.append(AssociationCase(
                psi=getattr(psi, "name", "psi"), phi_order=m.order_q, phi_label=repr(m),
                eps_values=tuple(eps_levels), pairings=tuple(pairings),
                extrapolated=extrap, error_bar=err,
                candidate_value=cval, deviation=dev, growth_slope=float(growth),
            ))
    verdict = _verdict(cases, candidate, cand_label, tol)
    return AssociationReport(tuple(cases), verdict, tol, cand_label)


def _dist_label(T):
    if isinstance(T, LinComb) and not T.terms:
        return "0"
    return getattr(T, "label", None) or repr(T)


def _verdict(cases, candidate, cand_label, tol):
    if candidate is not None:
        if all(c.deviation is not None and c.deviation <= tol for c in cases):
            if all(abs(c.candidate_value) <= 1e-14 for c in cases):
                return AssociatedToZero()
            return AssociatedTo(cand_label)
    else:
        if all(abs(c.extrapolated) <= tol for c in cases):
            return AssociatedToZero()
    slopes = [c.growth_slope for c in cases]
    if all(s <= -1 + SLOPE_MARGIN for s in slopes):
        order = max(max(1, math.ceil(-s - SLOPE_MARGIN)) for s in slopes)
        return Divergent(order)
    return Inconclusive("limits neither match the candidate nor diverge cleanly")


# ---------------------------------------------------------------------------
# compatibility propositions


def check_product_compat(case: str, f, g_or_T, psis, mollifiers,
                         eps_min: float = 1e-3, tol: float = 1e-3) -> AssociationReport:
    """Product compatibility at the level of association.

    ``case='smooth-dist'``: f smooth, T a distribution; tests
    iota(f) iota(T) against iota(fT).  ``case='cont-cont'``: f, g continuous
    densities; tests iota(f) iota(g) against iota(fg).
    """
    if case == "smooth-dist":
        T = g_or_T
        F = Product(Iota(Regular(f)), Iota(T))
        candidate = SmoothMultiple(f, T)
    elif case == "cont-cont":
        g = g_or_T
        F = Product(Iota(Regular(f)), Iota(Regular(g)))
        fp = f if isinstance(f, PiecewiseSmooth) else None
        gp = g if isinstance(g, PiecewiseSmooth) else None
        if fp is None or gp is None:
            raise TypeError("cont-cont case expects piecewise-smooth densities")
        candidate = Regular(piecewise_product(fp, gp))
    else:
        raise ValueError(f"unknown case {case!r} (want 'smooth-dist' or 'cont-cont')")
    return associate(F, psis, mollifiers, eps_min=eps_min, candidate=candidate, tol=tol)


def check_lie_assoc(T: Distribution, X, psis, mollifiers,
                    eps_min: float = 1e-3, tol: float = 1e-3) -> AssociationReport:
    """Lie-derivative association: X^a d_a iota(T) against iota(L_X T)."""
    from .distributions import lie_derivative_dist

    terms = []
    for a in range(X.ndim):
        terms.append(Product(Sigma(X.components[a]), partial(a + 1, Iota(T))))
    F = Sum(tuple(terms))
    candidate = lie_derivative_dist(T, X)
    return associate(F, psis, mollifiers, eps_min=eps_min, candidate=candidate, tol=tol)
