"""Composite Gauss-Legendre quadrature in extended precision.

All kernel pairings and moment certifications in this package run through
the rules built here.  Internals use numpy's ``longdouble`` (80-bit extended
on x86) so that moment residuals of constructed mollifiers sit at ~1e-19,
two orders below the smallest signals the asymptotic scans must resolve.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as _leg

LD = np.longdouble

DEFAULT_TOL = 1e-10
_TOL_ENV = "COLOMBEAU_QUAD_TOL"

#: nodes per panel for every composite rule in the package
PANEL_ORDER = 32

#: panels of the fixed certification rule on [-1, 1] (machine-precision
#: for bump-profile moments, see tests), and of its doubled check rule
FIXED_PANELS = 16


class QuadratureError(RuntimeError):
    """Adaptive refinement failed to reach tolerance.

    Carries the last estimate and the last error estimate so callers can
    report diagnostics instead of silently using a bad value.
    """

    def __init__(self, message, last_estimate=None, error_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.error_estimate = error_estimate


def default_tol() -> float:
    """Quadrature tolerance, overridable via the COLOMBEAU_QUAD_TOL env var."""
    raw = os.environ.get(_TOL_ENV)
    if raw is None:
        return DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError as exc:
        raise ValueError(f"{_TOL_ENV} must be a float, got {raw!r}") from exc
    if tol <= 0:
        raise ValueError(f"{_TOL_ENV} must be positive, got {tol}")
    return tol


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights on [-1, 1] in longdouble.

    float64 nodes from numpy are Newton-polished in extended precision;
    weights come from the standard derivative formula.
    """
    x64, _ = np.polynomial.legendre.leggauss(n)
    x = x64.astype(LD)
    series = np.zeros(n + 1, dtype=LD)
    series[-1] = 1
    dseries = _leg.legder(series)
    for _ in range(4):
        x = x - _leg.legval(x, series) / _leg.legval(x, dseries)
    w = LD(2) / ((1 - x * x) * _leg.legval(x, dseries) ** 2)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(panels: int, lo=-1.0, hi=1.0, order: int = PANEL_ORDER):
    """Composite Gauss-Legendre rule: `panels` equal panels of `order` nodes."""
    xs, ws = gauss_legendre(order)
    lo = LD(lo)
    hi = LD(hi)
    edges = np.linspace(lo, hi, panels + 1, dtype=LD)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    nodes = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
    weights = (half[:, None] * ws[None, :]).ravel()
    return nodes, weights


class FixedRule:
    """Immutable quadrature rule on [-1, 1] shared across pairings.

    Mollifier moment systems are solved against this exact discrete rule,
    so any pairing evaluated with the same nodes inherits moment residuals
    at the solve level (~1e-19) rather than at continuum-transfer level.
    """

    def __init__(self, panels: int = FIXED_PANELS, order: int = PANEL_ORDER):
        self.panels = panels
        self.order = order
        self.nodes, self.weights = composite_rule(panels, order=order)

    def __len__(self):
        return len(self.nodes)

    def integrate(self, values):
        return np.sum(self.weights * values)

    def mapped(self, lo, hi):
        """Affine image of the rule on [lo, hi]."""
        lo = LD(lo)
        hi = LD(hi)
        mid = (hi + lo) / 2
        half = (hi - lo) / 2
        return mid + half * self.nodes, half * self.weights


@lru_cache(maxsize=8)
def fixed_rule(panels: int = FIXED_PANELS) -> FixedRule:
    return FixedRule(panels)


def _segment_integral(f, lo, hi, tol, max_depth):
    xs, ws = gauss_legendre(PANEL_ORDER)
    lo = LD(lo)
    hi = LD(hi)
    prev = None
    for depth in range(max_depth + 1):
        panels = 2**depth
        edges = np.linspace(lo, hi, panels + 1, dtype=LD)
        mid = (edges[:-1] + edges[1:]) / 2
        half = (edges[1:] - edges[:-1]) / 2
        nodes = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
        weights = (half[:, None] * ws[None, :]).ravel()
        cur = np.sum(weights * np.asarray(f(nodes), dtype=LD))
        if prev is not None:
            err = abs(cur - prev)
            if err <= tol + 1e-14 * abs(cur):
                return cur, float(err)
        prev = cur
    raise QuadratureError(
        f"no convergence on [{float(lo)}, {float(hi)}] after {max_depth} "
        f"refinements (last error {float(err):.3e}, tol {tol:.3e})",
        last_estimate=float(cur),
        error_estimate=float(err),
    )


def integrate(f, lo, hi, tol: float | None = None, breakpoints=(), max_depth: int = 13):
    """Adaptive composite Gauss-Legendre integral of ``f`` over [lo, hi].

    ``f`` must accept a numpy array of nodes.  The interval is split at the
    declared breakpoints (integrand kinks); each segment is refined
    dyadically until the change between successive levels drops below the
    tolerance.  Raises QuadratureError when refinement stalls.
    """
    if tol is None:
        tol = default_tol()
    lo = float(lo)
    hi = float(hi)
    if hi <= lo:
        return LD(0.0)
    cuts = [lo] + sorted(b for b in set(float(b) for b in breakpoints) if lo < b < hi) + [hi]
    seg_tol = tol / max(1, len(cuts) - 1)
    total = LD(0.0)
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = _segment_integral(f, a, b, seg_tol, max_depth)
        total += val
    return total


def integrate_2d(f, lo, hi, tol: float | None = None, breakpoints=((), ()), max_depth: int = 8):
    """Tensor-grid analogue of :func:`integrate` over the rectangle lo x hi.

    ``f(X, Y)`` must broadcast over equal-shaped coordinate arrays.
    Both axes are refined together; breakpoints are per-axis.
    """
    if tol is None:
        tol = default_tol()
    (lo1, lo2), (hi1, hi2) = lo, hi
    xs, ws = gauss_legendre(PANEL_ORDER)

    def axis_nodes(a, b, cuts, depth):
        a, b = float(a), float(b)
        edges = [a] + sorted(c for c in set(float(c) for c in cuts) if a < c < b) + [b]
        nodes, weights = [], []
        for s0, s1 in zip(edges[:-1], edges[1:]):
            sub = np.linspace(LD(s0), LD(s1), 2**depth + 1, dtype=LD)
            for a0, b0 in zip(sub[:-1], sub[1:]):
                mid, half = (a0 + b0) / 2, (b0 - a0) / 2
                nodes.append(mid + half * xs)
                weights.append(half * ws)
        return np.concatenate(nodes), np.concatenate(weights)

    prev = None
    for depth in range(max_depth + 1):
        nx, wx = axis_nodes(lo1, hi1, breakpoints[0], depth)
        ny, wy = axis_nodes(lo2, hi2, breakpoints[1], depth)
        vals = np.asarray(f(nx[:, None], ny[None, :]), dtype=LD)
        cur = wx @ vals @ wy
        if prev is not None and abs(cur - prev) <= tol + 1e-14 * abs(cur):
            return cur
        prev = cur
    raise QuadratureError(
        f"2d integral did not converge after {max_depth} refinements",
        last_estimate=float(cur),
        error_estimate=float(abs(cur - prev)),
    )
