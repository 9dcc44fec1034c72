"""Empirical certification of moderateness and negligibility.

Scans sup-norms of expression trees over compact sets along geometric
epsilon grids, fits log-log slopes over the smallest-epsilon half window,
and issues graded verdicts with fixed margins (0.2 in slope, 0.1 in log10
residual).  Verdicts certify behavior on the scanned grid with the named
mollifiers only; that caveat is part of every report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .genfunc import EvalContext, Partial, evaluate, normalize
from .mollifier import Mollifier1D, cached_mollifier
from .quadrature import LD

SLOPE_MARGIN = 0.2
RESIDUAL_MAX = 0.1
ZERO_CLIP = 1e-300
ZERO_FLOOR = 1e-250  # below this for every sample the scan is treated as 0

MAX_GRID_POINTS = 4_000_000


class MissingModeratenessError(RuntimeError):
    """The derivative-free shortcut needs a moderateness certificate first."""


class UndersampledGridError(ValueError):
    """Requested resolution is too coarse for the kernel scale."""


@dataclass(frozen=True)
class EpsGrid:
    """Geometric grid eps_j = eps_max * r^j, j = 0..count-1."""

    eps_max: float = 1e-1
    eps_min: float = 1e-3
    count: int = 20

    def __post_init__(self):
        if not 0 < self.eps_min < self.eps_max <= 1:
            raise ValueError("need 0 < eps_min < eps_max <= 1")
        if self.count < 8:
            raise ValueError("need at least 8 grid points")

    def values(self):
        """Descending epsilon values."""
        return np.geomspace(self.eps_max, self.eps_min, self.count)


@dataclass(frozen=True)
class CompactRegion:
    """Compact interval (1D) or rectangle (2D) with an eps-tied step rule.

    The sampling step is eps/step_divisor; embedded kernels have features of
    width eps, so any coarser grid aliases the sup.
    """

    lower: object
    upper: object
    step_divisor: float = 4.0

    @property
    def ndim(self):
        return 1 if np.ndim(self.lower) == 0 else len(self.lower)

    def grid(self, eps: float):
        step = eps / self.step_divisor
        if self.ndim == 1:
            lo, hi = float(self.lower), float(self.upper)
            n = int(math.ceil((hi - lo) / step)) + 1
            if n > MAX_GRID_POINTS:
                raise UndersampledGridError(
                    f"grid of {n} points needed at eps={eps}; shrink the region "
                    f"or raise eps (cap {MAX_GRID_POINTS})"
                )
            return np.linspace(LD(lo), LD(hi), max(n, 2))
        los = [float(v) for v in self.lower]
        his = [float(v) for v in self.upper]
        axes = []
        total = 1
        for lo, hi in zip(los, his):
            n = int(math.ceil((hi - lo) / step)) + 1
            total *= n
            axes.append(np.linspace(LD(lo), LD(hi), max(n, 2)))
        if total > MAX_GRID_POINTS:
            raise UndersampledGridError(
                f"grid of {total} points needed at eps={eps}; shrink the region"
            )
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh])


def region(lower, upper) -> CompactRegion:
    return CompactRegion(lower, upper)


# ---------------------------------------------------------------------------
# order estimation


@dataclass(frozen=True)
class DecaysAtLeast:
    m: int


@dataclass(frozen=True)
class GrowsAtMost:
    n: int


@dataclass(frozen=True)
class Inconclusive:
    reason: str = ""


@dataclass(frozen=True)
class OrderEstimate:
    """Fitted log-log slope of |value| against eps with residual diagnostics.

    ``slope`` is +inf when every sample was an exact/underflow zero (the
    scan is then a certificate for any decay order).  ``n_clipped`` counts
    zero samples clipped to the floor inside the fitted window.
    """

    slope: float
    intercept: float
    max_residual: float
    window: tuple
    n_clipped: int = 0

    @property
    def clean(self) -> bool:
        return self.max_residual <= RESIDUAL_MAX and self.n_clipped == 0

    def certifies_decay(self, m: float) -> bool:
        if math.isinf(self.slope):
            return True
        return self.clean and self.slope >= m - SLOPE_MARGIN

    def growth_bound(self):
        """Smallest N with slope >= -N - margin, or None if the fit is dirty."""
        if math.isinf(self.slope):
            return 0
        if not self.clean:
            return None
        return max(0, math.ceil(-self.slope - SLOPE_MARGIN))


def estimate_order(samples) -> OrderEstimate:
    """Least-squares slope of log10|value| vs log10 eps.

    The fit runs over the smallest-eps half of the samples (the asymptotic
    regime); wild data shows up as a large residual, never as a fabricated
    slope.  Requires at least 8 samples.
    """
    samples = sorted(((float(e), float(v)) for e, v in samples), key=lambda s: s[0])
    if len(samples) < 8:
        raise ValueError("need at least 8 (eps, value) samples")
    eps = np.array([s[0] for s in samples])
    vals = np.abs(np.array([s[1] for s in samples]))
    if np.all(vals <= ZERO_FLOOR):
        return OrderEstimate(math.inf, -math.inf, 0.0, (0, len(samples) // 2), 0)
    n_half = max(len(samples) // 2, 4)
    window = (0, n_half)
    e_w = eps[:n_half]
    v_w = vals[:n_half].copy()
    clipped = int(np.sum(v_w < ZERO_CLIP))
    v_w[v_w < ZERO_CLIP] = ZERO_CLIP
    lg_e = np.log10(e_w)
    lg_v = np.log10(v_w)
    slope, intercept = np.polyfit(lg_e, lg_v, 1)
    resid = float(np.max(np.abs(np.polyval([slope, intercept], lg_e) - lg_v)))
    return OrderEstimate(float(slope), float(intercept), resid, window, clipped)


# ---------------------------------------------------------------------------
# sup scans


@dataclass(frozen=True)
class SupResult:
    value: float
    eps: float
    step: float
    n_points: int
    k: tuple


def _as_k(k, ndim):
    if np.ndim(k) == 0:
        return (int(k),) + (0,) * (ndim - 1)
    return tuple(int(i) for i in k)


def sup_on_compact(F, ctx: EvalContext, K: CompactRegion, k=0) -> SupResult:
    """max |D^k F(phi_eps, x)| over the eps-tied sample grid of K."""
    k = _as_k(k, ctx.ndim)
    expr = Partial(k, F) if any(k) else F
    grid = K.grid(ctx.eps)
    vals = evaluate(expr, ctx, grid)
    n = grid.shape[-1]
    return SupResult(float(np.max(np.abs(vals))), ctx.eps, ctx.eps / K.step_divisor, n, k)


def scan_sup(F, mollifier, grid: EpsGrid, K: CompactRegion, k=0, quad_tol=None):
    """[(eps, sup)] along the grid for one mollifier."""
    out = []
    for eps in grid.values():
        ctx = EvalContext(mollifier, float(eps), quad_tol)
        out.append((float(eps), sup_on_compact(F, ctx, K, k).value))
    return out


# ---------------------------------------------------------------------------
# classifiers


def _default_moderate_mollifiers():
    base = cached_mollifier(2, True)
    return (base, base.with_support(0.8), base.with_support(0.6))


@dataclass(frozen=True)
class ModerateRow:
    k: tuple
    n_certified: object  # int or None
    slopes: tuple  # per mollifier
    residuals: tuple
    mollifiers: tuple  # labels


@dataclass(frozen=True)
class ModerateReport:
    rows: tuple
    grid: EpsGrid
    region: CompactRegion
    scan_rows: tuple = field(default=(), repr=False)

    @property
    def certified(self) -> bool:
        return all(r.n_certified is not None for r in self.rows)

    def n_for(self, k) -> int:
        for r in self.rows:
            if r.k == k or (len(r.k) == 1 and r.k[0] == k):
                return r.n_certified
        raise KeyError(k)

    @property
    def verdicts(self):
        return tuple(
            GrowsAtMost(r.n_certified) if r.n_certified is not None else Inconclusive("dirty fit")
            for r in self.rows
        )


def _k_range(k_max, ndim):
    if ndim == 1:
        return [(k,) for k in range(k_max + 1)]
    out = []
    for total in range(k_max + 1):
        for k1 in range(total + 1):
            out.append((k1, total - k1))
    return out


def check_moderate_rn(F, K: CompactRegion, k_max: int = 2, grid: EpsGrid | None = None,
                      mollifiers=None) -> ModerateReport:
    """Certify growth bounds sup|D^k F| = O(eps^-N) per derivative index.

    N is taken as the worst margin-rounded slope over the sampled
    mollifiers; the per-mollifier slopes are reported so that mollifier
    independence (for fixed k) is visible.
    """
    grid = grid or EpsGrid()
    if mollifiers is None:
        mollifiers = _default_moderate_mollifiers()
    ndim = K.ndim
    rows = []
    scans = []
    for k in _k_range(k_max, ndim):
        slopes, residuals = [], []
        n_cert = 0
        for m in mollifiers:
            samples = scan_sup(F, m, grid, K, k)
            scans.extend((e, k, v, m.order_q) for e, v in samples)
            est = estimate_order(samples)
            slopes.append(est.slope)
            residuals.append(est.max_residual)
            bound = est.growth_bound()
            if bound is None or n_cert is None:
                n_cert = None
            else:
                n_cert = max(n_cert, bound)
        rows.append(ModerateRow(k, n_cert, tuple(slopes), tuple(residuals),
                                tuple(repr(m) for m in mollifiers)))
    return ModerateReport(tuple(rows), grid, K, tuple(scans))


@dataclass(frozen=True)
class NegligibleRow:
    m: int
    k: tuple
    witness_q: object  # int or None
    slope: float
    residual: float


@dataclass(frozen=True)
class NegligibilityReport:
    rows: tuple
    grid: EpsGrid
    region: CompactRegion
    q_schedule: tuple
    derivative_free: bool = False
    scan_rows: tuple = field(default=(), repr=False)

    @property
    def certified(self) -> bool:
        return all(r.witness_q is not None for r in self.rows)

    def witness(self, m: int, k=0):
        k = k if isinstance(k, tuple) else (k,)
        for r in self.rows:
            if r.m == m and r.k == k:
                return r.witness_q
        raise KeyError((m, k))


def check_negligible_rn(F, K: CompactRegion, k_max: int = 0, m_target: int = 4,
                        q_schedule=(0, 1, 2, 3, 4, 5), grid: EpsGrid | None = None) -> NegligibilityReport:
    """Search the strict-mollifier schedule for decay witnesses.

    Implements the "for every m there is a q" quantifier order: each target
    rate m (and each derivative index) gets its own witnessing mollifier
    order from the schedule, or a failure row.
    """
    if list(q_schedule) != sorted(q_schedule):
        raise ValueError("q_schedule must be increasing")
    grid = grid or EpsGrid()
    ndim = K.ndim
    rows = []
    scans = []
    cache = {}
    for m in range(1, m_target + 1):
        for k in _k_range(k_max, ndim):
            witness, w_slope, w_resid = None, math.nan, math.nan
            for q in q_schedule:
                key = (q, k)
                if key not in cache:
                    moll = cached_mollifier(q, True)
                    samples = scan_sup(F, moll, grid, K, k)
                    scans.extend((e, k, v, q) for e, v in samples)
                    cache[key] = estimate_order(samples)
                est = cache[key]
                if est.certifies_decay(m):
                    witness, w_slope, w_resid = q, est.slope, est.max_residual
                    break
                w_slope, w_resid = est.slope, est.max_residual
            rows.append(NegligibleRow(m, k, witness, float(w_slope), float(w_resid)))
    return NegligibilityReport(tuple(rows), grid, K, tuple(q_schedule),
                               scan_rows=tuple(scans))


def noderiv_shortcut(F, K: CompactRegion, m_target: int, q_schedule,
                     moderate_report: ModerateReport | None,
                     grid: EpsGrid | None = None) -> NegligibilityReport:
    """Derivative-free negligibility test for pre-certified moderate F.

    Runs the k = 0 scan only; the derivative scans are implied for moderate
    functions, so the report carries the full negligible verdict.  Refuses
    without a passing moderateness certificate.
    """
    if moderate_report is None or not moderate_report.certified:
        raise MissingModeratenessError(
            "derivative-free negligibility needs a moderateness certificate"
        )
    rep = check_negligible_rn(F, K, k_max=0, m_target=m_target,
                              q_schedule=q_schedule, grid=grid)
    return NegligibilityReport(rep.rows, rep.grid, rep.region, rep.q_schedule,
                               derivative_free=True, scan_rows=rep.scan_rows)
