"""Compactly supported mollifiers with certified vanishing moments.

A mollifier is an ansatz p(t) * b(t) where b is the canonical bump profile
exp(-1/(1-t^2)) and p is expanded in the Legendre basis (monomial moment
matrices go ill-conditioned past order ~6).  The moment system is solved in
extended precision against the package's fixed quadrature rule, so discrete
moments of the result vanish at ~1e-18 and every pairing sharing that rule
sees the certified orders exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import legendre as _leg

from .functions import MAX_DERIV, UnsupportedOrderError, _check_order
from .quadrature import LD, FIXED_PANELS, fixed_rule, integrate

MAX_ORDER_Q = 12

#: target for the pinned (q+1)-th moment of strict mollifiers
STRICT_MOMENT = 0.1

#: acceptable residual of the moment system after the solve
MOMENT_RESIDUAL_TOL = 1e-9


class MollifierConstructionError(RuntimeError):
    """The moment system could not be solved to tolerance."""


class BumpProfile:
    """The bump b(t) = exp(-1/(1-t^2)) for |t| < 1, identically 0 outside.

    k-th derivatives use the recurrence b^(k) = p_k(t)/(1-t^2)^(2k) * b(t)
    with p_{k+1} = p_k'(1-t^2)^2 + (4kt(1-t^2) - 2t) p_k, so evaluation is
    exact rational-prefactor arithmetic, never finite differences.  Values
    and all derivatives are exactly 0 for |t| >= 1.
    """

    def __init__(self, max_order: int = 2 * MAX_DERIV):
        self.max_order = max_order
        self._prefactors = self._build_prefactors(max_order)

    @staticmethod
    def _build_prefactors(max_order):
        # polynomial coefficients in ascending powers of t
        one_minus_t2 = np.array([1, 0, -1], dtype=LD)
        u2 = np.polynomial.polynomial.polymul(one_minus_t2, one_minus_t2)
        prefactors = [np.array([1], dtype=LD)]
        for k in range(max_order):
            pk = prefactors[-1]
            dpk = pk[1:] * np.arange(1, len(pk), dtype=LD) if len(pk) > 1 else np.zeros(1, dtype=LD)
            term1 = np.polynomial.polynomial.polymul(dpk, u2)
            lin = np.polynomial.polynomial.polymul(np.array([0, 4 * k], dtype=LD), one_minus_t2)
            lin = np.polynomial.polynomial.polyadd(lin, np.array([0, -2], dtype=LD))
            term2 = np.polynomial.polynomial.polymul(lin, pk)
            prefactors.append(np.polynomial.polynomial.polyadd(term1, term2).astype(LD))
        return prefactors

    def __call__(self, t, k: int = 0):
        if k > self.max_order:
            raise UnsupportedOrderError(
                f"bump derivative order {k} exceeds cached order {self.max_order}"
            )
        arr = np.atleast_1d(np.asarray(t, dtype=LD))
        out = np.zeros(arr.shape, dtype=LD)
        inside = np.abs(arr) < 1
        if np.any(inside):
            ti = arr[inside]
            u = 1 - ti * ti
            e = np.exp(-1 / u)
            # where exp underflows to 0 the product is 0 regardless of prefactor
            live = e > 0
            if np.any(live):
                tl, ul, el = ti[live], u[live], e[live]
                val = np.polynomial.polynomial.polyval(tl, self._prefactors[k])
                vals = val / ul ** (2 * k) * el if k else el
                tmp = np.zeros(ti.shape, dtype=LD)
                tmp[live] = vals
                out[inside] = tmp
        return out if np.ndim(t) else out[0]

    support = (-1.0, 1.0)


@lru_cache(maxsize=1)
def bump_profile() -> BumpProfile:
    return BumpProfile()


def _lu_solve_ld(A, rhs):
    """Partial-pivot LU solve in longdouble with one refinement step."""
    A = np.array(A, dtype=LD)
    n = len(rhs)
    M = A.copy()
    piv = np.arange(n)
    for k in range(n):
        i = k + int(np.argmax(np.abs(M[k:, k])))
        if M[i, k] == 0:
            raise MollifierConstructionError("singular moment matrix")
        if i != k:
            M[[k, i]] = M[[i, k]]
            piv[[k, i]] = piv[[i, k]]
        M[k + 1:, k] /= M[k, k]
        M[k + 1:, k + 1:] -= np.outer(M[k + 1:, k], M[k, k + 1:])

    def solve(b):
        y = b[piv].astype(LD)
        for k in range(n):
            y[k] -= M[k, :k] @ y[:k]
        for k in range(n - 1, -1, -1):
            y[k] = (y[k] - M[k, k + 1:] @ y[k + 1:]) / M[k, k]
        return y

    x = solve(np.asarray(rhs, dtype=LD))
    x = x + solve(np.asarray(rhs, dtype=LD) - A @ x)
    return x


class Mollifier1D:
    """A mollifier p(t)*b(t) with moments 1..q certified to vanish.

    Immutable after construction; the quadrature rule, profile values at the
    rule nodes and the moment table are cached eagerly, so instances are safe
    to share across threads.

    ``support_scale`` shrinks the support to [-s, s] via t -> phi(t/s)/s,
    which preserves the vanishing-moment orders exactly (moments pick up a
    factor s^i) and is how same-order mollifier variants are produced.
    """

    def __init__(self, coeffs, order_q: int, strict: bool, support_scale: float = 1.0):
        self.coeffs = np.asarray(coeffs, dtype=LD)
        self.order_q = int(order_q)
        self.strict = bool(strict)
        self.support_scale = float(support_scale)
        self.bump = bump_profile()
        self.rule = fixed_rule(FIXED_PANELS)
        self._node_values = {}
        self._base_at = {}
        # eager caches: profile and first derivative at the rule nodes
        self.base_nodes = self.rule.nodes
        self._base_at[0] = self._eval_base(self.base_nodes, 0)
        self.moment_table = tuple(
            float(self.discrete_moment(i)) for i in range(self.order_q + 3)
        )

    # -- base-profile evaluation (support [-1, 1], unscaled) ---------------

    def _eval_base(self, t, k):
        """k-th derivative of p*b on the unit support, Leibniz over p and b."""
        t = np.asarray(t, dtype=LD)
        out = np.zeros(np.shape(t), dtype=LD)
        series = self.coeffs
        for j in range(k + 1):
            pj = _leg.legval(t, series) if len(series) else np.zeros(np.shape(t), dtype=LD)
            out = out + comb(k, j) * pj * self.bump(t, k - j)
            series = _leg.legder(series) if len(series) > 1 else np.zeros(1, dtype=LD)
        return out

    def base_at_nodes(self, k: int):
        """Cached base-profile derivative values at the fixed rule nodes."""
        if k not in self._base_at:
            self._base_at[k] = self._eval_base(self.base_nodes, k)
        return self._base_at[k]

    # -- public evaluation --------------------------------------------------

    @property
    def support_radius(self) -> float:
        return self.support_scale

    @property
    def support(self):
        return (-self.support_scale, self.support_scale)

    def __call__(self, t, k: int = 0):
        """phi^(k)(t), exactly 0 outside [-s, s]."""
        _check_order(k)
        s = LD(self.support_scale)
        t = np.asarray(t, dtype=LD)
        return self._eval_base(t / s, k) / s ** (k + 1)

    def pairing_nodes(self):
        """Nodes t_i of the shared rule, mapped into this support."""
        return self.base_nodes * LD(self.support_scale)

    def pairing_weights(self, k: int = 0):
        """Weights w_i phi^(k)(t_i) such that sum w_i g(t_i) = int g phi^(k).

        Pairings computed with these weights see the solved discrete moments
        (residuals ~1e-18), which is what pins the asymptotic orders.
        """
        _check_order(k)
        key = ("w", k)
        if key not in self._node_values:
            s = LD(self.support_scale)
            self._node_values[key] = self.rule.weights * self.base_at_nodes(k) / s**k
        return self._node_values[key]

    # -- moments ------------------------------------------------------------

    def discrete_moment(self, i: int):
        """i-th moment against the shared rule (the certified quantity)."""
        s = LD(self.support_scale)
        return np.sum(self.pairing_weights(0) * (self.base_nodes * s) ** i)

    def moment(self, i: int):
        return float(self.discrete_moment(i))

    def norm_l1(self) -> float:
        return float(np.sum(np.abs(self.pairing_weights(0))))

    def norm_sup(self, k: int = 0) -> float:
        # dense sampling; the profile is smooth so this is plenty
        t = np.linspace(-1, 1, 4001, dtype=LD) * LD(self.support_scale)
        return float(np.max(np.abs(self(t, k))))

    def with_support(self, radius: float) -> "Mollifier1D":
        """Same-order variant living on [-radius, radius]."""
        if not 0 < radius <= 1:
            raise ValueError("support radius must lie in (0, 1]")
        return Mollifier1D(self.coeffs, self.order_q, self.strict, support_scale=radius)

    def __repr__(self):
        tag = "strict" if self.strict else "plain"
        return f"Mollifier1D(q={self.order_q}, {tag}, R={self.support_scale})"


def build_mollifier(q: int, strict: bool = False) -> Mollifier1D:
    """Construct a mollifier of vanishing-moment order q.

    Solves the square moment system over the Legendre basis P_0..P_d against
    the fixed rule: moment 0 equals 1, moments 1..q vanish, and with
    ``strict`` the (q+1)-th moment is pinned to STRICT_MOMENT so the leading
    Taylor remainder term cannot degenerate.  Deterministic.
    """
    if q < 0:
        raise ValueError("order q must be nonnegative")
    if q > MAX_ORDER_Q:
        raise UnsupportedOrderError(
            f"mollifier order {q} unsupported (conditioning guard at {MAX_ORDER_Q})"
        )
    rule = fixed_rule(FIXED_PANELS)
    bn = bump_profile()(rule.nodes)
    n_constraints = q + 2 if strict else q + 1
    basis = np.eye(n_constraints, dtype=LD)
    legvals = np.stack([_leg.legval(rule.nodes, basis[j]) for j in range(n_constraints)])
    A = np.zeros((n_constraints, n_constraints), dtype=LD)
    for i in range(n_constraints):
        A[i] = (rule.weights * rule.nodes**i * bn) @ legvals.T
    rhs = np.zeros(n_constraints, dtype=LD)
    rhs[0] = 1
    if strict:
        rhs[q + 1] = LD(STRICT_MOMENT)
    coeffs = _lu_solve_ld(A, rhs)
    residual = float(np.max(np.abs(A @ coeffs - rhs)))
    if residual > MOMENT_RESIDUAL_TOL:
        raise MollifierConstructionError(
            f"moment system residual {residual:.3e} exceeds {MOMENT_RESIDUAL_TOL:.1e} at q={q}"
        )
    return Mollifier1D(coeffs, q, strict)


@lru_cache(maxsize=64)
def cached_mollifier(q: int, strict: bool = True) -> Mollifier1D:
    """Memoized :func:`build_mollifier` (construction is deterministic)."""
    return build_mollifier(q, strict)


def moments(m: Mollifier1D, max_order: int, tol: float = 1e-12):
    """Moments 0..max_order by independent adaptive quadrature.

    This is the verification path: it does not reuse the construction rule.
    """
    if max_order < 0:
        raise ValueError("max_order must be nonnegative")
    lo, hi = m.support
    return [float(integrate(lambda t, i=i: t**i * m(t), lo, hi, tol=tol))
            for i in range(max_order + 1)]


class MollifierND:
    """Tensor product of 1D mollifiers; dimensions 1 and 2 are supported."""

    def __init__(self, factors):
        factors = tuple(factors)
        if not 1 <= len(factors) <= 2:
            raise ValueError("only dimensions 1 and 2 are supported")
        self.factors = factors
        self.ndim = len(factors)

    @property
    def order_q(self) -> int:
        return min(f.order_q for f in self.factors)

    @property
    def support_radius(self) -> float:
        return max(f.support_radius for f in self.factors)

    def __call__(self, points, k=None):
        """phi^(k) at points of shape (ndim, m); k is a multi-index."""
        if k is None:
            k = (0,) * self.ndim
        pts = np.atleast_2d(np.asarray(points, dtype=LD))
        out = np.ones(pts.shape[1], dtype=LD)
        for axis, (f, ka) in enumerate(zip(self.factors, k)):
            out = out * f(pts[axis], ka)
        return out

    def moment(self, multi) -> float:
        out = 1.0
        for f, i in zip(self.factors, multi):
            out *= f.moment(i)
        return out


def as_nd(m) -> MollifierND:
    if isinstance(m, MollifierND):
        return m
    return MollifierND((m,))


@dataclass(frozen=True)
class ScaledTranslatedKernel:
    """The scaled translated kernel y -> eps^-n phi((y - center)/eps).

    Acts as the smooth compactly supported argument of distribution
    pairings; derivative evaluation follows the scaling law
    d^k kernel = eps^(-n-|k|) phi^(k)((y - center)/eps).
    """

    base: MollifierND
    eps: float
    center: tuple

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if len(self.center) != self.base.ndim:
            raise ValueError("center dimension mismatch")

    @property
    def ndim(self):
        return self.base.ndim

    @property
    def support_radius(self) -> float:
        return self.eps * self.base.support_radius

    def support_ball(self):
        r = self.support_radius
        return tuple((c - r, c + r) for c in self.center)

    def value(self, y, k=None):
        """d^k of the kernel at points y (shape (ndim, m) or scalar in 1D)."""
        n = self.ndim
        if k is None:
            k = (0,) * n
        if sum(k) > MAX_DERIV:
            raise UnsupportedOrderError(f"kernel derivative order {sum(k)} > {MAX_DERIV}")
        eps = LD(self.eps)
        if n == 1:
            y = np.asarray(y, dtype=LD)
            t = (y - LD(self.center[0])) / eps
            return self.base.factors[0](t, k[0]) / eps ** (1 + sum(k))
        pts = np.atleast_2d(np.asarray(y, dtype=LD))
        t = (pts - np.array(self.center, dtype=LD)[:, None]) / eps
        return self.base(t, k) / eps ** (n + sum(k))

    def mass(self) -> float:
        """Integral over R^n; equals 1 by the scaling (quadrature check)."""
        eps = LD(self.eps)
        out = 1.0
        for f, c, (lo, hi) in zip(self.base.factors, self.center, self.support_ball()):
            out *= float(integrate(
                lambda y, f=f, c=c: f((np.asarray(y, dtype=LD) - LD(c)) / eps) / eps,
                lo, hi, tol=1e-12))
        return out


def kernel(base, eps: float, center=0.0) -> ScaledTranslatedKernel:
    base = as_nd(base)
    if np.ndim(center) == 0:
        if base.ndim != 1:
            raise ValueError("scalar center only valid in dimension 1")
        center = (float(center),)
    else:
        center = tuple(float(c) for c in center)
    return ScaledTranslatedKernel(base, float(eps), center)


def kernel_derivative(k: ScaledTranslatedKernel, multi_index):
    """Evaluation procedure for the multi_index derivative of the kernel."""
    multi = tuple(int(i) for i in np.atleast_1d(multi_index))
    if sum(multi) > MAX_DERIV:
        raise UnsupportedOrderError(f"derivative order {sum(multi)} > {MAX_DERIV}")

    def proc(y):
        return k.value(y, multi)

    return proc
