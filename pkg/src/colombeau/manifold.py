"""Smoothing kernels, delta nets and generalized Lie derivatives on the circle.

The circle with the round metric is the smallest compact manifold carrying
the full structure: distributions pair against n-forms, translated scaled
mollifiers become parameterized families of 1-forms, and the two Lie
derivatives (ordinary: differentiate F(omega) in x for fixed omega;
generalized: include the kernel variation through the differential dF)
separate exactly as in the flat theory.

Kernel families are kept symbolic: every family is a sum of terms
c(x) d(y) D_x^j D_y^i [base kernel], and all three kernel Lie derivatives,
perturbations (differences of nets) and x-derivative chains stay inside
this representation, so pairings with delta-type distributions are always
closed-form kernel evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .association import (
    AssociatedTo,
    AssociatedToZero,
    AssociationCase,
    AssociationReport,
    Divergent,
    richardson_limit,
    _dyadic_eps,
)
from .asymptotics import (
    EpsGrid,
    Inconclusive,
    OrderEstimate,
    RESIDUAL_MAX,
    SLOPE_MARGIN,
    estimate_order,
)
from .distributions import (
    DeltaAt,
    Derivative,
    Distribution,
    LinComb,
    Regular,
    SmoothMultiple,
    VectorField,
)
from .functions import SmoothFn, fn_product, fn_sum
from .mollifier import Mollifier1D, cached_mollifier
from .quadrature import LD, default_tol, integrate

TWO_PI = 2 * math.pi


def wrap_angle(theta):
    """Reduce into [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=LD) + LD(math.pi), LD(TWO_PI)) - LD(math.pi)


def canonical_angle(theta):
    """Reduce into [0, 2 pi)."""
    return float(np.mod(theta, TWO_PI))


def circle_distance(a, b) -> float:
    """Geodesic distance under the round metric, at most pi."""
    return float(np.abs(wrap_angle(np.asarray(a) - np.asarray(b))))


@dataclass(frozen=True)
class CirclePoint:
    angle: float

    @property
    def canonical(self) -> float:
        return canonical_angle(self.angle)

    def distance(self, other: "CirclePoint") -> float:
        return circle_distance(self.angle, other.angle)


@dataclass(frozen=True)
class NFormS1:
    """A 1-form g(theta) dtheta with smooth 2 pi-periodic density."""

    density: SmoothFn
    name: str = ""

    def total(self) -> float:
        return float(integrate(lambda t: self.density(t), 0.0, TWO_PI, tol=1e-12))


def pair_form(u: Distribution, form: NFormS1, tol: float | None = None) -> float:
    """<u, g dtheta> on the circle."""
    return float(_pair_form(u, form.density, tol))


def _pair_form(u, g, tol):
    if isinstance(u, DeltaAt):
        return g(np.asarray([u.point[0]], dtype=LD))[0]
    if isinstance(u, Derivative):
        l = u.index[0]
        return (-1) ** l * _pair_form(u.inner, g.deriv(l), tol)
    if isinstance(u, SmoothMultiple):
        return _pair_form(u.inner, fn_product(u.factor, g), tol)
    if isinstance(u, LinComb):
        return sum(LD(w) * _pair_form(t, g, tol) for w, t in u.terms)
    if isinstance(u, Regular):
        h = u.density
        return integrate(lambda t: h(t) * g(t), 0.0, TWO_PI,
                         tol=tol or default_tol(), breakpoints=h.breakpoints)
    raise TypeError(f"cannot pair {type(u).__name__} on the circle")


def lie_derivative_dist_s1(u: Distribution, X: VectorField) -> Distribution:
    """L_X u on the circle: <L_X u, nu> = -<u, L_X nu> for 1-forms nu."""
    a = X.components[0]
    return SmoothMultiple(a, Derivative((1,), u))


# ---------------------------------------------------------------------------
# kernel families


@dataclass(frozen=True)
class KTerm:
    """weight * c(x) d(y) * D_x^j D_y^i [eps^-1 phi(wrap(y - x)/eps)].

    ``cx`` and ``dy`` are smooth periodic coefficient functions (None means
    the constant 1); the base-kernel derivative obeys
    D_x^j D_y^i K = (-1)^j eps^(-1-j-i) phi^(j+i)(wrap(y - x)/eps).
    """

    mollifier: Mollifier1D
    j: int = 0
    i: int = 0
    cx: SmoothFn | None = None
    dy: SmoothFn | None = None
    weight: float = 1.0


class KernelFamily:
    """A finite sum of KTerms; closed under all transforms used here."""

    def __init__(self, terms):
        self.terms = tuple(terms)

    @classmethod
    def base(cls, mollifier: Mollifier1D, weight: float = 1.0):
        return cls((KTerm(mollifier, weight=weight),))

    def __add__(self, other):
        return KernelFamily(self.terms + other.terms)

    def scaled(self, w: float):
        return KernelFamily(tuple(
            KTerm(t.mollifier, t.j, t.i, t.cx, t.dy, t.weight * w) for t in self.terms
        ))

    @property
    def support_radius(self) -> float:
        return max(t.mollifier.support_radius for t in self.terms)

    # -- transforms ---------------------------------------------------------

    def x_deriv(self, order: int = 1) -> "KernelFamily":
        """d/dx applied `order` times (product rule over c(x) and the base)."""
        fam = self
        for _ in range(order):
            out = []
            for t in fam.terms:
                if t.cx is not None:
                    out.append(KTerm(t.mollifier, t.j, t.i, t.cx.deriv(1), t.dy, t.weight))
                out.append(KTerm(t.mollifier, t.j + 1, t.i, t.cx, t.dy, t.weight))
            fam = KernelFamily(out)
        return fam

    def y_deriv(self, order: int = 1) -> "KernelFamily":
        """d/dy applied termwise (product rule over d(y) and the base)."""
        fam = self
        for _ in range(order):
            out = []
            for t in fam.terms:
                if t.dy is not None:
                    out.append(KTerm(t.mollifier, t.j, t.i, t.cx, t.dy.deriv(1), t.weight))
                out.append(KTerm(t.mollifier, t.j, t.i + 1, t.cx, t.dy, t.weight))
            fam = KernelFamily(out)
        return fam

    def multiply_y(self, g: SmoothFn) -> "KernelFamily":
        return KernelFamily(tuple(
            KTerm(t.mollifier, t.j, t.i, t.cx,
                  g if t.dy is None else fn_product(t.dy, g), t.weight)
            for t in self.terms
        ))

    def lie_x(self, X: VectorField) -> "KernelFamily":
        """Lie derivative on the parameter slot: a(x) d/dx of the family."""
        a = X.components[0]
        out = []
        for t in self.terms:
            if t.cx is not None:
                out.append(KTerm(t.mollifier, t.j, t.i,
                                 fn_product(a, t.cx.deriv(1)), t.dy, t.weight))
                bumped = fn_product(a, t.cx)
            else:
                bumped = a
            out.append(KTerm(t.mollifier, t.j + 1, t.i, bumped, t.dy, t.weight))
        return KernelFamily(out)

    def lie_y(self, X: VectorField) -> "KernelFamily":
        """Lie derivative of the 1-form slot: density rho -> (a rho)'."""
        a = X.components[0]
        da = a.deriv(1)
        out = []
        for t in self.terms:
            dy = t.dy
            # a * rho' terms
            if dy is not None:
                out.append(KTerm(t.mollifier, t.j, t.i, t.cx, fn_product(a, dy.deriv(1)), t.weight))
                out.append(KTerm(t.mollifier, t.j, t.i + 1, t.cx, fn_product(a, dy), t.weight))
                out.append(KTerm(t.mollifier, t.j, t.i, t.cx, fn_product(da, dy), t.weight))
            else:
                out.append(KTerm(t.mollifier, t.j, t.i + 1, t.cx, a, t.weight))
                out.append(KTerm(t.mollifier, t.j, t.i, t.cx, da, t.weight))
        return KernelFamily(out)

    def lie_sk(self, X: VectorField) -> "KernelFamily":
        """Geometric kernel Lie derivative: both slots, additive by build."""
        return self.lie_x(X) + self.lie_y(X)

    # -- evaluation ---------------------------------------------------------

    def density(self, x, eps: float, y, y_order: int = 0):
        """Density of the family's form at (x, y); broadcasts over x or y."""
        eps = LD(eps)
        x = np.asarray(x, dtype=LD)
        y = np.asarray(y, dtype=LD)
        out = np.zeros(np.broadcast(x, y).shape, dtype=LD)
        for t in self.terms:
            if t.dy is None:
                contrib = self._base(t, x, eps, y, t.j, t.i + y_order)
            else:
                contrib = np.zeros(np.broadcast(x, y).shape, dtype=LD)
                for s in range(y_order + 1):
                    contrib = contrib + comb(y_order, s) * t.dy(y, s) * \
                        self._base(t, x, eps, y, t.j, t.i + y_order - s)
            if t.cx is not None:
                contrib = contrib * t.cx(x, 0)
            out = out + t.weight * contrib
        return out

    @staticmethod
    def _base(t, x, eps, y, j, i):
        arg = wrap_angle(y - x) / eps
        return (-1) ** j * t.mollifier(arg, j + i) / eps ** (1 + j + i)


# ---------------------------------------------------------------------------
# delta nets


class SmoothingKernelNet:
    """Transported-mollifier net: omega_{x,eps} has density
    eps^-1 phi(wrap(y - x)/eps) dtheta.

    Condition (1) (shrinking support) holds exactly with radius
    eps * support_radius once that is below pi; larger eps leave the net
    defined but flagged, and verification refuses those entries.
    """

    def __init__(self, generator: Mollifier1D, label: str | None = None):
        self.generator = generator
        self.label = label or f"net[{generator!r}]"

    @property
    def support_radius(self) -> float:
        return self.generator.support_radius

    def mollifier_at(self, eps: float) -> Mollifier1D:
        return self.generator

    def family_at(self, eps: float) -> KernelFamily:
        return KernelFamily.base(self.mollifier_at(eps))

    def order_at(self, eps: float) -> int:
        return self.mollifier_at(eps).order_q

    def flagged(self, eps: float) -> bool:
        return eps * self.support_radius >= math.pi

    def density(self, x, eps: float, y):
        return self.family_at(eps).density(x, eps, y)

    def __repr__(self):
        return self.label


class EscalatingNet(SmoothingKernelNet):
    """Grid-indexed net with moment order growing without bound.

    On the dyadic grid eps_j = 2^-j the generator has strict order
    q(eps_j) = min(j, cap); off-grid epsilons are rejected, which is all a
    desk-scale scan needs.
    """

    def __init__(self, cap: int = 8, label: str = "net[escalating]"):
        self.cap = cap
        self.label = label

    @property
    def support_radius(self) -> float:
        return 1.0

    def grid(self, count: int = 10):
        return [2.0 ** (-j) for j in range(1, count + 1)]

    def order_for(self, eps: float) -> int:
        j = round(-math.log2(eps))
        if abs(eps - 2.0 ** (-j)) > 1e-12 * eps:
            raise ValueError(f"escalating net is grid-indexed; eps={eps} is off-grid")
        return min(j, self.cap)

    def mollifier_at(self, eps: float) -> Mollifier1D:
        return cached_mollifier(self.order_for(eps), True)

    def order_at(self, eps: float) -> int:
        return self.order_for(eps)


def build_delta_net(generator) -> SmoothingKernelNet:
    """A delta net from a fixed-order mollifier or the string 'escalating'."""
    if isinstance(generator, str):
        if generator != "escalating":
            raise ValueError("generator must be a mollifier or 'escalating'")
        return EscalatingNet()
    return SmoothingKernelNet(generator)


class KernelPerturbation:
    """Difference of two delta nets: an admissible direction for dF.

    Total mass is 0 for every (x, eps); adding it to any delta net
    preserves the net conditions with orders capped by the weakest
    generator involved.
    """

    def __init__(self, net1: SmoothingKernelNet, net2: SmoothingKernelNet, label=None):
        self.net1 = net1
        self.net2 = net2
        self.label = label or f"{net1!r}-{net2!r}"

    @property
    def support_radius(self):
        return max(self.net1.support_radius, self.net2.support_radius)

    def family_at(self, eps: float) -> KernelFamily:
        return self.net1.family_at(eps) + self.net2.family_at(eps).scaled(-1.0)

    def density(self, x, eps, y):
        return self.family_at(eps).density(x, eps, y)

    def __repr__(self):
        return self.label


class PerturbedNet(SmoothingKernelNet):
    """A delta net shifted by a perturbation (for closure checks)."""

    def __init__(self, net: SmoothingKernelNet, pert: KernelPerturbation):
        self.net = net
        self.pert = pert
        self.label = f"{net!r}+({pert!r})"

    @property
    def support_radius(self):
        return max(self.net.support_radius, self.pert.support_radius)

    def mollifier_at(self, eps):
        return self.net.mollifier_at(eps)

    def order_at(self, eps):
        return self.net.order_at(eps)

    def family_at(self, eps: float) -> KernelFamily:
        return self.net.family_at(eps) + self.pert.family_at(eps)


# ---------------------------------------------------------------------------
# pairing distributions against kernel families


def pair_net(u: Distribution, fam: KernelFamily, eps: float, xs):
    """<u, fam_x> as a function of x (vectorized, longdouble)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=LD))
    if isinstance(u, DeltaAt):
        return fam.density(xs, eps, LD(u.point[0]))
    if isinstance(u, Derivative):
        l = u.index[0]
        return (-1) ** l * pair_net(u.inner, fam.y_deriv(l), eps, xs)
    if isinstance(u, SmoothMultiple):
        return pair_net(u.inner, fam.multiply_y(u.factor), eps, xs)
    if isinstance(u, LinComb):
        out = np.zeros(xs.shape, dtype=LD)
        for w, t in u.terms:
            out = out + LD(w) * pair_net(t, fam, eps, xs)
        return out
    if isinstance(u, Regular):
        return _pair_net_regular(u, fam, eps, xs)
    raise TypeError(f"cannot pair {type(u).__name__} against a kernel family")


def _pair_net_regular(u: Regular, fam: KernelFamily, eps: float, xs):
    """int h(y) fam_x(y) dy via each term's certified rule.

    Substituting y = x + eps t turns each term into a fixed-rule pairing of
    h (and the term's y-coefficient) against phi^(j+i); smooth periodic
    densities only.
    """
    h = u.density
    if h.breakpoints:
        raise NotImplementedError("circle regular parts must be smooth")
    eps_ld = LD(eps)
    out = np.zeros(xs.shape, dtype=LD)
    for t in fam.terms:
        m = t.mollifier
        nodes = m.pairing_nodes()
        weights = m.pairing_weights(t.j + t.i)
        ys = xs[:, None] + eps_ld * nodes[None, :]
        gv = h(ys, 0)
        if t.dy is not None:
            gv = gv * t.dy(ys, 0)
        vals = (gv @ weights) * ((-1) ** t.j / eps_ld ** (t.j + t.i))
        if t.cx is not None:
            vals = vals * t.cx(xs, 0)
        out = out + t.weight * vals
    return out


# ---------------------------------------------------------------------------
# expression trees on the circle


class GenFuncExprM:
    """Base node; same algebra as the flat trees."""

    def _coerce(self, other):
        if isinstance(other, GenFuncExprM):
            return other
        return ConstM(float(other))

    def __add__(self, other):
        return SumM((self, self._coerce(other)))

    def __mul__(self, other):
        return ProductM(self, self._coerce(other))

    def __sub__(self, other):
        return SumM((self, ProductM(ConstM(-1.0), self._coerce(other))))

    def __neg__(self):
        return ProductM(ConstM(-1.0), self)


from dataclasses import dataclass as _dc


@_dc(frozen=True)
class IotaM(GenFuncExprM):
    dist: Distribution


@_dc(frozen=True)
class SigmaM(GenFuncExprM):
    fn: SmoothFn


@_dc(frozen=True)
class IotaMinusSigmaM(GenFuncExprM):
    fn: SmoothFn


@_dc(frozen=True)
class ConstM(GenFuncExprM):
    value: float


@_dc(frozen=True)
class SumM(GenFuncExprM):
    children: tuple


@_dc(frozen=True)
class ProductM(GenFuncExprM):
    left: GenFuncExprM
    right: GenFuncExprM


@_dc(frozen=True)
class OrdinaryLie(GenFuncExprM):
    """Fix omega, differentiate x -> F(omega)(x) along X.

    This is simultaneously the covariant derivative of the scalar field:
    it is C-infinity-linear in X and commutes with the embedding only at
    the level of association.
    """

    field_: VectorField
    child: GenFuncExprM


@_dc(frozen=True)
class GeneralizedLie(GenFuncExprM):
    """The flow-pullback derivative: -dF(omega)(L^SK_X omega) + L_X(F(omega))."""

    field_: VectorField
    child: GenFuncExprM


@_dc(frozen=True)
class PullbackM(GenFuncExprM):
    mapping: object  # CircleDiffeo
    child: GenFuncExprM


class UnsupportedDifferentialError(TypeError):
    """dF requested outside the closed-form tree class."""


def iota_m(u) -> GenFuncExprM:
    if isinstance(u, SmoothFn):
        u = Regular(u)
    return IotaM(u)


def sigma_m(f: SmoothFn) -> GenFuncExprM:
    return SigmaM(f)


def iota_minus_sigma_m(f: SmoothFn) -> GenFuncExprM:
    return IotaMinusSigmaM(f)


def ordinary_lie(F: GenFuncExprM, X: VectorField) -> GenFuncExprM:
    return OrdinaryLie(X, F)


covariant_scalar = ordinary_lie


def generalized_lie(F: GenFuncExprM, X: VectorField) -> GenFuncExprM:
    return GeneralizedLie(X, F)


def pullback_circle(F: GenFuncExprM, mapping) -> GenFuncExprM:
    return PullbackM(mapping, F)


# ---------------------------------------------------------------------------
# evaluation


def evaluate_m(F: GenFuncExprM, net, eps: float, x, deriv: int = 0):
    """F(omega_eps)(x) (or its deriv-th x-derivative), float64 out."""
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=LD))
    vals = np.asarray(_eval_m(F, net, eps, xs, deriv), dtype=np.float64)
    return float(vals[0]) if scalar else vals


def _eval_m(F, net, eps, xs, r):
    if isinstance(F, ConstM):
        v = LD(F.value) if r == 0 else LD(0.0)
        return np.full(xs.shape, v)
    if isinstance(F, SigmaM):
        return F.fn(xs, r)
    if isinstance(F, IotaM):
        fam = net.family_at(eps).x_deriv(r) if r else net.family_at(eps)
        return pair_net(F.dist, fam, eps, xs)
    if isinstance(F, IotaMinusSigmaM):
        return _fused_difference_m(F.fn, net.mollifier_at(eps), eps, xs, r)
    if isinstance(F, SumM):
        out = np.zeros(xs.shape, dtype=LD)
        for c in F.children:
            out = out + _eval_m(c, net, eps, xs, r)
        return out
    if isinstance(F, ProductM):
        out = np.zeros(xs.shape, dtype=LD)
        for s in range(r + 1):
            out = out + comb(r, s) * _eval_m(F.left, net, eps, xs, s) * \
                _eval_m(F.right, net, eps, xs, r - s)
        return out
    if isinstance(F, OrdinaryLie):
        return _lie_term(F, net, eps, xs, r, _eval_m)
    if isinstance(F, GeneralizedLie):
        pert = net.family_at(eps).lie_sk(F.field_)
        first = _deval_m(F.child, net, pert, eps, xs, r)
        return -first + _lie_term(F, net, eps, xs, r, _eval_m)
    if isinstance(F, PullbackM):
        if r:
            raise UnsupportedDifferentialError("pullback chains support order 0 only")
        return _eval_pullback(F, net, eps, xs)
    raise TypeError(f"cannot evaluate node {type(F).__name__}")


def _lie_term(F, net, eps, xs, r, evaluator):
    """d^r [a(x) * (child x-derivative)] by Leibniz."""
    a = F.field_.components[0]
    out = np.zeros(xs.shape, dtype=LD)
    for s in range(r + 1):
        out = out + comb(r, s) * a(xs, s) * evaluator(F.child, net, eps, xs, r - s + 1)
    return out


def _fused_difference_m(fn, m, eps, xs, r):
    # unit-mass normalized, as in the flat fused difference
    eps_ld = LD(eps)
    nodes = m.pairing_nodes()
    weights = m.pairing_weights(0)
    h = eps_ld * nodes
    inc = fn.increment(xs[:, None], h[None, :], r)
    return inc @ weights


def devaluate_m(F: GenFuncExprM, net, perturbation, eps: float, x, deriv: int = 0):
    """Gateaux differential dF(omega_eps) in a perturbation direction.

    ``perturbation`` is a KernelPerturbation or a raw KernelFamily.  Only
    the linear-closure tree class has a closed-form differential; products
    raise UnsupportedDifferentialError (their scans run at j = 0, matching
    the restriction that embedded objects need differentials of order at
    most one).
    """
    fam = perturbation.family_at(eps) if hasattr(perturbation, "family_at") else perturbation
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=LD))
    vals = np.asarray(_deval_m(F, net, fam, eps, xs, deriv), dtype=np.float64)
    return float(vals[0]) if scalar else vals


def _deval_m(F, net, pert_fam, eps, xs, r):
    if isinstance(F, (ConstM, SigmaM)):
        return np.zeros(xs.shape, dtype=LD)
    if isinstance(F, IotaM):
        fam = pert_fam.x_deriv(r) if r else pert_fam
        return pair_net(F.dist, fam, eps, xs)
    if isinstance(F, IotaMinusSigmaM):
        # d of the iota part only; sigma carries no kernel dependence
        fam = pert_fam.x_deriv(r) if r else pert_fam
        return pair_net(Regular(F.fn), fam, eps, xs)
    if isinstance(F, SumM):
        out = np.zeros(xs.shape, dtype=LD)
        for c in F.children:
            out = out + _deval_m(c, net, pert_fam, eps, xs, r)
        return out
    if isinstance(F, OrdinaryLie):
        return _lie_term_d(F, net, pert_fam, eps, xs, r)
    if isinstance(F, GeneralizedLie):
        if not _is_linear(F.child):
            raise UnsupportedDifferentialError(
                "differential of a generalized Lie derivative needs a linear child"
            )
        inner = _deval_m(F.child, net, pert_fam.lie_sk(F.field_), eps, xs, r)
        return -inner + _lie_term_d(F, net, pert_fam, eps, xs, r)
    if isinstance(F, ProductM):
        raise UnsupportedDifferentialError(
            "products have no closed-form differential here; scan them at j=0"
        )
    raise UnsupportedDifferentialError(f"no differential for {type(F).__name__}")


def _lie_term_d(F, net, pert_fam, eps, xs, r):
    a = F.field_.components[0]
    out = np.zeros(xs.shape, dtype=LD)
    for s in range(r + 1):
        out = out + comb(r, s) * a(xs, s) * _deval_m(F.child, net, pert_fam, eps, xs, r - s + 1)
    return out


def _is_linear(F) -> bool:
    if isinstance(F, (IotaM, SigmaM, IotaMinusSigmaM, ConstM)):
        return True
    if isinstance(F, SumM):
        return all(_is_linear(c) for c in F.children)
    if isinstance(F, (OrdinaryLie, GeneralizedLie)):
        return _is_linear(F.child)
    return False


# ---------------------------------------------------------------------------
# circle diffeomorphisms and pullback evaluation


class CircleDiffeo:
    """Orientation-preserving circle diffeomorphism with explicit data.

    ``forward(theta, k)`` and ``inverse(theta, k)`` evaluate the map / its
    inverse and their derivatives (k <= 2) vectorized over angles.
    Construction validates orientation and that the inverse really inverts;
    bad data is rejected.
    """

    def __init__(self, forward, inverse, name="psi"):
        self.forward = forward
        self.inverse = inverse
        self.name = name
        thetas = np.linspace(0, TWO_PI, 17, dtype=LD)[:-1]
        round_trip = wrap_angle(self.forward(self.inverse(thetas, 0), 0) - thetas)
        if np.max(np.abs(round_trip)) > 1e-9:
            raise ValueError(f"{name}: inverse data does not invert the map")
        if np.min(self.forward(thetas, 1)) <= 0:
            raise ValueError(f"{name}: not orientation-preserving")

    def __repr__(self):
        return f"CircleDiffeo({self.name})"


def rotation(alpha: float) -> CircleDiffeo:
    alpha = float(alpha)

    def fwd(t, k):
        t = np.asarray(t, dtype=LD)
        return t + LD(alpha) if k == 0 else (np.ones_like(t) if k == 1 else np.zeros_like(t))

    def inv(t, k):
        t = np.asarray(t, dtype=LD)
        return t - LD(alpha) if k == 0 else (np.ones_like(t) if k == 1 else np.zeros_like(t))

    return CircleDiffeo(fwd, inv, name=f"rot({alpha})")


def _sine_flow_map(t: float):
    """Exact flow of sin(theta) d/dtheta at time t.

    Solves dtheta/ds = sin(theta): tan(theta/2) scales by e^s, realized with
    atan2 so the fixed points 0 and pi are handled; derivative is
    e^t / (e^{2t} sin^2(theta/2) + cos^2(theta/2)).
    """
    et = LD(np.exp(LD(t)))

    def fwd(th, k):
        th = np.asarray(th, dtype=LD)
        s, c = np.sin(th / 2), np.cos(th / 2)
        if k == 0:
            base = 2 * np.arctan2(et * s, c)
            # keep the branch continuous with the input winding
            return base + (th - wrap_angle(th))
        den = et * et * s * s + c * c
        if k == 1:
            return et / den
        dden = s * c * (et * et - 1)
        return -et * dden / den**2

    return fwd


def circle_flow(X: VectorField, t: float) -> CircleDiffeo:
    """Exact flow maps for the catalog fields (constant and sine)."""
    name = X.name or ""
    if name.startswith("const"):
        speed = float(X.components[0](np.zeros(1))[0])
        return rotation(speed * t)
    if name == "sin-theta":
        return CircleDiffeo(_sine_flow_map(t), _sine_flow_map(-t), name=f"Fl_sin({t})")
    raise ValueError(f"no closed-form flow for field {name!r}")


class _WarpedFamily:
    """Kernel family transported by a diffeomorphism.

    density'(x, y) = family.density(psi^-1(x), psi^-1(y)) * (psi^-1)'(y),
    the combined pullback action on the parameter and form slots.
    Supports plain pairings (no y-derivative distributions).
    """

    def __init__(self, fam: KernelFamily, mapping: CircleDiffeo, eps: float):
        self.fam = fam
        self.mapping = mapping
        self.eps = eps

    def density(self, x, eps, y, y_order: int = 0):
        if y_order:
            raise UnsupportedDifferentialError(
                "pullback pairings support derivative-free distributions only"
            )
        inv = self.mapping.inverse
        return self.fam.density(inv(x, 0), eps, inv(y, 0)) * inv(y, 1)


def _eval_pullback(F, net, eps, xs):
    mapping = F.mapping
    fam = net.family_at(eps)
    warped = _WarpedFamily(fam, mapping, eps)
    target = mapping.forward(xs, 0)
    return _eval_warped(F.child, warped, net, eps, target)


def _eval_warped(F, warped, net, eps, xs):
    if isinstance(F, ConstM):
        return np.full(xs.shape, LD(F.value))
    if isinstance(F, SigmaM):
        return F.fn(xs, 0)
    if isinstance(F, SumM):
        out = np.zeros(xs.shape, dtype=LD)
        for c in F.children:
            out = out + _eval_warped(c, warped, net, eps, xs)
        return out
    if isinstance(F, ProductM):
        return _eval_warped(F.left, warped, net, eps, xs) * \
            _eval_warped(F.right, warped, net, eps, xs)
    if isinstance(F, IotaM):
        return _pair_warped(F.dist, warped, eps, xs)
    raise UnsupportedDifferentialError(
        f"pullback of {type(F).__name__} nodes is not supported"
    )


def _pair_warped(u, warped, eps, xs):
    if isinstance(u, DeltaAt):
        return warped.density(xs, eps, LD(u.point[0]))
    if isinstance(u, LinComb):
        out = np.zeros(xs.shape, dtype=LD)
        for w, t in u.terms:
            out = out + LD(w) * _pair_warped(t, warped, eps, xs)
        return out
    if isinstance(u, Regular):
        h = u.density
        if h.breakpoints:
            raise NotImplementedError("circle regular parts must be smooth")
        # integrate over the warped support around each x
        inv = warped.mapping.inverse
        fwd = warped.mapping.forward
        r = eps * warped.fam.support_radius
        out = np.zeros(xs.shape, dtype=LD)
        for idx in range(xs.shape[0]):
            x0 = xs[idx]
            c = inv(np.asarray([x0], dtype=LD), 0)[0]
            lo, hi = fwd(np.asarray([c - r, c + r], dtype=LD), 0)
            val = integrate(
                lambda y: h(y) * warped.density(np.full(np.shape(y), x0, dtype=LD), eps, np.asarray(y, dtype=LD)),
                float(lo), float(hi), tol=1e-11,
            )
            out[idx] = val
        return out
    raise UnsupportedDifferentialError(
        "pullback pairings support deltas and smooth regular parts"
    )


# ---------------------------------------------------------------------------
# delta-net verification


@dataclass(frozen=True)
class NetConditionRow:
    condition: str
    subject: str
    passed: bool
    detail: dict


@dataclass(frozen=True)
class DeltaNetReport:
    net: str
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def section(self, condition: str):
        return [r for r in self.rows if r.condition == condition]


def _sup_scan_m(F, net, grid_values, n_points: int = None):
    """[(eps, sup over the circle)] with eps-tied resolution."""
    out = []
    for eps in grid_values:
        n = n_points or max(64, int(math.ceil(TWO_PI / (eps / 4))) + 1)
        xs = np.linspace(0.0, TWO_PI, n, dtype=LD)
        vals = evaluate_m(F, net, float(eps), xs)
        out.append((float(eps), float(np.max(np.abs(vals)))))
    return out


def _lie_chain(F, fields):
    for X in fields:
        F = OrdinaryLie(X, F)
    return F


def verify_delta_net(net, f_catalog, u_catalog, X_catalog, grid: EpsGrid | None = None,
                     m_max: int = 5, k_max: int = 2, mu_forms=()) -> DeltaNetReport:
    """Check the four delta-net conditions plus the optional L1 side ones.

    (1) exact shrinking support, (2) accuracy order on smooth functions
    under parameter-slot Lie chains, (3) polynomial growth bounds on
    distribution pairings, (4) weak convergence against test forms.
    Epsilons with support radius at or above pi are refused, not checked.
    Failures are rows, not exceptions.
    """
    grid = grid or EpsGrid()
    eps_values = [float(e) for e in grid.values() if not net.flagged(e)]
    rows = []

    # condition (1): supp omega_{x,eps} inside the closed ball of radius eps*R
    xs_samples = np.linspace(0.0, TWO_PI, 9, dtype=LD)[:-1]
    support_exact = True
    margins = (1.0001, 1.01, 1.5)
    for eps in (eps_values[0], eps_values[-1]):
        r = eps * net.support_radius
        for margin in margins:
            d = min(r * margin, math.pi * 0.999)
            if d <= r:
                continue
            vals = [net.density(x, eps, x + LD(d)) for x in xs_samples]
            vals += [net.density(x, eps, x - LD(d)) for x in xs_samples]
            if np.max(np.abs(np.asarray(vals, dtype=float))) != 0.0:
                support_exact = False
    rows.append(NetConditionRow(
        "support", "all", support_exact,
        {"radius_rule": "eps * R", "R": net.support_radius,
         "refused_eps": [float(e) for e in grid.values() if net.flagged(e)]},
    ))

    # condition (2): accuracy on smooth functions under L^{C-infinity} chains
    chains = [()]
    if k_max >= 1:
        chains += [(X,) for X in X_catalog]
    if k_max >= 2:
        chains += [(X_catalog[0], X) for X in X_catalog[:1]]
    for f in f_catalog:
        for chain in chains:
            expr = _lie_chain(IotaMinusSigmaM(f), chain)
            if isinstance(net, EscalatingNet):
                eps_set = [e for e in net.grid(10) if e <= grid.eps_max]
                samples = _sup_scan_m(expr, net, eps_set)
                certified, detail = _escalating_decay(samples, net, m_max)
                rows.append(NetConditionRow(
                    "accuracy", f"f={f.name}, chain={len(chain)}", certified, detail))
            else:
                q = net.order_at(grid.eps_min)
                target = min(m_max, q + 1)
                est = estimate_order(_sup_scan_m(expr, net, eps_values))
                ok = est.certifies_decay(target)
                rows.append(NetConditionRow(
                    "accuracy", f"f={f.name}, chain={len(chain)}", ok,
                    {"slope": est.slope, "residual": est.max_residual,
                     "certified_order": target,
                     "order_cap": q + 1}))

    # condition (3): growth bounds on embedded distributions
    for u_label, u in u_catalog:
        for k in range(k_max + 1):
            chain = tuple(X_catalog[0] for _ in range(k))
            expr = _lie_chain(IotaM(u), chain)
            est = estimate_order(_sup_scan_m(expr, net, eps_values))
            n_bound = est.growth_bound()
            rows.append(NetConditionRow(
                "growth", f"u={u_label}, k={k}", n_bound is not None,
                {"slope": est.slope, "residual": est.max_residual, "N": n_bound}))

    # condition (4): weak convergence to the identity on distributions
    for u_label, u in u_catalog:
        for mu in mu_forms:
            eps_levels = _dyadic_eps(grid.eps_min, 6)
            vals = []
            for eps in eps_levels:
                vals.append(_weak_pairing_m(IotaM(u), net, eps, mu))
            extrap, err = richardson_limit(vals)
            target = pair_form(u, mu)
            dev = abs(extrap - target)
            rows.append(NetConditionRow(
                "weak-convergence", f"u={u_label}, mu={mu.name}", dev <= 1e-3,
                {"deviation": dev, "target": target, "extrapolated": extrap,
                 "error_bar": err}))

    # optional L1 conditions: exact unit mass and derivative mass growth
    mass_dev = 0.0
    l1_norms = []
    for eps in (eps_values[0], eps_values[-1]):
        m = net.mollifier_at(eps)
        mass_dev = max(mass_dev, abs(m.moment(0) - 1.0))
        l1_norms.append(m.norm_l1())
    rows.append(NetConditionRow(
        "l1-mass", "all", mass_dev <= 1e-10,
        {"mass_deviation": mass_dev, "l1_norm": l1_norms,
         "note": "L1 norm equals 1 only for nonnegative generators (q=0); "
                 "higher orders give a bounded constant"}))
    dmass = []
    for eps in eps_values:
        m = net.mollifier_at(eps)
        dmass.append((eps, float(np.sum(np.abs(m.pairing_weights(1)))) / eps))
    est = estimate_order(dmass)
    rows.append(NetConditionRow(
        "l1-derivative-mass", "alpha=1", abs(est.slope + 1) <= 0.15,
        {"slope": est.slope, "expected": -1.0}))

    return DeltaNetReport(repr(net), tuple(rows))


def _escalating_decay(samples, net, m_max):
    """Per-m windows: the escalating net certifies decay m once q >= m-1."""
    detail = {}
    ok = True
    for m in range(1, m_max + 1):
        window = [(e, v) for e, v in samples if net.order_for(e) >= m - 1]
        if len(window) < 3:
            continue
        # pairwise slopes within the window must reach m
        slopes = []
        for (e1, v1), (e2, v2) in zip(window[:-1], window[1:]):
            if v1 <= 0 or v2 <= 0:
                continue
            slopes.append(math.log(v2 / v1) / math.log(e2 / e1))
        certified = bool(slopes) and max(slopes) >= m - SLOPE_MARGIN
        detail[f"m={m}"] = {"max_slope": max(slopes) if slopes else None,
                            "certified": certified}
        ok = ok and certified
    return ok, detail


def _weak_pairing_m(F, net, eps, mu: NFormS1, tol: float = 1e-9):
    """int_M F(omega_eps)(x) mu(x) over the circle with feature cuts."""
    cuts = set()
    r = eps * net.support_radius

    def walk(expr):
        if isinstance(expr, (IotaM,)):
            for p in _dist_features_s1(expr.dist):
                for c in (p - r, p, p + r):
                    cuts.add(canonical_angle(c))
        elif isinstance(expr, SumM):
            for c in expr.children:
                walk(c)
        elif isinstance(expr, ProductM):
            walk(expr.left)
            walk(expr.right)
        elif isinstance(expr, (OrdinaryLie, GeneralizedLie)):
            walk(expr.child)

    walk(F)

    def integrand(xs):
        return np.asarray(evaluate_m(F, net, eps, xs), dtype=float) * \
            np.asarray(mu.density(xs), dtype=float)

    return float(integrate(integrand, 0.0, TWO_PI, tol=tol, breakpoints=sorted(cuts)))


def _dist_features_s1(u):
    pts = set()
    if isinstance(u, DeltaAt):
        pts.add(float(u.point[0]))
    elif isinstance(u, (Derivative, SmoothMultiple)):
        pts |= _dist_features_s1(u.inner)
    elif isinstance(u, LinComb):
        for _, t in u.terms:
            pts |= _dist_features_s1(t)
    return pts


# ---------------------------------------------------------------------------
# manifold classifiers (test-object formulation, no q-grading)


@dataclass(frozen=True)
class ManifoldScanRow:
    net: str
    j: int
    chain_len: int
    slope: float
    residual: float
    verdict: object


@dataclass(frozen=True)
class ManifoldClassReport:
    rows: tuple
    kind: str  # "negligible" | "moderate"

    @property
    def certified(self) -> bool:
        return all(not isinstance(r.verdict, Inconclusive) for r in self.rows)


def check_negligible_m(F, nets, perturbations, X_catalog, m_target: int = 4,
                       k_max: int = 2, j_max: int = 1,
                       grid: EpsGrid | None = None) -> ManifoldClassReport:
    """Decay scans of Lie chains of d^j F along the given nets.

    j ranges over {0, 1}; the differential beyond first order is
    unsupported by design (embedded objects never need it).  Fixed-order
    nets certify decay only up to their order cap, reported per row.
    """
    if j_max > 1:
        raise UnsupportedDifferentialError("differentials beyond j=1 are unsupported")
    grid = grid or EpsGrid()
    rows = []
    for net in nets:
        eps_values = [float(e) for e in grid.values() if not net.flagged(e)]
        for j in range(j_max + 1):
            for k in range(k_max + 1):
                chain = tuple(X_catalog[i % len(X_catalog)] for i in range(k))
                expr = _lie_chain(F, chain)
                if j == 0:
                    samples = _sup_scan_m(expr, net, eps_values)
                else:
                    samples = _dsup_scan_m(expr, net, perturbations[0], eps_values)
                est = estimate_order(samples)
                cap = min(m_target, net.order_at(eps_values[-1]) + 1)
                verdict = DecaysAtLeastM(cap) if est.certifies_decay(cap) else \
                    Inconclusive(f"slope {est.slope:.2f} below target {cap}")
                rows.append(ManifoldScanRow(repr(net), j, k, est.slope,
              est.max_residual, verdict))
    return ManifoldClassReport(tuple(rows), "negligible")


@dataclass(frozen=True)
class DecaysAtLeastM:
    m: int


@dataclass(frozen=True)
class GrowsAtMostM:
    n: int


def check_moderate_m(F, nets, perturbations, X_catalog, k_max: int = 2,
                     j_max: int = 1, grid: EpsGrid | None = None) -> ManifoldClassReport:
    """Growth scans of Lie chains of d^j F along the given nets."""
    if j_max > 1:
        raise UnsupportedDifferentialError("differentials beyond j=1 are unsupported")
    grid = grid or EpsGrid()
    rows = []
    for net in nets:
        eps_values = [float(e) for e in grid.values() if not net.flagged(e)]
        for j in range(j_max + 1):
            if j == 1 and not _is_linear(F):
                continue  # products are covered at j=0; d^2 terms are out of class
            for k in range(k_max + 1):
                chain = tuple(X_catalog[i % len(X_catalog)] for i in range(k))
                expr = _lie_chain(F, chain)
                if j == 0:
                    samples = _sup_scan_m(expr, net, eps_values)
                else:
                    samples = _dsup_scan_m(expr, net, perturbations[0], eps_values)
                est = estimate_order(samples)
                n_bound = est.growth_bound()
                verdict = GrowsAtMostM(n_bound) if n_bound is not None else \
                    Inconclusive("dirty fit")
                rows.append(ManifoldScanRow(repr(net), j, k, est.slope,
                                            est.max_residual, verdict))
    return ManifoldClassReport(tuple(rows), "moderate")


def _dsup_scan_m(F, net, perturbation, grid_values):
    out = []
    for eps in grid_values:
        n = max(64, int(math.ceil(TWO_PI / (eps / 4))) + 1)
        xs = np.linspace(0.0, TWO_PI, n, dtype=LD)
        vals = devaluate_m(F, net, perturbation, float(eps), xs)
        out.append((float(eps), float(np.max(np.abs(vals)))))
    return out


# ---------------------------------------------------------------------------
# association on the circle


def associate_m(F, mu_set, nets, eps_min: float = 1e-3, candidate=None,
                tol: float = 1e-3, levels: int = 8) -> AssociationReport:
    """Weak limits int_M F(omega_eps) mu against a candidate distribution."""
    eps_levels = _dyadic_eps(eps_min, levels)
    cases = []
    for mu in mu_set:
        cval = pair_form(candidate, mu) if candidate is not None else None
        for net in nets:
            vals = [_weak_pairing_m(F, net, eps, mu) for eps in eps_levels]
            extrap, err = richardson_limit(vals)
            dev = abs(extrap - cval) if cval is not None else None
            growth = estimate_order(list(zip(eps_levels, vals))).slope
            cases.append(AssociationCase(
                psi=mu.name, phi_order=net.order_at(eps_min), phi_label=repr(net),
                eps_values=tuple(eps_levels), pairings=tuple(vals),
                extrapolated=extrap, error_bar=err, candidate_value=cval,
                deviation=dev, growth_slope=float(growth),
            ))
    if candidate is not None and all(c.deviation is not None and c.deviation <= tol for c in cases):
        if all(abs(c.candidate_value) <= 1e-14 for c in cases):
            verdict = AssociatedToZero()
        else:
            verdict = AssociatedTo(repr(candidate))
    elif candidate is None and all(abs(c.extrapolated) <= tol for c in cases):
        verdict = AssociatedToZero()
    else:
        slopes = [c.growth_slope for c in cases]
        if all(s <= -1 + SLOPE_MARGIN for s in slopes):
            verdict = Divergent(max(max(1, math.ceil(-s - SLOPE_MARGIN)) for s in slopes))
        else:
            verdict = Inconclusive("no unanimous limit")
    return AssociationReport(tuple(cases), verdict, tol,
                             repr(candidate) if candidate is not None else None)
