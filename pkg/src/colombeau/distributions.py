"""Symbolic test distributions and their pairings with smooth arguments.

Distributions are immutable variant trees: point masses, distributional
derivatives, regular (piecewise-smooth) densities, smooth multiples and
linear combinations.  The pairing rules are exact:

* ``<delta_a, psi> = psi(a)``
* ``<D^l T, psi> = (-1)^|l| <T, D^l psi>`` (built into the variant)
* ``<f, psi>`` by quadrature split at the declared breakpoints
* smooth multiples move onto the test function.

Distributional derivatives are computed symbolically: the derivative of a
regular density is its piecewise classical derivative plus jump multiples
of deltas, so derivatives always land on the most regular representation
available.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .functions import (
    MAX_DERIV,
    PiecewiseSmooth,
    SmoothFn,
    UnsupportedOrderError,
    _check_order,
    fn_product,
    heaviside,
    smooth_as_piecewise,
)
from .quadrature import LD, integrate, integrate_2d


def _as_point(a) -> Tuple[float, ...]:
    if np.ndim(a) == 0:
        return (float(a),)
    return tuple(float(c) for c in a)


def _as_multi(l, ndim: int) -> Tuple[int, ...]:
    if np.ndim(l) == 0:
        multi = (int(l),) + (0,) * (ndim - 1)
    else:
        multi = tuple(int(i) for i in l)
    if len(multi) != ndim:
        raise ValueError(f"multi-index {multi} does not match dimension {ndim}")
    return multi


# ---------------------------------------------------------------------------
# test functions


class TestFunction:
    """Smooth compactly supported argument of a pairing.

    Wraps a :class:`SmoothFn` (1D) or a tensor pair (2D) with an explicit
    support box.  Evaluations vanish exactly outside the support; derivative
    evaluation is analytic and capped at order 8.
    """

    def __init__(self, fn, support=None, name=None):
        if isinstance(fn, tuple):
            self.factors = fn
            self.ndim = len(fn)
            if support is None:
                support = tuple(f.support for f in fn)
            self.support = support
        else:
            self.factors = (fn,)
            self.ndim = 1
            if support is None:
                support = fn.support
            if support is None:
                raise ValueError("test functions must declare compact support")
            self.support = (support,) if np.ndim(support[0]) == 0 else support
        self.name = name or "*".join(f.name for f in self.factors)
        for lo, hi in self.support:
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError("test functions must have compact support")

    breakpoints = ()

    def __repr__(self):
        return f"TestFunction({self.name})"

    def value(self, y, k=None):
        if k is None:
            k = (0,) * self.ndim
        else:
            k = _as_multi(k, self.ndim)
        if sum(k) > MAX_DERIV:
            raise UnsupportedOrderError(f"test-function derivative {sum(k)} > {MAX_DERIV}")
        if self.ndim == 1:
            return self.factors[0](np.asarray(y, dtype=LD), k[0])
        pts = np.atleast_2d(np.asarray(y, dtype=LD))
        out = np.ones(pts.shape[1:], dtype=LD)
        for axis, (f, ka) in enumerate(zip(self.factors, k)):
            out = out * f(pts[axis], ka)
        return out

    def __call__(self, y, k=None):
        return self.value(y, k)

    def differentiate(self, l) -> "TestFunction":
        l = _as_multi(l, self.ndim)
        return TestFunction(
            tuple(f.deriv(k) for f, k in zip(self.factors, l)),
            support=self.support,
            name=f"D{l}{self.name}",
        ) if self.ndim > 1 else TestFunction(
            self.factors[0].deriv(l[0]), support=self.support[0],
            name=f"D{l}{self.name}",
        )

    def multiply(self, g: SmoothFn) -> "TestFunction":
        if self.ndim != 1:
            raise NotImplementedError("smooth multiples only implemented in 1D")
        return TestFunction(fn_product(g, self.factors[0]), support=self.support[0],
                            name=f"({g.name})*{self.name}")


# ---------------------------------------------------------------------------
# distribution variants


class Distribution:
    """Base class; variants below are frozen dataclasses."""

    ndim = 1

    def derivative(self, axis: int = 0) -> "Distribution":
        raise NotImplementedError

    def simplified(self):
        return self


@dataclass(frozen=True)
class DeltaAt(Distribution):
    point: tuple

    def __post_init__(self):
        object.__setattr__(self, "point", _as_point(self.point))

    @property
    def ndim(self):
        return len(self.point)

    def derivative(self, axis: int = 0):
        e = tuple(1 if i == axis else 0 for i in range(self.ndim))
        return Derivative(e, self)


@dataclass(frozen=True)
class Derivative(Distribution):
    index: tuple
    inner: Distribution

    def __post_init__(self):
        object.__setattr__(self, "index", _as_multi(self.index, self.inner.ndim))
        if sum(self.index) > MAX_DERIV:
            raise UnsupportedOrderError(
                f"distributional derivative order {sum(self.index)} > {MAX_DERIV}"
            )

    @property
    def ndim(self):
        return self.inner.ndim

    def derivative(self, axis: int = 0):
        e = tuple(1 if i == axis else 0 for i in range(self.ndim))
        return Derivative(tuple(a + b for a, b in zip(self.index, e)), self.inner)


@dataclass(frozen=True)
class Regular(Distribution):
    """Regular distribution given by a locally integrable density.

    1D densities are :class:`PiecewiseSmooth` (or plain smooth functions);
    2D densities are tensor pairs of smooth functions.
    """

    density: object

    def __post_init__(self):
        d = self.density
        if isinstance(d, SmoothFn):
            object.__setattr__(self, "density", smooth_as_piecewise(d))

    @property
    def ndim(self):
        return 2 if isinstance(self.density, tuple) else 1

    @property
    def breakpoints(self):
        if self.ndim == 1:
            return self.density.breakpoints
        return ()

    def derivative(self, axis: int = 0):
        if self.ndim == 2:
            f1, f2 = self.density
            pair_ = (f1.deriv(1), f2) if axis == 0 else (f1, f2.deriv(1))
            return Regular(pair_)
        classical = Regular(self.density.classical_derivative())
        terms = [(1.0, classical)]
        for b, jump in self.density.jumps():
            terms.append((float(jump), DeltaAt((b,))))
        return LinComb(tuple(terms)).simplified()


def heaviside_at(a: float = 0.0) -> Regular:
    """Heaviside step at a (sugar for the regular variant)."""
    return Regular(heaviside(a))


@dataclass(frozen=True)
class SmoothMultiple(Distribution):
    """g*T for smooth g; pairs via <g T, psi> = <T, g psi>."""

    factor: SmoothFn
    inner: Distribution

    @property
    def ndim(self):
        return self.inner.ndim

    def derivative(self, axis: int = 0):
        if self.ndim != 1:
            raise NotImplementedError("smooth multiples only implemented in 1D")
        return LinComb((
            (1.0, SmoothMultiple(self.factor.deriv(1), self.inner)),
            (1.0, SmoothMultiple(self.factor, derivative_dist(self.inner, axis))),
        )).simplified()


@dataclass(frozen=True)
class LinComb(Distribution):
    terms: tuple  # of (weight, Distribution)

    @property
    def ndim(self):
        return self.terms[0][1].ndim if self.terms else 1

    def derivative(self, axis: int = 0):
        return LinComb(tuple((w, derivative_dist(t, axis)) for w, t in self.terms)).simplified()

    def simplified(self):
        flat = []
        for w, t in self.terms:
            t = t.simplified()
            if isinstance(t, LinComb):
                flat.extend((w * w2, t2) for w2, t2 in t.terms)
            elif w != 0:
                flat.append((float(w), t))
        if len(flat) == 1 and flat[0][0] == 1.0:
            return flat[0][1]
        return LinComb(tuple(flat))


ZERO = LinComb(())


def delta(point=0.0) -> DeltaAt:
    return DeltaAt(_as_point(point))


def derivative_dist(T: Distribution, axis: int = 0) -> Distribution:
    """Distributional derivative along an axis, reduced symbolically."""
    return T.derivative(axis)


def _apply_index(T: Distribution, index) -> Distribution:
    out = T
    for axis, k in enumerate(index):
        for _ in range(k):
            out = derivative_dist(out, axis)
    return out


def dist_derivative(T: Distribution, index) -> Distribution:
    """D^index T with index a multi-index (or int in 1D)."""
    index = _as_multi(index, T.ndim)
    return _apply_index(T, index)


# ---------------------------------------------------------------------------
# pairing


def pair(T: Distribution, psi, tol: float | None = None) -> float:
    """The pairing <T, psi> for a compactly supported smooth psi."""
    return float(_pair(T, psi, tol))


def _pair(T, psi, tol):
    if isinstance(T, DeltaAt):
        if len(T.point) == 1:
            return psi.value(np.asarray(T.point[0], dtype=LD))
        return psi.value(np.asarray(T.point, dtype=LD).reshape(len(T.point), 1))[0]
    if isinstance(T, Derivative):
        sign = (-1) ** sum(T.index)
        return sign * _pair(T.inner, psi.differentiate(T.index), tol)
    if isinstance(T, SmoothMultiple):
        return _pair(T.inner, psi.multiply(T.factor), tol)
    if isinstance(T, LinComb):
        return sum((LD(w) * _pair(t, psi, tol) for w, t in T.terms), LD(0.0))
    if isinstance(T, Regular):
        return _pair_regular(T, psi, tol)
    raise TypeError(f"unknown distribution variant {type(T).__name__}")


def _pair_regular(T: Regular, psi, tol):
    if T.ndim == 1:
        f = T.density
        (plo, phi_), = psi.support
        lo = max(plo, f.support[0])
        hi = min(phi_, f.support[1])
        if hi <= lo:
            return LD(0.0)
        cuts = [b for b in f.breakpoints if lo < b < hi]
        return integrate(lambda y: f(y) * psi.value(y), lo, hi, tol=tol, breakpoints=cuts)
    f1, f2 = T.density
    (lo1, hi1), (lo2, hi2) = psi.support

    def integrand(X, Y):
        shape = np.broadcast(X, Y).shape
        pts = np.stack([np.broadcast_to(X, shape).ravel(), np.broadcast_to(Y, shape).ravel()])
        return (f1(X, 0) * f2(Y, 0)) * psi.value(pts).reshape(shape)

    return integrate_2d(integrand, (lo1, lo2), (hi1, hi2), tol=tol)


def kernel_test_function(kern) -> TestFunction:
    """View a scaled translated kernel as a pairing argument.

    This is the reference path used to cross-check the closed-form embedding
    evaluations; ``kern`` is duck-typed (needs .base, .center, .eps).
    """
    fns = []
    eps = LD(kern.eps)
    for f, c in zip(kern.base.factors, kern.center):
        r = eps * LD(f.support_radius)

        def ev(y, k, f=f, c=c):
            return f((np.asarray(y, dtype=LD) - LD(c)) / eps, k) / eps ** (k + 1)

        fns.append(SmoothFn(f"kernel@{c}", ev,
                            support=(float(LD(c) - r), float(LD(c) + r))))
    if len(fns) == 1:
        return TestFunction(fns[0], name="kernel")
    return TestFunction(tuple(fns), name="kernel")


# ---------------------------------------------------------------------------
# vector fields and Lie derivatives


@dataclass(frozen=True)
class VectorField:
    """Smooth vector field X = sum_a X^a(x) d/dx^a on R^n or the circle."""

    components: tuple  # of SmoothFn
    domain: str = "rn"  # "rn" | "s1"
    name: str = ""

    @property
    def ndim(self):
        return len(self.components)

    def coefficient(self, axis: int = 0) -> SmoothFn:
        return self.components[axis]


def lie_derivative_dist(T: Distribution, X: VectorField) -> Distribution:
    """The distribution X^a D_a T via the adjoint pairing.

    Realized as smooth multiples of first derivatives, so that
    <X^a D_a T, psi> = -<T, D_a(X^a psi)> holds by construction.
    """
    if X.ndim != T.ndim:
        raise ValueError("vector field and distribution dimensions differ")
    terms = tuple(
        (1.0, SmoothMultiple(X.components[a], derivative_dist(T, a)))
        for a in range(X.ndim)
    )
    return LinComb(terms).simplified()
