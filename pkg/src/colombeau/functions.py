"""Smooth and piecewise-smooth scalar functions with analytic derivatives.

Everything that plays the role of a "known smooth function" in the package
(regular distribution densities, test-function profiles, vector-field
coefficients, n-form densities on the circle) is a :class:`SmoothFn` or a
:class:`PiecewiseSmooth` built from them.  Derivatives are analytic, never
finite differences; the derivative order is capped at MAX_DERIV everywhere.
"""

from __future__ import annotations

import numpy as np

from .quadrature import LD

MAX_DERIV = 8


class UnsupportedOrderError(ValueError):
    """Requested derivative order exceeds the supported cap."""


def _check_order(k: int):
    if k > MAX_DERIV:
        raise UnsupportedOrderError(
            f"derivative order {k} exceeds the supported cap {MAX_DERIV}"
        )


class SmoothFn:
    """Scalar function with derivative evaluations ``f(x, k)`` up to order 8.

    ``evaluator(x, k)`` receives a longdouble array and the derivative order.
    ``increment``, when given, computes f(x+h)-f(x) without cancellation
    (used by the fused embedding-difference evaluation); the default is the
    direct difference.
    """

    def __init__(self, name, evaluator, support=None, period=None, increment=None):
        self.name = name
        self._eval = evaluator
        self.support = support  # (lo, hi) with exact zeroes outside, or None
        self.period = period
        self._increment = increment

    def __repr__(self):
        return f"SmoothFn({self.name})"

    def __call__(self, x, k: int = 0):
        _check_order(k)
        x = np.asarray(x, dtype=LD)
        return self._eval(x, k)

    def deriv(self, k: int = 1) -> "SmoothFn":
        if k == 0:
            return self
        _check_order(k)
        base = self

        def shifted(x, j, _k=k, _b=base):
            return _b(x, j + _k)

        inc = None
        if base._increment is not None:
            inc = lambda x, h, j, _k=k: base._increment(x, h, j + _k)  # noqa: E731
        return SmoothFn(
            f"{self.name}^({k})", shifted, support=self.support,
            period=self.period, increment=inc,
        )

    def increment(self, x, h, k: int = 0):
        """f^(k)(x+h) - f^(k)(x), evaluated stably when possible."""
        _check_order(k)
        if self._increment is not None:
            return self._increment(np.asarray(x, dtype=LD), np.asarray(h, dtype=LD), k)
        x = np.asarray(x, dtype=LD)
        h = np.asarray(h, dtype=LD)
        return self(x + h, k) - self(x, k)


def fn_constant(c) -> SmoothFn:
    c = LD(c)

    def ev(x, k):
        if k == 0:
            return np.full(np.shape(x), c, dtype=LD)
        return np.zeros(np.shape(x), dtype=LD)

    return SmoothFn(repr(float(c)), ev, increment=lambda x, h, k: np.zeros(np.broadcast(x, h).shape, dtype=LD))


def fn_sin(freq=1.0, phase=0.0, name=None) -> SmoothFn:
    """sin(freq*x + phase); derivatives by phase shifts, stable increments."""
    freq = LD(freq)
    phase = LD(phase)
    half_pi = LD(np.pi) / 2

    def ev(x, k):
        return freq**k * np.sin(freq * x + phase + k * half_pi)

    def inc(x, h, k):
        # sin(a+d) - sin(a) = cos(a) sin(d) - sin(a) (1 - cos(d)); the last
        # factor is 2 sin^2(d/2), so every term is scale-relative stable.
        # Keeping a- and d-dependent trig separate makes broadcast pairings
        # (x column, h row) cost m+n trig calls instead of m*n.
        a = np.asarray(freq * x, dtype=LD) + (phase + k * half_pi)
        d = np.asarray(freq * h, dtype=LD)
        sd = np.sin(d)
        one_minus_cd = 2 * np.sin(d / 2) ** 2
        return freq**k * (np.cos(a) * sd - np.sin(a) * one_minus_cd)

    period = float(2 * np.pi / freq) if freq != 0 else None
    return SmoothFn(name or f"sin({float(freq)}x+{float(phase)})", ev,
                    period=period, increment=inc)


def fn_cos(freq=1.0, phase=0.0, name=None) -> SmoothFn:
    return fn_sin(freq, phase + np.pi / 2, name=name or f"cos({float(freq)}x)")


def fn_polynomial(coeffs, name=None) -> SmoothFn:
    """Polynomial sum(c_j x^j); increments via the exact Taylor expansion."""
    coeffs = np.asarray(coeffs, dtype=LD)
    derivs = [coeffs]
    for _ in range(MAX_DERIV + 1):
        prev = derivs[-1]
        derivs.append(prev[1:] * np.arange(1, len(prev), dtype=LD) if len(prev) > 1
                      else np.zeros(1, dtype=LD))

    def ev(x, k):
        c = derivs[k]
        out = np.zeros(np.shape(x), dtype=LD)
        for cj in c[::-1]:
            out = out * x + cj
        return out

    def inc(x, h, k):
        # f(x+h)-f(x) = sum_{i>=1} f^(k+i)(x) h^i / i!, a finite sum
        out = np.zeros(np.broadcast(x, h).shape, dtype=LD)
        fact = LD(1)
        hp = np.asarray(h, dtype=LD).copy()
        for i in range(1, len(coeffs) + 1):
            if k + i >= len(derivs):
                break
            fact *= i
            out = out + ev(np.asarray(x, dtype=LD), k + i) * hp / fact
            hp = hp * h
        return out

    if name is None:
        name = "poly[" + ",".join(str(float(c)) for c in coeffs) + "]"
    return SmoothFn(name, ev, increment=inc)


def fn_product(f: SmoothFn, g: SmoothFn, name=None) -> SmoothFn:
    """Pointwise product with Leibniz derivatives."""
    from math import comb

    def ev(x, k):
        out = np.zeros(np.shape(x), dtype=LD)
        for j in range(k + 1):
            out = out + comb(k, j) * f(x, j) * g(x, k - j)
        return out

    support = _intersect_supports(f.support, g.support)
    return SmoothFn(name or f"({f.name})*({g.name})", ev, support=support,
                    period=_common_period(f, g))


def fn_sum(f: SmoothFn, g: SmoothFn, wf=1.0, wg=1.0, name=None) -> SmoothFn:
    wf = LD(wf)
    wg = LD(wg)

    def ev(x, k):
        return wf * f(x, k) + wg * g(x, k)

    def inc(x, h, k):
        return wf * f.increment(x, h, k) + wg * g.increment(x, h, k)

    return SmoothFn(name or f"({f.name})+({g.name})", ev,
                    period=_common_period(f, g), increment=inc)


def fn_compose_affine(f: SmoothFn, a, b, name=None) -> SmoothFn:
    """x -> f(a*x + b) with chain-rule derivatives."""
    a = LD(a)
    b = LD(b)

    def ev(x, k):
        return a**k * f(a * x + b, k)

    support = None
    if f.support is not None and a != 0:
        lo, hi = (LD(s) for s in f.support)
        pts = sorted([float((lo - b) / a), float((hi - b) / a)])
        support = tuple(pts)
    return SmoothFn(name or f"{f.name}(ax+b)", ev, support=support)


def _intersect_supports(s1, s2):
    if s1 is None:
        return s2
    if s2 is None:
        return s1
    lo = max(s1[0], s2[0])
    hi = min(s1[1], s2[1])
    return (lo, hi) if lo < hi else (0.0, 0.0)


def _common_period(f, g):
    if f.period is not None and g.period is not None and np.isclose(f.period, g.period):
        return f.period
    return None


class PiecewiseSmooth:
    """Piecewise-smooth locally integrable function on the line.

    ``pieces`` is a list of (lo, hi, SmoothFn) covering the support; the
    function is 0 outside.  Interior interface points and finite support
    endpoints where the function does not vanish are the breakpoints that
    quadrature must split at.  The distributional derivative decomposes as
    the piecewise classical derivative plus jump multiples of deltas, which
    :meth:`classical_derivative` and :meth:`jumps` expose.
    """

    def __init__(self, name, pieces, breakpoints=None):
        self.name = name
        self.pieces = tuple((float(lo), float(hi), fn) for lo, hi, fn in pieces)
        if breakpoints is None:
            pts = set()
            for lo, hi, _ in self.pieces:
                if np.isfinite(lo):
                    pts.add(lo)
                if np.isfinite(hi):
                    pts.add(hi)
            breakpoints = sorted(pts)
        self.breakpoints = tuple(float(b) for b in breakpoints)
        los = [lo for lo, _, _ in self.pieces]
        his = [hi for _, hi, _ in self.pieces]
        self.support = (min(los), max(his))

    def __repr__(self):
        return f"PiecewiseSmooth({self.name})"

    def __call__(self, x, k: int = 0):
        _check_order(k)
        arr = np.atleast_1d(np.asarray(x, dtype=LD))
        out = np.zeros(arr.shape, dtype=LD)
        for lo, hi, fn in self.pieces:
            mask = np.ones(arr.shape, dtype=bool)
            if np.isfinite(lo):
                mask &= arr > lo
            if np.isfinite(hi):
                mask &= arr <= hi
            if np.any(mask):
                out[mask] = fn(arr[mask], k)
        return out if np.ndim(x) else out[0]

    def piece_value(self, b: float, side: str, k: int = 0):
        """One-sided limit at b: value of the piece extending to that side."""
        eps = 1e-12 * max(1.0, abs(b))
        for lo, hi, fn in self.pieces:
            covers_left = side == "left" and lo < b - eps and b <= hi + eps
            covers_right = side == "right" and b + eps < hi and b >= lo - eps
            if covers_left or covers_right:
                return fn(np.asarray([b], dtype=LD), k)[0]
        return LD(0.0)

    def jumps(self):
        """[(point, height)] of the function's jumps at its breakpoints."""
        out = []
        for b in self.breakpoints:
            j = self.piece_value(b, "right") - self.piece_value(b, "left")
            if abs(j) > 0:
                out.append((b, j))
        return out

    def classical_derivative(self) -> "PiecewiseSmooth":
        return PiecewiseSmooth(
            f"{self.name}'",
            [(lo, hi, fn.deriv(1)) for lo, hi, fn in self.pieces],
            breakpoints=self.breakpoints,
        )


def heaviside(a=0.0) -> PiecewiseSmooth:
    return PiecewiseSmooth(f"H@{float(a)}", [(float(a), np.inf, fn_constant(1.0))])


def sign_at(a=0.0) -> PiecewiseSmooth:
    return PiecewiseSmooth(
        f"sign@{float(a)}",
        [(-np.inf, float(a), fn_constant(-1.0)), (float(a), np.inf, fn_constant(1.0))],
    )


def abs_at(a=0.0) -> PiecewiseSmooth:
    a = float(a)
    return PiecewiseSmooth(
        f"abs@{a}",
        [(-np.inf, a, fn_polynomial([a, -1.0])), (a, np.inf, fn_polynomial([-a, 1.0]))],
    )


def ramp(a=0.0) -> PiecewiseSmooth:
    """max(x - a, 0): the continuous antiderivative of the Heaviside step."""
    a = float(a)
    return PiecewiseSmooth(f"ramp@{a}", [(a, np.inf, fn_polynomial([-a, 1.0]))])


def smooth_as_piecewise(fn: SmoothFn) -> PiecewiseSmooth:
    """View a globally smooth function as a single-piece regular density."""
    lo, hi = fn.support if fn.support is not None else (-np.inf, np.inf)
    return PiecewiseSmooth(fn.name, [(lo, hi, fn)], breakpoints=())


def piecewise_product(a: PiecewiseSmooth, b: PiecewiseSmooth) -> PiecewiseSmooth:
    """Pointwise product, pieces intersected and breakpoints merged."""
    pieces = []
    for lo1, hi1, f1 in a.pieces:
        for lo2, hi2, f2 in b.pieces:
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if lo < hi:
                pieces.append((lo, hi, fn_product(f1, f2)))
    if not pieces:
        pieces = [(0.0, 0.0, fn_constant(0.0))]
    cuts = sorted(set(a.breakpoints) | set(b.breakpoints))
    lo = max(a.support[0], b.support[0])
    hi = min(a.support[1], b.support[1])
    cuts = [c for c in cuts if lo <= c <= hi or not (np.isfinite(lo) and np.isfinite(hi))]
    return PiecewiseSmooth(f"({a.name})*({b.name})", pieces, breakpoints=cuts)
