"""Named catalogs of functions, distributions, fields and test objects.

Everything the CLI can address by string lives here, shared with the test
suite so oracles and scenarios use identical objects.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .distributions import (
    DeltaAt,
    Derivative,
    Distribution,
    Regular,
    TestFunction,
    VectorField,
    dist_derivative,
    heaviside_at,
)
from .functions import (
    PiecewiseSmooth,
    SmoothFn,
    abs_at,
    fn_constant,
    fn_cos,
    fn_polynomial,
    fn_product,
    fn_sin,
    fn_sum,
    ramp,
    sign_at,
)
from .manifold import NFormS1
from .mollifier import bump_profile


class UnknownNameError(KeyError):
    """Catalog lookup failed; carries the catalog kind and a listing."""

    def __init__(self, kind, name, available):
        super().__init__(name)
        self.kind = kind
        self.name = name
        self.available = tuple(available)

    def __str__(self):
        return (f"unknown {self.kind} {self.name!r}; available: "
                + ", ".join(self.available))


def parse_angle(text: str) -> float:
    """Angles as floats or simple pi fractions: 'pi', 'pi/2', '3pi/4'."""
    text = text.strip()
    m = re.fullmatch(r"(-?\d*\.?\d*)\s*pi\s*(?:/\s*(\d+\.?\d*))?", text)
    if m:
        num = float(m.group(1)) if m.group(1) not in ("", "-") else (
            -1.0 if m.group(1) == "-" else 1.0)
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den
    return float(text)


# ---------------------------------------------------------------------------
# smooth functions


def bump_fn(name: str = "bump") -> SmoothFn:
    bp = bump_profile()
    return SmoothFn(name, lambda x, k: bp(x, k), support=(-1.0, 1.0))


def smooth_function(name: str) -> SmoothFn:
    table = _smooth_table()
    if name not in table:
        raise UnknownNameError("smooth function", name, sorted(table))
    return table[name]()


_SMOOTH_CACHE = {}


def _smooth_table():
    def cached(builder):
        def get(builder=builder):
            key = builder.__qualname__
            if key not in _SMOOTH_CACHE:
                _SMOOTH_CACHE[key] = builder()
            return _SMOOTH_CACHE[key]
        return get

    return {
        "sin": cached(lambda: fn_sin(name="sin")),
        "cos": cached(lambda: fn_cos(name="cos")),
        "x": cached(lambda: fn_polynomial([0.0, 1.0], name="x")),
        "x^2": cached(lambda: fn_polynomial([0.0, 0.0, 1.0], name="x^2")),
        "one": cached(lambda: fn_constant(1.0)),
        "one-plus-x^2": cached(lambda: fn_polynomial([1.0, 0.0, 1.0], name="1+x^2")),
        "bump": cached(bump_fn),
    }


# ---------------------------------------------------------------------------
# distributions (1D line)


def distribution(name: str) -> Distribution:
    """Resolve names like delta@0, dderiv:2:delta@0, heaviside@0, abs-x."""
    if name.startswith("dderiv:"):
        parts = name.split(":", 2)
        if len(parts) != 3:
            raise UnknownNameError("distribution", name, _dist_names())
        order = int(parts[1])
        return dist_derivative(distribution(parts[2]), (order,))
    if name.startswith("delta@"):
        return DeltaAt((parse_angle(name[6:]),))
    if name.startswith("heaviside@"):
        return heaviside_at(parse_angle(name[10:]))
    table = {
        "abs-x": lambda: Regular(abs_at(0.0)),
        "sign": lambda: Regular(sign_at(0.0)),
        "ramp": lambda: Regular(ramp(0.0)),
        "absx-bump": lambda: Regular(absx_bump()),
        "x2bump2": lambda: Regular(absx_bump_squared()),
    }
    if name in table:
        return table[name]()
    try:
        return Regular(smooth_function(name))
    except UnknownNameError:
        raise UnknownNameError("distribution", name, _dist_names()) from None


def _dist_names():
    return ["delta@A", "dderiv:K:delta@A", "heaviside@A", "abs-x", "sign",
            "ramp", "absx-bump", "x2bump2"] + sorted(_smooth_table())


def absx_bump() -> PiecewiseSmooth:
    """|x| * bump: continuous, compactly supported, kinked at 0."""
    b = bump_fn()
    left = fn_product(fn_polynomial([0.0, -1.0], name="-x"), b)
    right = fn_product(fn_polynomial([0.0, 1.0], name="x"), b)
    return PiecewiseSmooth("absx-bump", [(-1.0, 0.0, left), (0.0, 1.0, right)])


def absx_bump_squared() -> PiecewiseSmooth:
    """(|x| bump)^2 = x^2 bump^2: the classical square of absx-bump."""
    b = bump_fn()
    f = fn_product(fn_polynomial([0.0, 0.0, 1.0], name="x^2"), fn_product(b, b))
    return PiecewiseSmooth("x2bump2", [(-1.0, 1.0, f)], breakpoints=())


# ---------------------------------------------------------------------------
# test functions


def test_function(name: str) -> TestFunction:
    table = {
        "bump": lambda: TestFunction(bump_fn(), name="bump"),
        "poly-bump": lambda: TestFunction(
            fn_product(fn_polynomial([0.5, 1.0, 1.0], name="0.5+x+x^2"), bump_fn()),
            name="poly-bump"),
        "cos-bump": lambda: TestFunction(
            fn_product(fn_cos(2.0, name="cos2x"), bump_fn()), name="cos-bump"),
        "sin-bump": lambda: TestFunction(
            fn_product(fn_sin(3.0, name="sin3x"), bump_fn()), name="sin-bump"),
        "wide-bump": lambda: TestFunction(
            SmoothFn("wide-bump", lambda x, k: bump_profile()(x / 2, k) / 2**k,
                     support=(-2.0, 2.0)), name="wide-bump"),
    }
    if name not in table:
        raise UnknownNameError("test function", name, sorted(table))
    return table[name]()


# ---------------------------------------------------------------------------
# vector fields


def vector_field(name: str) -> VectorField:
    table = {
        "unit": lambda: VectorField((fn_constant(1.0),), "rn", "unit"),
        "one-plus-x^2": lambda: VectorField(
            (fn_polynomial([1.0, 0.0, 1.0], name="1+x^2"),), "rn", "one-plus-x^2"),
        "x-field": lambda: VectorField(
            (fn_polynomial([0.0, 1.0], name="x"),), "rn", "x-field"),
    }
    if name not in table:
        raise UnknownNameError("vector field", name, sorted(table))
    return table[name]()


def circle_field(name: str) -> VectorField:
    table = {
        "const-1": lambda: VectorField((fn_constant(1.0),), "s1", "const-1"),
        "sin-theta": lambda: VectorField((fn_sin(name="sin"),), "s1", "sin-theta"),
        "cos-theta": lambda: VectorField((fn_cos(name="cos"),), "s1", "cos-theta"),
    }
    if name not in table:
        raise UnknownNameError("circle field", name, sorted(table))
    return table[name]()


# ---------------------------------------------------------------------------
# circle distributions and test forms


def circle_distribution(name: str) -> Distribution:
    if name.startswith("delta@"):
        return DeltaAt((parse_angle(name[6:]),))
    if name.startswith("dderiv:"):
        parts = name.split(":", 2)
        return dist_derivative(circle_distribution(parts[2]), (int(parts[1]),))
    table = {
        "cos": lambda: Regular(fn_cos(name="cos")),
        "sin": lambda: Regular(fn_sin(name="sin")),
        "two-plus-cos": lambda: Regular(fn_sum(fn_constant(2.0), fn_cos(name="cos"),
                                               name="2+cos")),
    }
    if name not in table:
        raise UnknownNameError("circle distribution", name,
                               ["delta@A", "dderiv:K:delta@A"] + sorted(table))
    return table[name]()


def circle_form(name: str) -> NFormS1:
    table = {
        "uniform": lambda: NFormS1(fn_constant(1.0), "uniform"),
        "two-plus-cos": lambda: NFormS1(
            fn_sum(fn_constant(2.0), fn_cos(name="cos"), name="2+cos"), "two-plus-cos"),
        "one-plus-halfsin2": lambda: NFormS1(
            fn_sum(fn_constant(1.0), fn_sin(2.0, name="sin2"), wg=0.5,
                   name="1+0.5sin2"), "one-plus-halfsin2"),
    }
    if name not in table:
        raise UnknownNameError("circle form", name, sorted(table))
    return table[name]()
