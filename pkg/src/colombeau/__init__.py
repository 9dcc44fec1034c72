"""Numerical laboratory for Colombeau generalized functions.

Embed distributions on R^n (n <= 2) and on the circle into the algebra of
mollifier-parameterized smooth families, multiply and differentiate them,
certify moderateness and negligibility empirically, and compute association
limits against analytic oracles.
"""

from .quadrature import QuadratureError, integrate, integrate_2d, default_tol
from .mollifier import (
    BumpProfile,
    Mollifier1D,
    MollifierND,
    MollifierConstructionError,
    ScaledTranslatedKernel,
    build_mollifier,
    kernel,
    kernel_derivative,
    moments,
)
from .functions import UnsupportedOrderError
from .distributions import (
    DeltaAt,
    Derivative,
    Distribution,
    LinComb,
    Regular,
    SmoothMultiple,
    TestFunction,
    VectorField,
    delta,
    dist_derivative,
    heaviside_at,
    lie_derivative_dist,
    pair,
)
from .genfunc import EvalContext, GenFuncExpr, evaluate, iota, partial, product, sigma, tree_sum
from .asymptotics import (
    CompactRegion,
    EpsGrid,
    OrderEstimate,
    check_moderate_rn,
    check_negligible_rn,
    estimate_order,
    noderiv_shortcut,
    sup_on_compact,
)
from .association import associate, check_lie_assoc, check_product_compat, weak_pairing

__version__ = "0.1.0"
