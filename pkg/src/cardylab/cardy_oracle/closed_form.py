"""Cardy's hypergeometric formula for rectangles, evaluated without any conformal map."""

from __future__ import annotations

import math
from functools import lru_cache

from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import ellipk, ellipkm1

from .triangle import CardyValue

_EXP = -2.0 / 3.0
_ASYMPTOTIC_ASPECT = 200.0


@lru_cache(maxsize=1)
def _beta_thirds() -> float:
    val, _ = quad(lambda t: 1.0, 0.0, 1.0, weight="alg", wvar=(_EXP, _EXP), epsabs=1e-14, epsrel=1e-13)
    return val


def rectangle_eta(aspect: float) -> float:
    """Half-plane corner x in (0, 1/2] whose quadrilateral (0, x, 1, inf) has the given aspect >= 1.

    The aspect (width over height of the rectangle) equals K(1 - x) / K(x).
    """
    if aspect < 1.0:
        raise ValueError("use the dual aspect for aspect < 1")
    if aspect == 1.0:
        return 0.5
    if aspect > _ASYMPTOTIC_ASPECT:
        # K(1-x)/K(x) = (log(16/x)) / (pi/2) * (1 + O(x)); x is far below rounding here
        return math.exp(math.log(16.0) - math.pi * aspect)
    # x decays like 16 exp(-pi * aspect), so search in log x
    y = brentq(lambda y: ellipkm1(math.exp(y)) / ellipk(math.exp(y)) - aspect, -700.0, math.log(0.5), xtol=1e-14, rtol=1e-15)
    return math.exp(y)


def cardy_integral(x: float) -> float:
    """Normalized integral of t^(-2/3) (1-t)^(-2/3) over [0, x] by adaptive quadrature."""
    if x <= 0.0:
        return 0.0
    if x < 1e-200:
        return 3.0 * x ** (1.0 / 3.0) / _beta_thirds()
    if x >= 1.0:
        return 1.0
    val, _ = quad(lambda t: (1.0 - t) ** _EXP, 0.0, x, weight="alg", wvar=(_EXP, 0.0), epsabs=1e-14, epsrel=1e-12)
    return val / _beta_thirds()


def cardy_rectangle(aspect: float) -> CardyValue:
    """Probability of a left-right crossing of a rectangle ``aspect`` times wider than tall.

    Aspects below one use the complementary top-bottom crossing of the
    rotated rectangle, which keeps the root-finding in its well-conditioned
    half.
    """
    aspect = float(aspect)
    if not aspect > 0:
        raise ValueError("aspect must be positive")
    if aspect < 1.0:
        dual = cardy_rectangle(1.0 / aspect)
        return CardyValue(1.0 - dual.value, dual.accuracy)
    if aspect > _ASYMPTOTIC_ASPECT:
        # the integral is 3 x^(1/3) / B(1/3, 1/3) to relative order x; keep x in logs
        return CardyValue(3.0 * math.exp((math.log(16.0) - math.pi * aspect) / 3.0) / _beta_thirds(), 1e-10)
    return CardyValue(cardy_integral(rectangle_eta(aspect)), 1e-10)
