"""Scalar special functions shared across the library.

Standard normal CDF/quantile, the Bernoulli KL divergence and its
integer-rank inversion, plus small numeric helpers (iterated logarithm,
float-safe ceiling). Everything here is a pure function and safe to call
from any thread.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

_SQRT2 = math.sqrt(2.0)

# Relative snap tolerance for ceilings of products like (1-alpha)*(t+1):
# wide enough to absorb accumulated float error, far too narrow to swallow
# a genuinely fractional rank level.
_CEIL_RTOL = 1e-12


def normal_cdf(x):
    """Standard normal CDF Phi(x).

    Accepts a scalar or ndarray; absolute error below 1e-14 everywhere,
    saturating to 0/1 in the far tails.
    """
    if isinstance(x, np.ndarray):
        return 0.5 * _sp.erfc(-x / _SQRT2)
    return 0.5 * math.erfc(-float(x) / _SQRT2)


def normal_pdf(x: float) -> float:
    """Standard normal density phi(x)."""
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Rational approximation coefficients (Acklam's inverse-normal scheme).
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
_ACK_PLOW = 0.02425


def _quantile_seed(p: float) -> float:
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    if p < _ACK_PLOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - _ACK_PLOW:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def normal_quantile(p: float) -> float:
    """Inverse of ``normal_cdf``: the z with Phi(z) = p.

    Rational initial guess polished with Newton steps against ``normal_cdf``,
    giving |Phi(z) - p| well below 1e-9.

    Raises:
        ValueError: if p is not strictly inside (0, 1).
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    z = _quantile_seed(p)
    for _ in range(2):
        err = normal_cdf(z) - p
        dens = normal_pdf(z)
        if dens <= 0.0:
            break
        z -= err / dens
    return z


def iterated_log(x: float) -> float:
    """log(log(x)) for x > 1."""
    if x <= 1.0:
        raise ValueError(f"iterated_log requires x > 1, got {x}")
    return math.log(math.log(x))


def bernoulli_kl(x: float, p: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(x).

    psi(x, p) = p log(p/x) + (1-p) log((1-p)/(1-x)), with the continuity
    conventions 0 log 0 = 0 at p in {0, 1}. Evaluated in log1p form so that
    values near x = p do not cancel away.

    Raises:
        ValueError: for x outside (0, 1) unless p == x, or p outside [0, 1].
    """
    x = float(x)
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if x <= 0.0 or x >= 1.0:
        if p == x:
            return 0.0
        raise ValueError(f"x must lie in (0, 1), got {x}")
    if p == x:
        return 0.0
    if p == 0.0:
        return -math.log1p(-x)
    if p == 1.0:
        return -math.log(x)
    d = p - x
    return p * math.log1p(d / x) + (1.0 - p) * math.log1p(-d / (1.0 - x))


def snap_ceil(value: float) -> int:
    """Smallest integer >= value, snapping values a hair above an integer.

    Products such as (1 - alpha) * (t + 1) routinely land at n + O(eps) in
    floating point; a raw ceil would then overshoot the intended rank by one.
    """
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"cannot take integer ceiling of {v}")
    nearest = round(v)
    if abs(v - nearest) <= _CEIL_RTOL * max(1.0, abs(v)):
        return int(nearest)
    return int(math.ceil(v))


def snap_floor(value: float) -> int:
    """Largest integer <= value, with the same near-integer snapping as snap_ceil."""
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"cannot take integer floor of {v}")
    nearest = round(v)
    if abs(v - nearest) <= _CEIL_RTOL * max(1.0, abs(v)):
        return int(nearest)
    return int(math.floor(v))


def invert_kl_rank(alpha: float, t: int, u: float) -> int | None:
    """Smallest integer rank beta >= (1-alpha)(t+1) with psi(1-alpha, beta/(t+1)) >= u.

    Returns None (the infinite-rank sentinel) when no beta <= t satisfies the
    condition; the prediction set at that step is then the whole space.
    A non-positive u makes the KL condition vacuous, so only the ceiling
    constraint remains.

    The search is a binary search over integers, valid because
    psi(1-alpha, q) is nondecreasing for q >= 1-alpha, followed by a linear
    confirmation of the boundary.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    target = 1.0 - alpha
    denom = t + 1
    beta_min = snap_ceil(target * denom)
    if beta_min > t:
        return None
    if u <= 0.0:
        return beta_min
    if bernoulli_kl(target, t / denom) < u:
        return None
    lo, hi = beta_min, t
    while lo < hi:
        mid = (lo + hi) // 2
        if bernoulli_kl(target, mid / denom) >= u:
            hi = mid
        else:
            lo = mid + 1
    beta = lo
    # linear confirmation of the boundary found by the search
    if bernoulli_kl(target, beta / denom) < u:
        return None
    if beta > beta_min and bernoulli_kl(target, (beta - 1) / denom) >= u:
        raise AssertionError("KL rank inversion lost monotonicity")
    return beta
