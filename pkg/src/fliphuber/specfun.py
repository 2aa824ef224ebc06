"""Numerically stable special functions shared by every other module.

All tail probabilities go through the scaled complementary error function
(or its log), never through ``1 - Phi``: the privacy-profile formulas
subtract pairs of nearly equal Gaussian tails and would lose every digit
to cancellation otherwise.

Everything here is pure and accepts scalars or numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Below this probability ndtri is unreliable; switch to the log-domain solver.
_NDTRI_FLOOR = 1e-280


def std_normal_sf(x):
    """Survival function Q(x) of the standard normal.

    Saturates to 0/1 beyond the representable range instead of raising.
    """
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)
    return out if out.ndim else float(out)


def std_normal_cdf(x):
    """CDF Phi(x) of the standard normal."""
    out = 0.5 * special.erfc(-np.asarray(x, dtype=float) / _SQRT2)
    return out if out.ndim else float(out)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / SQRT_2PI
    return out if out.ndim else float(out)


def log_std_normal_sf(x):
    """log Q(x), finite for any representable x (no -inf saturation)."""
    x = np.asarray(x, dtype=float)
    out = special.log_ndtr(-x)
    return out if out.ndim else float(out)


def erfcx(x):
    """Scaled complementary error function exp(x^2) erfc(x)."""
    return special.erfcx(x)


def std_normal_sf_inv(p: float) -> float:
    """Inverse survival function: the x with Q(x) = p, for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    if p < _NDTRI_FLOOR:
        return std_normal_sf_inv_from_log(math.log(p))
    return -float(special.ndtri(p))


def std_normal_sf_inv_from_log(log_p: float) -> float:
    """The x with log Q(x) = log_p, valid for arbitrarily small tails.

    Newton iteration on log Q (strictly decreasing, smooth), seeded with the
    asymptotic Q(x) ~ phi(x)/x inversion. Used where Q^{-1} of an underflowing
    probability is needed (e.g. stochastic-dominance means at extreme
    parameter ratios).
    """
    if not log_p < 0.0:
        raise ValueError(f"log-probability must be negative, got {log_p!r}")
    if log_p > math.log(_NDTRI_FLOOR):
        return -float(special.ndtri(math.exp(log_p)))
    # Q(x) ~ phi(x)/x  =>  log_p ~ -x^2/2 - log x - log sqrt(2pi)
    x = math.sqrt(-2.0 * (log_p + LOG_SQRT_2PI))
    for _ in range(60):
        f = float(special.log_ndtr(-x)) - log_p
        # d/dx log Q(x) = -phi(x)/Q(x)
        dlog = -math.exp(-0.5 * x * x - LOG_SQRT_2PI - float(special.log_ndtr(-x)))
        step = f / dlog
        x -= step
        if abs(step) <= 1e-14 * max(1.0, abs(x)):
            break
    return x


def erfi(x):
    """Imaginary error function erfi(x) = (2/sqrt(pi)) * int_0^x exp(r^2) dr.

    Raises for |x| > 26, beyond which the value overflows double range.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > 26.0):
        raise OverflowError("erfi overflows double range for |x| > 26")
    out = special.erfi(arr)
    return out if out.ndim else float(out)


def tail_gap(eps, x1, x2):
    """Q(x1) - e^eps * Q(x2), evaluated without catastrophic cancellation.

    This is the recurring building block of every closed-form privacy
    profile. Both tails are taken in the log domain and the difference is
    formed as Q(x1) * (1 - exp(eps + log Q(x2) - log Q(x1))), which keeps
    full relative accuracy when the two terms nearly cancel. The result is
    clamped to [0, 1]; tiny negative values from roundoff collapse to 0.
    """
    eps = np.asarray(eps, dtype=float)
    lq1 = special.log_ndtr(-np.asarray(x1, dtype=float))
    lq2 = special.log_ndtr(-np.asarray(x2, dtype=float))
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(eps + lq2 - lq1)
        out = np.exp(lq1) * (-np.expm1(np.minimum(eps + lq2 - lq1, 700.0)))
        out = np.where(ratio >= 1.0, 0.0, out)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)
