"""Exact (epsilon, delta) accounting for the one-dimensional mechanism.

Three independent routes to the same number:

* ``fh_profile_1d`` - the five-case closed form, selected by the epsilon
  ranges of the case table (which tile [0, inf) for every alpha once the
  empty ranges are discarded);
* ``generic_logconcave_profile`` - the survival-function condition that
  holds for any symmetric log-concave noise density, driven by callbacks;
* ``brute_force_profile_1d`` - tail probabilities of the privacy loss
  obtained by bisecting its level sets and integrating the density by
  adaptive quadrature. Used as the definition-level oracle in tests.

All case formulas are rearranged so that exp(alpha^2/2 gamma^2) never
materializes; the e^eps * Q(...) products are formed in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .distribution import (
    GAUSSIAN_RATIO_CUTOFF,
    FHParams,
    FlippedHuber,
)
from .privacy_loss import centered_loss, centered_loss_inverse
from .specfun import LOG_SQRT_2PI, SQRT_2PI, erfcx, log_std_normal_sf, tail_gap

_SQRT2 = math.sqrt(2.0)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


@dataclass(frozen=True)
class PrivacyBudget:
    """Target (epsilon, delta) a mechanism must satisfy."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon!r}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta!r}")


class ProfileMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    NUMERIC_KFOLD = "numeric_kfold"
    SUFFICIENT_BOUND = "sufficient_bound"


@dataclass(frozen=True)
class PrivacyProfileCurve:
    """Tabulated delta(eps) over an epsilon grid, with provenance."""

    eps_grid: np.ndarray
    delta_values: np.ndarray
    method: ProfileMethod
    monotone_tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        eps = np.asarray(self.eps_grid, dtype=float)
        dv = np.asarray(self.delta_values, dtype=float)
        object.__setattr__(self, "eps_grid", eps)
        object.__setattr__(self, "delta_values", dv)
        if eps.shape != dv.shape or eps.ndim != 1:
            raise ValueError("eps_grid and delta_values must be matching 1-d arrays")
        if np.any(np.diff(eps) <= 0):
            raise ValueError("eps_grid must be strictly increasing")
        if np.any((dv < 0.0) | (dv > 1.0)):
            raise ValueError("delta values must lie in [0, 1]")
        if np.any(np.diff(dv) > self.monotone_tol):
            raise ValueError("delta(eps) must be nonincreasing within tolerance")

    def delta_at(self, eps: float) -> float:
        """Linear interpolation; clamps to 1 below the grid, last value above."""
        return float(
            np.interp(eps, self.eps_grid, self.delta_values, left=1.0, right=self.delta_values[-1])
        )


def _omega_scaled_arr(b):
    """omega * exp(-b^2/2) for an array of ratios b >= 0."""
    b = np.asarray(b, dtype=float)
    small = b < GAUSSIAN_RATIO_CUTOFF
    bs = np.where(small, 1.0, b)
    tail = SQRT_2PI * erfcx(bs / _SQRT2) * np.exp(-bs * bs)
    centre = 2.0 * (-np.expm1(-bs * bs)) / bs
    return np.where(small, SQRT_2PI, tail + centre)


def fh_profile_1d(epsilon, params: FHParams, delta_inf: float):
    """Exact privacy profile delta(epsilon) of the 1-D mechanism.

    Accepts scalar or array epsilon (and is used internally with array
    alpha/gamma for calibration grids via :func:`fh_profile_grid`).
    """
    return fh_profile_grid(epsilon, params.alpha, params.gamma, delta_inf)


def fh_profile_grid(epsilon, alpha, gamma, delta_inf: float):
    """Vectorized five-case profile, broadcasting over epsilon/alpha/gamma."""
    if delta_inf <= 0.0:
        raise ValueError("delta_inf must be > 0")
    eps, al, ga = np.broadcast_arrays(
        np.asarray(epsilon, dtype=float),
        np.asarray(alpha, dtype=float),
        np.asarray(gamma, dtype=float),
    )
    scalar = eps.ndim == 0
    eps = np.atleast_1d(eps).ravel().astype(float)
    al = np.atleast_1d(al).ravel().astype(float)
    ga = np.atleast_1d(ga).ravel().astype(float)
    if np.any(eps < 0.0):
        raise ValueError("epsilon must be >= 0")
    dlt = float(delta_inf)

    g2 = ga * ga
    b = al / ga
    ws = _omega_scaled_arr(b)
    nu1 = (np.maximum(dlt - al, 0.0) ** 2 + 2.0 * al * dlt) / (2.0 * g2)
    nu2 = (dlt + 2.0 * al) * dlt / (2.0 * g2)

    case_v = eps >= nu2
    case_iv = (~case_v) & (eps >= nu1)
    below = ~(case_v | case_iv)
    case_i = below & (al < 0.5 * dlt) & (eps < (dlt - 2.0 * al) * dlt / (2.0 * g2))
    case_ii = below & (al > 0.5 * dlt) & (
        eps < np.minimum(2.0 * al - dlt, dlt) * al / g2
    )
    case_iii = below & ~(case_i | case_ii)

    out = np.empty_like(eps)
    log_f = LOG_SQRT_2PI - 0.5 * b * b - np.log(ws)  # log of sqrt(2 pi)/omega

    for mask in (case_i, case_v):
        if not np.any(mask):
            continue
        x1 = ga[mask] * eps[mask] / dlt - dlt / (2.0 * ga[mask])
        x2 = x1 + dlt / ga[mask]
        gap = tail_gap(eps[mask], x1, x2)
        f = np.exp(log_f[mask])
        if mask is case_i:
            out[mask] = (1.0 - f) + f * gap
        else:
            out[mask] = f * gap

    if np.any(case_ii):
        m = case_ii
        c = 0.5 * eps[m] - al[m] * dlt / (2.0 * g2[m])
        dd = 1.0 - _SQRT_HALF_PI * b[m] * erfcx(b[m] / _SQRT2)
        out[m] = 0.5 + (
            1.0 - 2.0 * np.exp(c) + np.exp(eps[m] - b[m] * b[m]) * dd
        ) / (b[m] * ws[m])

    if np.any(case_iii):
        m = case_iii
        sp = np.sqrt(2.0 * (g2[m] * eps[m] + al[m] * dlt))
        x3 = (al[m] / g2[m]) * (sp - dlt - al[m])
        tail = np.exp(
            np.minimum(eps[m] + log_std_normal_sf((sp - al[m]) / ga[m]) + log_f[m], 700.0)
        )
        out[m] = 0.5 + (-np.expm1(x3)) / (b[m] * ws[m]) - tail

    if np.any(case_iv):
        m = case_iv
        sm = np.sqrt(np.maximum(2.0 * (g2[m] * eps[m] - al[m] * dlt), 0.0))
        x4 = (al[m] / g2[m]) * (dlt - al[m] - sm)
        tail = np.exp(
            np.minimum(eps[m] + log_std_normal_sf((sm + al[m]) / ga[m]) + log_f[m], 700.0)
        )
        out[m] = 0.5 - (-np.expm1(x4)) / (b[m] * ws[m]) - tail

    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out.reshape(np.broadcast(
        np.asarray(epsilon, dtype=float),
        np.asarray(alpha, dtype=float),
        np.asarray(gamma, dtype=float),
    ).shape)


def is_dp_1d(budget: PrivacyBudget, params: FHParams, delta_inf: float) -> bool:
    """Whether the 1-D mechanism satisfies the budget.

    delta = 0 always fails: the privacy loss of this mechanism is
    unbounded, so pure DP is unattainable at any parameter setting.
    """
    if budget.delta == 0.0:
        return False
    return fh_profile_1d(budget.epsilon, params, delta_inf) <= budget.delta


def generic_logconcave_profile(
    epsilon: float,
    survival_fn: Callable[[float], float],
    loss_inverse_fn: Callable[[float], float],
    delta_inf: float,
) -> float:
    """delta(eps) for any symmetric log-concave noise density.

    Evaluates S(z - delta/2) - e^eps S(z + delta/2) at z = the partial
    inverse of the centered loss; the callbacks must belong to the same
    density. Valid for negative epsilon too (used by the K-fold folding).
    """
    z = loss_inverse_fn(epsilon)
    s1 = float(survival_fn(z - 0.5 * delta_inf))
    s2 = float(survival_fn(z + 0.5 * delta_inf))
    if s2 <= 0.0:
        val = s1
    else:
        val = s1 - math.exp(min(epsilon + math.log(s2), 709.0))
    return min(max(val, 0.0), 1.0)


def fh_generic_profile(epsilon: float, params: FHParams, delta_inf: float) -> float:
    """The generic log-concave route instantiated with flipped Huber callbacks."""
    dist = FlippedHuber(params)
    return generic_logconcave_profile(
        epsilon,
        dist.survival,
        lambda nu: centered_loss_inverse(nu, delta_inf, params),
        delta_inf,
    )


def brute_force_profile_1d(epsilon: float, params: FHParams, d: float) -> float:
    """Definition-level profile: quadrature of the density over loss level sets.

    Independent of both closed forms: uses only the density, the
    monotonicity of the (uncentered) loss zeta_d(t) = zeta~_d(t + d/2) in
    t, bisection to locate the level-set boundaries, and adaptive
    quadrature for the two tail masses.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be >= 0")
    d = abs(d)  # d and -d give identical profiles by symmetry of the density
    if d == 0.0:
        return 0.0
    dist = FlippedHuber(params)
    a, g = params.alpha, params.gamma

    def zeta(t: float) -> float:
        return float(centered_loss(t + 0.5 * d, d, params))

    span = a + d + 14.0 * g + g * g * (epsilon + 1.0) / d
    lo, hi = -span, span
    # inf{t : zeta(t) >= eps}; invariant zeta(lo) < eps <= zeta(hi)
    t_hi = _bisect_boundary(zeta, lo, hi, epsilon, lower_boundary=True)
    # sup{t : zeta(t) <= -eps}; invariant zeta(lo) <= -eps < zeta(hi)
    t_lo = _bisect_boundary(zeta, lo, hi, -epsilon, lower_boundary=False)

    upper_end = max(t_hi, a) + 14.0 * g
    lower_end = min(t_lo, -a) - 14.0 * g
    # breakpoints: loss kinks and the centre spike, whose width is the
    # Laplace scale gamma^2/alpha and can be far narrower than the interval
    scale = g * g / a if a > 0 else g
    marks = sorted(
        {0.0, a, -a, scale, -scale, 5.0 * scale, -5.0 * scale, 25.0 * scale, -25.0 * scale}
    )
    p_hi, _ = integrate.quad(
        dist.pdf, t_hi, upper_end, epsabs=1e-13, epsrel=1e-12, limit=500,
        points=[x for x in marks if t_hi < x < upper_end] or None,
    )
    p_lo, _ = integrate.quad(
        dist.pdf, lower_end, t_lo, epsabs=1e-13, epsrel=1e-12, limit=500,
        points=[x for x in marks if lower_end < x < t_lo] or None,
    )
    val = p_hi - math.exp(min(epsilon, 700.0)) * p_lo if p_lo > 0 else p_hi
    return min(max(val, 0.0), 1.0)


def _bisect_boundary(
    f: Callable[[float], float], lo: float, hi: float, level: float, lower_boundary: bool
) -> float:
    """Boundary of a level set of a nondecreasing function, to 1e-13 * scale.

    lower_boundary=True finds inf{t : f(t) >= level}; False finds
    sup{t : f(t) <= level}. Assumes f(lo) < level < f(hi) up to flats.
    """

    def above(value: float) -> bool:
        # membership of the *upper* side of the boundary being located
        return value >= level if lower_boundary else value > level

    if above(f(lo)):
        return lo
    if not above(f(hi)):
        return hi
    scale = max(abs(lo), abs(hi), 1.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if above(f(mid)):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * scale:
            break
    return hi if lower_boundary else lo
