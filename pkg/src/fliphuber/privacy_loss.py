"""Centered privacy-loss algebra of the flipped Huber mechanism.

The centered loss zeta~_d(t) = [rho_a(t + d/2) - rho_a(t - d/2)] / gamma^2
is a five-piece "corrugated" odd function: linear with slope 2 alpha/gamma^2
at the origin, flat at alpha*d/gamma^2 over the Laplace plateau (when it
exists), quadratic across the transition bands, and exactly t*d/gamma^2 -
the Gaussian loss - once |t| >= alpha + |d|/2.

The partial inverse follows the right-continuous convention
sup{t : zeta~(t) <= nu}, so on the plateau it returns the supremum end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import FHParams


@dataclass(frozen=True)
class SensitivityProfile:
    """Query dimension and its per-coordinate / l1 / l2 sensitivities."""

    k: int
    delta_inf: float
    delta_1: float
    delta_2: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("dimension k must be >= 1")
        for name in ("delta_inf", "delta_1", "delta_2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        tol = 1e-12
        if not (
            self.delta_inf <= self.delta_2 * (1 + tol)
            and self.delta_2 <= self.delta_1 * (1 + tol)
        ):
            raise ValueError("sensitivities must satisfy delta_inf <= delta_2 <= delta_1")
        if self.delta_2 > math.sqrt(self.k) * self.delta_inf * (1 + tol):
            raise ValueError("delta_2 exceeds sqrt(k) * delta_inf (norm equivalence)")
        if self.delta_1 > self.k * self.delta_inf * (1 + tol):
            raise ValueError("delta_1 exceeds k * delta_inf (norm equivalence)")

    @classmethod
    def worst_case(cls, k: int, delta_inf: float) -> "SensitivityProfile":
        """Edge case of the norm equivalence: delta_2 = sqrt(k) d, delta_1 = k d."""
        return cls(k, delta_inf, k * delta_inf, math.sqrt(k) * delta_inf)

    @classmethod
    def one_dim(cls, delta: float) -> "SensitivityProfile":
        return cls(1, delta, delta, delta)


@dataclass(frozen=True)
class LossBoundCoeffs:
    """Coefficients of the affine majorant slope_scale * t.d + offset."""

    slope_scale: float
    offset: float

    def __post_init__(self):
        if self.offset < 0.0:
            raise ValueError("offset must be >= 0")


def centered_loss(t, d: float, params: FHParams):
    """The centered privacy loss zeta~_d(t); odd in t and in d.

    Vectorized in t. Case boundaries use half-open intervals with the
    closed end owning the boundary point; adjacent pieces agree there, so
    the convention is observationally irrelevant (and is pinned by the
    density-ratio tests).
    """
    shape = np.shape(t)
    t = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
    if d == 0.0:
        out = np.zeros_like(t)
        return out.reshape(shape) if shape else 0.0
    sd = math.copysign(1.0, d)
    ad = abs(d)
    a = params.alpha
    g2 = params.gamma * params.gamma
    h = 0.5 * ad

    u = np.abs(t)
    st = np.sign(t)
    out = np.empty_like(u)

    if a == 0.0:
        out = t * d / g2
        return out.reshape(shape) if shape else float(out[0])

    # tail and, when alpha < |d|/2, the central linear window
    linear = u >= a + h
    if a < h:
        linear = linear | (u < h - a)
    # quadratic band around the ridge/groove at +-d/2
    band_hi = (~linear) & (u >= max(a - h, h))
    # remaining pieces depend on the case ordering of alpha vs |d|/2
    if a >= ad:
        plateau = (~linear) & (~band_hi) & (u >= h)
        origin = (~linear) & (~band_hi) & (~plateau)
        band_lo = np.zeros_like(origin)
    elif a >= h:
        band_lo = (~linear) & (~band_hi) & (u >= a - h)
        origin = (~linear) & (~band_hi) & (~band_lo)
        plateau = np.zeros_like(origin)
    else:
        band_lo = (~linear) & (~band_hi)
        origin = np.zeros_like(band_lo)
        plateau = np.zeros_like(band_lo)

    out[linear] = t[linear] * d / g2
    out[band_hi] = st[band_hi] * (0.5 * sd * (u[band_hi] - a + h) ** 2 + a * d) / g2
    if np.any(band_lo):
        out[band_lo] = st[band_lo] * (0.5 * sd * (u[band_lo] + a + h) ** 2 - a * d) / g2
    if np.any(plateau):
        out[plateau] = st[plateau] * sd * a * ad / g2
    if np.any(origin):
        out[origin] = 2.0 * sd * a * t[origin] / g2

    return out.reshape(shape) if shape else float(out[0])


def centered_loss_inverse(nu, delta_inf: float, params: FHParams):
    """Right-continuous partial inverse of zeta~ at sensitivity delta_inf.

    Four closed-form branches; on the plateau value it returns the
    supremum end of the flat segment. Odd in nu as printed, which is the
    evaluation the log-concave profile formula requires for negative
    arguments as well.
    """
    shape = np.shape(nu)
    nu = np.atleast_1d(np.asarray(nu, dtype=float)).ravel()
    a = params.alpha
    g2 = params.gamma * params.gamma
    dlt = delta_inf
    if dlt <= 0.0:
        raise ValueError("delta_inf must be > 0")

    av = np.abs(nu)
    if a == 0.0:
        out = g2 * nu / dlt
        return out.reshape(shape) if shape else float(out[0])

    thr1 = (min(2.0 * a - dlt, dlt)) * a / g2  # <= 0 when alpha <= delta/2
    start2 = ((max(2.0 * a, dlt)) ** 2 - 2.0 * a * dlt) / (2.0 * g2)
    nu1 = (max(dlt - a, 0.0) ** 2 + 2.0 * a * dlt) / (2.0 * g2)
    nu2 = (dlt + 2.0 * a) * dlt / (2.0 * g2)

    out = np.empty_like(av)
    b1 = av < thr1
    b2 = (~b1) & (av >= start2) & (av < nu1)
    b3 = (~b1) & (~b2) & (av >= nu1) & (av < nu2)
    rest = ~(b1 | b2 | b3)

    out[b1] = g2 * nu[b1] / (2.0 * a)
    sg = np.sign(nu)
    out[b2] = sg[b2] * (np.sqrt(2.0 * (g2 * av[b2] + a * dlt)) - 0.5 * dlt - a)
    out[b3] = sg[b3] * (np.sqrt(np.maximum(2.0 * (g2 * av[b3] - a * dlt), 0.0)) - 0.5 * dlt + a)
    out[rest] = g2 * nu[rest] / dlt
    return out.reshape(shape) if shape else float(out[0])


def r_delta(alpha: float, delta_inf: float) -> float:
    """The gauge alpha^2 - ([alpha - delta]_+)^2; nondecreasing in alpha."""
    if alpha < 0.0 or delta_inf <= 0.0:
        raise ValueError("need alpha >= 0 and delta_inf > 0")
    if alpha < delta_inf:
        return alpha * alpha
    return 2.0 * alpha * delta_inf - delta_inf * delta_inf


def r_delta_inv(nu: float, delta_inf: float) -> float:
    """Exact functional inverse of r_delta on [0, inf)."""
    if nu < 0.0 or delta_inf <= 0.0:
        raise ValueError("need nu >= 0 and delta_inf > 0")
    if nu < delta_inf * delta_inf:
        return math.sqrt(nu)
    return (nu + delta_inf * delta_inf) / (2.0 * delta_inf)


def affine_bound(
    d_norms: tuple[float, float], sens: SensitivityProfile, params: FHParams
) -> LossBoundCoeffs:
    """Affine majorant of the K-dimensional loss: t.d/g^2 + (|d|_2^2 + K R)/2g^2."""
    l1, l2 = d_norms
    if l1 < 0.0 or l2 < 0.0:
        raise ValueError("norms must be >= 0")
    tol = 1.0 + 1e-12
    if l1 > sens.delta_1 * tol or l2 > sens.delta_2 * tol:
        raise ValueError("difference norms exceed the sensitivity profile")
    g2 = params.gamma * params.gamma
    offset = (l2 * l2 + sens.k * r_delta(params.alpha, sens.delta_inf)) / (2.0 * g2)
    return LossBoundCoeffs(slope_scale=1.0 / g2, offset=offset)
