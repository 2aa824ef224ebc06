"""The flipped Huber distribution FH(alpha, gamma^2).

The density is the Boltzmann-Gibbs form exp(-rho_alpha(t)/gamma^2)/kappa,
where rho_alpha is the flipped Huber loss: absolute-valued (Laplace-like)
inside [-alpha, alpha] and quadratic (Gaussian-like) outside. alpha = 0
recovers the Gaussian N(0, gamma^2); alpha -> inf approaches Laplace.

Numerical strategy
------------------
Every formula in the literature carries a factor exp(alpha^2 / 2 gamma^2),
which overflows long before the parameter ranges used in calibration are
exhausted (b = alpha/gamma reaches 150/0.02 here). All internal quantities
are therefore expressed through the *scaled* normalizer

    omega_scaled = omega * exp(-b^2/2)
                 = 2 sqrt(2 pi) Q(b) exp(-b^2/2) + (2/b) (1 - exp(-b^2)),

which is well-conditioned for every b >= 0, and through expm1/log1p
rearrangements of each branch. Ratios b below 1e-6 are routed to the exact
Gaussian formulas: the two distributions then agree to ~b^2/2 relative
error (< 5e-13), far below every accuracy contract in this package, and
the removable 1/b singularities never materialize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import ndtri as _ndtri

from .specfun import (
    LOG_SQRT_2PI,
    SQRT_2PI,
    erfcx,
    log_std_normal_sf,
    std_normal_sf,
    std_normal_sf_inv,
    std_normal_sf_inv_from_log,
)

# Below this alpha/gamma ratio the distribution is Gaussian to < 1e-12.
GAUSSIAN_RATIO_CUTOFF = 1e-6

_SQRT2 = math.sqrt(2.0)
_LOG_NDTRI_CUTOFF = math.log(1e-280)


@dataclass(frozen=True)
class FHParams:
    """Parameter pair (alpha, gamma) of the flipped Huber distribution.

    alpha >= 0 is the transition point between the absolute-valued centre
    and the quadratic tail (same units as the noise); gamma > 0 is the
    scale.
    """

    alpha: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma!r}")

    @property
    def ratio(self) -> float:
        """b = alpha / gamma, the shape parameter everything depends on."""
        return self.alpha / self.gamma


def flipped_huber_loss(t, alpha: float):
    """alpha*|t| for |t| <= alpha, (t^2 + alpha^2)/2 beyond; even and convex."""
    if alpha < 0.0:
        raise ValueError("alpha must be >= 0")
    t = np.asarray(t, dtype=float)
    at = np.abs(t)
    out = np.where(at <= alpha, alpha * at, 0.5 * (t * t + alpha * alpha))
    return out if out.ndim else float(out)


def omega_scaled(b: float) -> float:
    """omega * exp(-b^2/2), stable for all b >= 0; equals sqrt(2 pi) at b = 0."""
    if b < 0.0:
        raise ValueError("b must be >= 0")
    if b < GAUSSIAN_RATIO_CUTOFF:
        return SQRT_2PI
    # Q(b) exp(-b^2/2) = erfcx(b/sqrt 2) exp(-b^2) / 2
    tail = SQRT_2PI * erfcx(b / _SQRT2) * math.exp(-b * b)
    centre = 2.0 * (-math.expm1(-b * b)) / b
    return tail + centre


def omega(b: float) -> float:
    """The normalizer omega = 2 [sqrt(2 pi) Q(b) + (2/b) sinh(b^2/2)].

    Always >= sqrt(2 pi), with equality in the Gaussian limit b = 0.
    Overflows to inf for b above ~37.6; internal code uses omega_scaled.
    """
    ws = omega_scaled(b)
    with np.errstate(over="ignore"):
        return float(ws * np.exp(0.5 * b * b))


class FlippedHuber:
    """Immutable flipped Huber distribution with cached normalizers.

    All methods are pure and accept scalars or arrays; sampling takes an
    explicit seed so parallel workers can hold independent instances.
    """

    def __init__(self, params: FHParams):
        self.params = params
        self.alpha = params.alpha
        self.gamma = params.gamma
        self.b = params.ratio
        self.is_gaussian = self.b < GAUSSIAN_RATIO_CUTOFF
        self.omega_scaled = omega_scaled(self.b)
        # kappa = gamma * omega * exp(-b^2/2)
        self.kappa = self.gamma * self.omega_scaled
        self.log_kappa = math.log(self.gamma) + math.log(self.omega_scaled)

    @classmethod
    def from_values(cls, alpha: float, gamma: float) -> "FlippedHuber":
        return cls(FHParams(float(alpha), float(gamma)))

    @property
    def omega(self) -> float:
        return omega(self.b)

    # ----------------------------------------------------------------- density

    def loss(self, t):
        return flipped_huber_loss(t, self.alpha)

    def log_pdf(self, t):
        arr = np.asarray(t, dtype=float)
        at = np.abs(arr)
        a = self.alpha
        loss = np.where(at <= a, a * at, 0.5 * (arr * arr + a * a))
        out = -loss / (self.gamma * self.gamma) - self.log_kappa
        return out if np.ndim(t) else float(out)

    def pdf(self, t):
        out = np.exp(self.log_pdf(t))
        return out if np.ndim(t) else float(out)

    # ------------------------------------------------------------ distribution

    def survival(self, t):
        """P{T > t} without cancellation in either branch.

        Centre branch (0 <= t <= alpha) uses the all-positive rearrangement
        [exp(-alpha t/gamma^2) - exp(-b^2) + sqrt(2 pi) b Q(b) exp(-b^2/2)]
        / (b omega_scaled); the upper tail is sqrt(2 pi)/omega * Q(t/gamma)
        evaluated in the log domain.
        """
        if self.is_gaussian:
            out = std_normal_sf(np.asarray(t, dtype=float) / self.gamma)
            return out if np.ndim(t) else float(out)
        tt = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        out = np.empty_like(tt)

        neg = tt < 0.0
        u = np.abs(tt)
        centre = u <= self.alpha
        b = self.b

        # survival on [0, alpha], as a sum of nonnegative terms
        bw = b * self.omega_scaled
        qb_scaled = SQRT_2PI * b * 0.5 * erfcx(b / _SQRT2) * math.exp(-b * b)
        out[centre] = (
            np.exp(-self.alpha * u[centre] / (self.gamma * self.gamma))
            - math.exp(-b * b)
            + qb_scaled
        ) / bw
        # upper tail: sqrt(2 pi)/omega * Q(u/gamma), in logs
        out[~centre] = np.exp(
            LOG_SQRT_2PI
            - 0.5 * b * b
            - math.log(self.omega_scaled)
            + log_std_normal_sf(u[~centre] / self.gamma)
        )
        # negative arguments by symmetry: S(t) = 1 - S(-t)
        out[neg] = 1.0 - out[neg]
        return out.reshape(np.shape(t)) if np.ndim(t) else float(out[0])

    def log_survival(self, t):
        """log P{T > t}; exact in the upper tail, log of the stable form elsewhere."""
        if self.is_gaussian:
            out = log_std_normal_sf(np.asarray(t, dtype=float) / self.gamma)
            return out if np.ndim(t) else float(out)
        tt = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        out = np.empty_like(tt)
        upper = tt > self.alpha
        out[upper] = (
            LOG_SQRT_2PI
            - 0.5 * self.b * self.b
            - math.log(self.omega_scaled)
            + log_std_normal_sf(tt[upper] / self.gamma)
        )
        out[~upper] = np.log(self.survival(tt[~upper]))
        return out.reshape(np.shape(t)) if np.ndim(t) else float(out[0])

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = self.survival(-t)
        return out

    def quantile(self, u):
        """Inverse CDF via the two-branch closed form.

        Logarithmic branch when min(u, 1-u) >= (sqrt(2 pi)/omega) Q(b)
        (the sample lands in the Laplace-like centre), Gaussian-tail branch
        otherwise. Ties go to the logarithmic branch; the branches agree at
        the boundary to rounding.
        """
        u_in = np.asarray(u, dtype=float)
        if np.any((u_in <= 0.0) | (u_in >= 1.0)):
            raise ValueError("quantile argument must lie strictly inside (0, 1)")
        if self.is_gaussian:
            out = -self.gamma * np.asarray(std_normal_sf_inv_vec(u_in))
            # Q^{-1}(u) = -Phi^{-1}(u); quantile = gamma * Phi^{-1}(u)
            return out if out.ndim else float(out)

        uu = np.atleast_1d(u_in).ravel().astype(float)
        w = np.abs(2.0 * uu - 1.0)
        sign = np.sign(2.0 * uu - 1.0)
        b = self.b
        ws = self.omega_scaled
        qb_scaled = SQRT_2PI * 0.5 * erfcx(b / _SQRT2) * math.exp(-b * b)  # Q(b) e^{-b^2/2}
        thresh = 1.0 - 2.0 * qb_scaled / ws
        a_fac = 0.5 * b * ws
        out = np.empty_like(uu)

        log_branch = w <= thresh
        out[log_branch] = (
            -(self.gamma * self.gamma / self.alpha)
            * sign[log_branch]
            * np.log1p(-a_fac * w[log_branch])
        )

        gb = ~log_branch
        if np.any(gb):
            log_p = (
                np.log1p(-w[gb])
                + math.log(ws)
                + 0.5 * b * b
                - math.log(2.0 * SQRT_2PI)
            )
            x = np.empty(log_p.shape)
            direct = log_p > _LOG_NDTRI_CUTOFF
            x[direct] = std_normal_sf_inv_vec(np.exp(log_p[direct]))
            for i in np.flatnonzero(~direct):
                x[i] = std_normal_sf_inv_from_log(float(log_p[i]))
            out[gb] = self.gamma * sign[gb] * x

        return out.reshape(np.shape(u_in)) if np.ndim(u_in) else float(out[0])

    # --------------------------------------------------------------- sampling

    def sample(self, n: int, seed) -> np.ndarray:
        """n i.i.d. draws via inversion of uniforms from a Philox stream.

        Philox is counter-based, so distinct seeds give independent,
        reproducible streams; the same seed always yields the same output.
        """
        if n < 0:
            raise ValueError("sample count must be >= 0")
        rng = np.random.Generator(np.random.Philox(seed))
        if n == 0:
            return np.empty(0, dtype=float)
        # uniforms strictly inside (0, 1): (k + 0.5) / 2^53
        u = (rng.integers(0, 1 << 53, size=n, dtype=np.uint64) + 0.5) * (2.0**-53)
        return np.asarray(self.quantile(u), dtype=float)

    # ---------------------------------------------------------------- moments

    def variance(self) -> float:
        """gamma^2 [1 - (8 / (b^3 omega)) (a cosh a - sinh a)], a = b^2/2.

        Always <= gamma^2; the deficit term is evaluated from the series of
        a cosh a - sinh a for small a and from the exp(-a)-scaled form
        otherwise, so neither limit loses digits.
        """
        if self.is_gaussian:
            return self.gamma * self.gamma
        b = self.b
        a = 0.5 * b * b
        g = _cosh_deficit_scaled(a)  # (a cosh a - sinh a) e^{-a}
        deficit = 8.0 * g / (b * b * b * self.omega_scaled)
        return self.gamma * self.gamma * (1.0 - deficit)

    def fisher_information(self) -> float:
        """(1/gamma^2) [1 + (4/(b omega)) (a e^a - sinh a)], a = b^2/2; >= 1/gamma^2."""
        if self.is_gaussian:
            return 1.0 / (self.gamma * self.gamma)
        b = self.b
        a = 0.5 * b * b
        # (a e^a - sinh a) e^{-a} = (a cosh a - sinh a) e^{-a} + a (1 - e^{-2a})/2
        f2 = _cosh_deficit_scaled(a) + 0.5 * a * (-math.expm1(-2.0 * a))
        return (1.0 + 4.0 * f2 / (b * self.omega_scaled)) / (self.gamma * self.gamma)

    def normalized_fisher_information(self) -> float:
        """Fisher information times variance; 1 for Gaussian, 2 for Laplace."""
        return self.fisher_information() * self.variance()

    # -------------------------------------------------------------------- MGF

    def mgf_ratio(self, s):
        """M(s) * exp(-gamma^2 s^2 / 2); <= 1 by sub-Gaussianity.

        Evaluated as [term(m+) + term(m-) + sqrt(2 pi) e^{-b^2/2}
        (Q(m+) + Q(m-))] / omega_scaled with m+- = b +- gamma*s and
        term(m) = [e^{-(m-b)^2/2} - e^{-(m^2+b^2)/2}] / m, whose removable
        singularity at m = 0 is handled by the expm1 form.
        """
        s = np.asarray(s, dtype=float)
        if self.is_gaussian:
            out = np.ones_like(s, dtype=float)
            return out if out.ndim else 1.0
        b = self.b
        mp = b + self.gamma * s
        mm = b - self.gamma * s
        total = _mgf_term(mp, b) + _mgf_term(mm, b)
        total += (
            SQRT_2PI
            * math.exp(-0.5 * b * b)
            * (std_normal_sf(mp) + std_normal_sf(mm))
        )
        out = total / self.omega_scaled
        return out if out.ndim else float(out)

    def mgf(self, s):
        """Moment generating function E[e^{sT}]; raises if it overflows."""
        s = np.asarray(s, dtype=float)
        c = 0.5 * (self.gamma * s) ** 2
        with np.errstate(over="raise"):
            try:
                out = self.mgf_ratio(s) * np.exp(c)
            except FloatingPointError as exc:
                raise OverflowError("mgf exceeds double range") from exc
        return out if out.ndim else float(out)

    def sub_gaussian_margin(self, s_grid):
        """exp(gamma^2 s^2/2) - M(s) per grid point; nonnegative by sub-Gaussianity."""
        s = np.asarray(s_grid, dtype=float)
        if self.is_gaussian:
            out = np.zeros_like(s)
            return out if out.ndim else 0.0
        c = 0.5 * (self.gamma * s) ** 2
        out = np.exp(c) * (1.0 - self.mgf_ratio(s))
        return out if out.ndim else float(out)

    # -------------------------------------------------------- stochastic order

    @cached_property
    def dominance_mean(self) -> float:
        """theta = gamma Q^{-1}(sqrt(pi/2)/omega): FH is stochastically below N(theta, gamma^2).

        Existence follows from omega >= sqrt(2 pi) (the argument is <= 1/2,
        so theta >= 0); evaluated through log Q for extreme ratios.
        """
        if self.is_gaussian:
            return 0.0
        log_arg = 0.5 * math.log(math.pi / 2.0) - 0.5 * self.b * self.b - math.log(
            self.omega_scaled
        )
        if log_arg > _LOG_NDTRI_CUTOFF:
            return self.gamma * std_normal_sf_inv(math.exp(log_arg))
        return self.gamma * std_normal_sf_inv_from_log(log_arg)


def std_normal_sf_inv_vec(p):
    """Vectorized Q^{-1} for probabilities comfortably inside (0, 1)."""
    return -_ndtri(np.asarray(p, dtype=float))


def _cosh_deficit_scaled(a: float) -> float:
    """(a cosh a - sinh a) * exp(-a), accurate for all a >= 0."""
    if a < 1.0:
        # sum_{k>=1} 2k a^{2k+1} / (2k+1)!
        term = a**3 / 3.0
        total = term
        k = 1
        while True:
            k += 1
            term *= a * a * (2 * k) / ((2 * k - 2) * (2 * k) * (2 * k + 1))
            total += term
            if term < 1e-18 * total or k > 40:
                break
        return total * math.exp(-a)
    e2 = math.exp(-2.0 * a)
    return 0.5 * (a * (1.0 + e2) - (1.0 - e2))


def _mgf_term(m, b: float):
    """[exp(-(m-b)^2/2) - exp(-(m^2+b^2)/2)] / m with the m -> 0 limit b e^{-b^2/2}."""
    m = np.asarray(m, dtype=float)
    small = np.abs(m * b) < 1.0
    out = np.empty_like(m)
    ms = m[small]
    out[small] = np.exp(-0.5 * (ms * ms + b * b)) * np.where(
        ms == 0.0, b, np.expm1(ms * b) / np.where(ms == 0.0, 1.0, ms)
    )
    ml = m[~small]
    out[~small] = (np.exp(-0.5 * (ml - b) ** 2) - np.exp(-0.5 * (ml * ml + b * b))) / ml
    return out


def solve_alpha_for_variance(gamma: float, target: float) -> float:
    """The alpha making FH(alpha, gamma^2) have the given variance.

    Variance decreases monotonically from gamma^2 (alpha = 0) towards 0 as
    alpha grows, so a bisection on log alpha suffices. Raises if the target
    is not inside (0, gamma^2].
    """
    if not 0.0 < target <= gamma * gamma:
        raise ValueError(
            f"target variance must lie in (0, gamma^2]; got {target!r} with gamma={gamma!r}"
        )
    if target == gamma * gamma:
        return 0.0
    lo, hi = 1e-10 * gamma, 1e8 * gamma
    f = lambda a: FlippedHuber.from_values(a, gamma).variance() - target
    if f(lo) < 0.0 or f(hi) > 0.0:
        raise ValueError("variance target not bracketed; gamma too small for target")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if f(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    return 0.5 * (lo + hi)
