"""K-dimensional accounting: closed-form sufficient bound and K-fold numeric profile.

The sufficient condition bounds the two tails of the affine loss majorant
through sub-Gaussianity (upper tail) and the stochastic domination of each
coordinate by N(theta, gamma^2) (lower tail). The numeric route composes
the exact one-dimensional profile K times by iterated integration against
the noise density, which is the exact K-dimensional profile of the
i.i.d.-coordinate mechanism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .accountant_1d import (
    PrivacyProfileCurve,
    ProfileMethod,
    fh_generic_profile,
)
from .distribution import FHParams, FlippedHuber
from .privacy_loss import SensitivityProfile, centered_loss, centered_loss_inverse, r_delta
from .specfun import tail_gap

# Parameters below this are excluded in numeric mode: tiny alpha or gamma
# make the density too spiky for the fold quadrature to be trustworthy
# (alpha = 0 exactly is fine - the density is then a plain Gaussian).
NUMERIC_PARAM_FLOOR = 0.02


def dominance_mean(params: FHParams) -> float:
    """theta = gamma Q^{-1}(sqrt(pi/2)/omega) >= 0 of the dominating Gaussian."""
    return FlippedHuber(params).dominance_mean


def sufficient_delta_kd(
    epsilon: float, params: FHParams, sens: SensitivityProfile
) -> float | None:
    """Closed-form sufficient delta for the K-dimensional mechanism.

    Returns None when the parameter restriction R_delta(alpha) <=
    (2 gamma^2 eps - delta_2^2)/K fails - a constraint violation, reported
    distinctly from a finite bound that merely exceeds some target.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be >= 0")
    a, g = params.alpha, params.gamma
    g2 = g * g
    r = r_delta(a, sens.delta_inf)
    if r > (2.0 * g2 * epsilon - sens.delta_2**2) / sens.k:
        return None
    theta = dominance_mean(params)
    d2 = sens.delta_2
    base = g * epsilon / d2
    half = d2 / (2.0 * g)
    shift = sens.k * r / (2.0 * g * d2)
    x1 = base - half - shift
    x2 = base + half + shift + theta * sens.delta_1 / (g * d2)
    return float(tail_gap(epsilon, x1, x2))


@dataclass(frozen=True)
class KfoldGrid:
    """Grids for the iterated-integration profile.

    nu_grid must be symmetric about 0 and sorted; t_window must cover
    [-alpha - 12 gamma, alpha + 12 gamma] so the truncated density mass
    (< 1e-30) cannot perturb the folds. Only linear interpolation of the
    previous fold is supported.
    """

    nu_grid: np.ndarray
    t_window: tuple[float, float]
    interp: str = "linear"
    quad_nodes: int = field(default=1536, repr=False)

    def __post_init__(self):
        nu = np.asarray(self.nu_grid, dtype=float)
        object.__setattr__(self, "nu_grid", nu)
        if nu.ndim != 1 or nu.size < 16:
            raise ValueError("nu_grid must be a 1-d grid with at least 16 points")
        if np.any(np.diff(nu) <= 0):
            raise ValueError("nu_grid must be strictly increasing")
        if abs(nu[0] + nu[-1]) > 1e-9 * max(abs(nu[0]), 1.0):
            raise ValueError("nu_grid must be symmetric about 0")
        if self.interp != "linear":
            raise ValueError("only linear interpolation is supported")
        lo, hi = self.t_window
        if not lo < hi:
            raise ValueError("empty t_window")

    @classmethod
    def for_params(
        cls, params: FHParams, delta_inf: float, num_points: int = 4001, quad_nodes: int = 1536
    ) -> "KfoldGrid":
        """Default grid: nu_max = centered loss at alpha + 12 gamma + delta/2.

        That argument is the edge of the mass-carrying window, so the
        profile has decayed below ~1e-30 at the grid ends.
        """
        a, g = params.alpha, params.gamma
        edge = a + 12.0 * g + 0.5 * delta_inf
        nu_max = float(centered_loss(edge, delta_inf, params))
        nu = np.linspace(-nu_max, nu_max, num_points)
        return cls(nu_grid=nu, t_window=(-(a + 12.0 * g), a + 12.0 * g), quad_nodes=quad_nodes)


def numeric_profile_kd(
    params: FHParams,
    k: int,
    delta_inf: float,
    grid: KfoldGrid | None = None,
) -> PrivacyProfileCurve:
    """Exact K-dimensional profile by K-fold iterated integration.

    Fold 1 is the generic log-concave formula on the nu grid (evaluated
    for negative arguments too, which the folding consumes); fold k
    integrates the linearly interpolated previous curve against the noise
    density, with the interpolation clamped to 1 below the grid and to the
    (vanishing) last value above it.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_numeric_params(params)
    if grid is None:
        grid = KfoldGrid.for_params(params, delta_inf)
    nu = grid.nu_grid

    deltas = _base_profile(nu, params, delta_inf)
    if k > 1:
        nodes, weights = _fold_rule(params, delta_inf, grid)
        mass = float(weights.sum())
        if mass < 1.0 - 1e-6:
            raise ValueError(
                f"t_window too narrow: quadrature mass {mass:.9f} loses more than 1e-6"
            )
        shifted = centered_loss(nodes + 0.5 * delta_inf, delta_inf, params)
        for _ in range(1, k):
            deltas = _fold_once(nu, deltas, shifted, weights)
    deltas = np.clip(deltas, 0.0, 1.0)
    # guard against interpolation-level wiggle; the true curve is nonincreasing
    deltas = np.minimum.accumulate(deltas)
    return PrivacyProfileCurve(eps_grid=nu, delta_values=deltas, method=ProfileMethod.NUMERIC_KFOLD)


def numeric_delta_kd(
    epsilon: float,
    params: FHParams,
    k: int,
    delta_inf: float,
    grid: KfoldGrid | None = None,
) -> float:
    """delta^(K) evaluated exactly at the requested epsilon.

    The first K-1 folds are tabulated on the grid; the last fold is then a
    single integral evaluated at epsilon itself, avoiding the final
    interpolation error at the point that matters for calibration.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_numeric_params(params)
    if k == 1:
        return fh_generic_profile(epsilon, params, delta_inf)
    if grid is None:
        grid = KfoldGrid.for_params(params, delta_inf)
    nu = grid.nu_grid
    deltas = np.array([fh_generic_profile(float(v), params, delta_inf) for v in nu])
    nodes, weights = _fold_rule(params, delta_inf, grid)
    mass = float(weights.sum())
    if mass < 1.0 - 1e-6:
        raise ValueError(f"t_window too narrow: quadrature mass {mass:.9f}")
    shifted = centered_loss(nodes + 0.5 * delta_inf, delta_inf, params)
    for _ in range(1, k - 1):
        deltas = _fold_once(nu, deltas, shifted, weights)
    args = epsilon - shifted
    prev = np.interp(args, nu, deltas, left=1.0, right=deltas[-1])
    return float(min(max(np.dot(weights, prev), 0.0), 1.0))


def _check_numeric_params(params: FHParams) -> None:
    if 0.0 < params.alpha < NUMERIC_PARAM_FLOOR or params.gamma < NUMERIC_PARAM_FLOOR:
        raise ValueError(
            "numeric folding refuses alpha in (0, 0.02) or gamma < 0.02: "
            "the density is too sharply peaked for reliable integration there"
        )


def _fold_rule(params: FHParams, delta_inf: float, grid: KfoldGrid):
    """Composite Gauss-Legendre nodes/weights for w(t) = density, on t_window.

    Panels are split at the kinks of the shifted loss t -> zeta~(t + d/2)
    and at the density transition +-alpha, then refined uniformly up to
    ~quad_nodes total nodes; weights absorb the density values.
    """
    a, g = params.alpha, params.gamma
    h = 0.5 * delta_inf
    lo, hi = grid.t_window
    kinks = {lo, hi, -a, a}
    for x in (min(a - h, h), abs(a - h), max(a - h, h), a + h):
        for s in (-1.0, 1.0):
            kinks.add(s * x - h)
    # the density spike at 0 matters for large alpha/gamma ratios
    spike = g * g / a if a > 0 else g
    for m in (0.0, spike, 5 * spike, -spike, -5 * spike):
        kinks.add(m)
    edges = np.array(sorted(x for x in kinks if lo <= x <= hi))
    # refine long panels so total node count reaches the requested budget
    per = max(8, grid.quad_nodes // max(len(edges) - 1, 1))
    order = 16
    sub = max(1, per // order)
    gl_x, gl_w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    dist = FlippedHuber(params)
    for a0, b0 in zip(edges[:-1], edges[1:]):
        cuts = np.linspace(a0, b0, sub + 1)
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (c1 - c0)
            mid = 0.5 * (c0 + c1)
            nodes.append(mid + half * gl_x)
            weights.append(half * gl_w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights) * dist.pdf(nodes)
    return nodes, weights


def _fold_once(nu, deltas, shifted, weights):
    """One composition fold: E_t[ delta_prev(nu - zeta(t)) ] per grid point."""
    args = nu[:, None] - shifted[None, :]
    prev = np.interp(args.ravel(), nu, deltas, left=1.0, right=deltas[-1]).reshape(args.shape)
    out = prev @ weights
    return np.clip(out, 0.0, 1.0)
