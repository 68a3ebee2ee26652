"""Pricing a two-real-root diffusion through its exponential dual.

With distinct real roots r1 < r2 of P and start y0 not at a root, the process
Y_t = (r2 - r1*Z_t)/(1 - Z_t) where Z is the geometric Brownian motion

    Z_t = z0 * exp(sigma*B_t - sigma^2 t/2),  z0 = (y0-r2)/(y0-r1),
    sigma = e1*(r2 - r1),

run until Z hits 1 (never, when z0 < 0, i.e. y0 between the roots).  Prices
of the *unstopped* process satisfy

    E[h(Y_T)] = kappa * E[h(N(Z_T)) * (1 - Z_T) ; tau > T],
    kappa = (y0 - r1)/(r2 - r1),

with N the Moebius map above; the weight kappa*(1-Z_T)*1{tau>T} has unit mean
(it is the normalized martingale), which feeds the same control variate as
the transform engine.  When 0 is not between the roots the stopped and
unstopped processes coincide, which covers every fixture priced this way.

Simulation is exact in log space; the hit of 1 is the hit of 0 by log Z,
detected through per-step bridge extrema exactly as in the transform engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .engine import _chunks, _rng
from .errors import CaseError
from .estimates import PriceEstimate, summarize
from .payoffs import ClaimSpec, PathStats
from .poly import PolynomialSpec, RootKind, classify

__all__ = [
    "GbmDualSpec",
    "build_gbm_dual",
    "hit_time_cdf",
    "survival_probability",
    "gbm_price",
]

STREAM_GBM = 3

# Surviving paths with Z within this distance of the pole at 1 are treated as
# exited; the Moebius map is not evaluable there in double precision.
_POLE_TOL = 1e-12


@dataclass(frozen=True)
class GbmDualSpec:
    """Exponential dual of a two-root spec."""

    r1: float
    r2: float
    z0: float
    sigma: float  # e1*(r2-r1); only |sigma| affects the law
    y0: float

    @property
    def kappa(self) -> float:
        return (self.y0 - self.r1) / (self.r2 - self.r1)

    def moebius(self, z):
        """N(z) = (r2 - r1*z)/(1 - z); N(z0) = y0."""
        return (self.r2 - self.r1 * np.asarray(z, dtype=float)) / (1.0 - np.asarray(z, dtype=float))


def build_gbm_dual(spec: PolynomialSpec) -> GbmDualSpec:
    constants, profile = classify(spec)
    if profile.kind is not RootKind.TWO_REAL_ROOTS:
        raise CaseError(f"exponential dual needs two distinct real roots, got {profile.kind.value}")
    if profile.at_root:
        raise CaseError("start point sits at a root; the dual ratio degenerates")
    r1, r2 = profile.r1, profile.r2
    z0 = (spec.y0 - r2) / (spec.y0 - r1)
    sigma = spec.e1 * (r2 - r1)
    return GbmDualSpec(r1=r1, r2=r2, z0=z0, sigma=sigma, y0=spec.y0)


def hit_time_cdf(z0: float, sigma: float, horizon: float) -> float:
    """P(Z hits 1 by the horizon) for Z_t = z0 exp(|sigma| B_t - sigma^2 t/2).

    Negative z0 never hits (wrong sign); z0 = 1 starts there.  Reflection
    formula for drifted Brownian motion applied to log Z, whose drift
    -sigma^2/2 makes the Girsanov factor collapse to z0 itself.
    """
    if z0 < 0.0:
        return 0.0
    if z0 == 1.0:
        return 1.0
    if horizon <= 0.0:
        return 0.0
    s_abs = abs(sigma)
    m = -math.log(z0)  # level of log Z / target gap; sign tells the side
    nu = -0.5 * s_abs * s_abs
    sd = s_abs * math.sqrt(horizon)
    sgn = 1.0 if m > 0 else -1.0
    return float(
        ndtr(sgn * (nu * horizon - m) / sd) + z0 * ndtr(sgn * (-nu * horizon - m) / sd)
    )


def survival_probability(dual: GbmDualSpec, horizon: float) -> float:
    """Q(tau > T): probability Z has not reached 1 by the horizon."""
    return 1.0 - hit_time_cdf(dual.z0, dual.sigma, horizon)


def gbm_price(spec: PolynomialSpec, claim: ClaimSpec, params) -> PriceEstimate:
    """E[h(Y_T)] through the exponential dual; estimator tag "gbm-dual".

    ``params`` is an engine MCParams; the route uses its own random stream,
    so a seed shared with the transform engine never correlates the two.
    """
    dual = build_gbm_dual(spec)
    horizon = claim.horizon
    n_steps = params.resolve_steps(horizon)
    params.check_budget(n_steps)
    dt = horizon / n_steps
    s_abs = abs(dual.sigma)
    var = s_abs * s_abs * dt
    l0 = math.log(abs(dual.z0))
    negative = dual.z0 < 0.0

    def process(chunk_size: tuple[int, int]) -> tuple[np.ndarray, dict]:
        chunk, size = chunk_size
        rng = _rng(params.seed, STREAM_GBM, chunk)
        z = rng.standard_normal((size, n_steps))
        u_lo = rng.random((size, n_steps))
        u_hi = rng.random((size, n_steps))
        incr = (s_abs * math.sqrt(dt)) * z - 0.5 * var
        path = np.empty((size, n_steps + 1))
        path[:, 0] = l0
        np.cumsum(incr, axis=1, out=path[:, 1:])
        path[:, 1:] += l0
        left, right = path[:, :-1], path[:, 1:]
        half = 0.5 * (left + right)
        gap2 = (right - left) ** 2
        step_min = half - 0.5 * np.sqrt(gap2 - 2.0 * var * np.log1p(-u_lo))
        step_max = half + 0.5 * np.sqrt(gap2 - 2.0 * var * np.log1p(-u_hi))
        cum_min = np.minimum.accumulate(
            np.concatenate([path[:, :1], step_min], axis=1), axis=1
        )
        cum_max = np.maximum.accumulate(
            np.concatenate([path[:, :1], step_max], axis=1), axis=1
        )
        if negative:
            alive = np.ones(size, dtype=bool)  # Z < 0 never reaches 1
        elif l0 > 0:
            alive = cum_min[:, n_steps] > 0.0
        else:
            alive = cum_max[:, n_steps] < 0.0

        z_T = np.exp(path[:, n_steps])
        if negative:
            z_T = -z_T
        alive = alive & (np.abs(1.0 - z_T) >= _POLE_TOL)

        weight = np.zeros(size)
        weight[alive] = dual.kappa * (1.0 - z_T[alive])

        terminal = np.zeros(size)
        lo = np.zeros(size)
        hi = np.zeros(size)
        if np.any(alive):
            terminal[alive] = dual.moebius(z_T[alive])
            if negative:
                z_lo = -np.exp(cum_max[alive, n_steps])
                z_hi = -np.exp(cum_min[alive, n_steps])
            else:
                z_lo = np.exp(cum_min[alive, n_steps])
                z_hi = np.exp(cum_max[alive, n_steps])
            # Moebius map is increasing in z away from the pole, and surviving
            # paths stay on one side of it.
            lo[alive] = dual.moebius(z_lo)
            hi[alive] = dual.moebius(z_hi)

        stats = PathStats(terminal=terminal, run_min=lo, run_max=hi)
        values = np.asarray(claim.dollar(stats), dtype=float)
        contrib = np.zeros(size)
        contrib[alive] = values[alive] * weight[alive]
        if params.control_variate:
            contrib = contrib + (1.0 - weight)
        return contrib, {"n_survived": int(np.sum(alive))}

    parts = []
    n_survived = 0
    for cs in _chunks(params.n_paths, params.chunk_paths):
        contrib, diag = process(cs)
        parts.append(contrib)
        n_survived += diag["n_survived"]
    return summarize(
        np.concatenate(parts),
        params.seed,
        "gbm-dual",
        {"n_survived": n_survived},
    )
