"""True vs strict-local martingale classification and the martingale defect.

For dY = P(Y) dB from y0 > 0, with X the version absorbed at its first zero:

* Y is a true martingale iff e1 = 0, or P has real roots r1 <= r2 with
  y0 in [r1, r2] (the volatility then grows at most linearly along the path).
* X is a true martingale iff e1 = 0, or P has a real root at or above y0
  (the root fences the stopped process away from the superlinear regime).

With two distinct real roots the defect y0 - E[Y_T] is available in closed
form through the exponential dual: the deficit is (y0 - r1) times the
probability that the dual GBM reaches 1 by T.  Started between the roots that
probability is zero; started below r1 the defect is negative (Y is bounded
above by r1, so E[Y_T] > y0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import CaseError
from .gbm import build_gbm_dual, hit_time_cdf
from .poly import (
    DerivedConstants,
    PolynomialSpec,
    RootKind,
    RootProfile,
    classify,
)

__all__ = ["MartingalityReport", "classify_martingality", "martingale_defect"]


@dataclass(frozen=True)
class MartingalityReport:
    spec: PolynomialSpec
    constants: DerivedConstants
    profile: RootProfile
    unstopped_true: bool  # Y a true martingale
    stopped_true: bool    # X (absorbed at zero) a true martingale
    reason: str
    defect: Callable[[float], float] | None  # closed form, two distinct roots only


def classify_martingality(spec: PolynomialSpec) -> MartingalityReport:
    constants, profile = classify(spec)
    defect_fn: Callable[[float], float] | None = None
    if profile.kind is RootKind.TWO_REAL_ROOTS:
        defect_fn = lambda T: martingale_defect(spec, T)  # noqa: E731

    if profile.kind is RootKind.LINEAR:
        y_true, x_true = True, True
        reason = "e1 = 0: volatility grows at most linearly"
    elif profile.at_root:
        y_true, x_true = True, True
        reason = "started at a root of P: the process is frozen"
    elif profile.kind is RootKind.DOUBLE_ROOT:
        y_true = False
        x_true = profile.r >= spec.y0
        reason = (
            f"double root {profile.r:g} "
            + ("at or above y0 fences the stopped process" if x_true else "below y0: superlinear volatility is reachable")
        )
    elif profile.kind is RootKind.TWO_REAL_ROOTS:
        inside = profile.r1 <= spec.y0 <= profile.r2
        y_true = inside
        x_true = inside or spec.y0 < profile.r1
        if inside:
            reason = f"y0 inside the root interval [{profile.r1:g}, {profile.r2:g}]"
        elif x_true:
            reason = "y0 below both roots: zero absorption precedes the explosive region"
        else:
            reason = "y0 above both roots: no root fences the path from above"
    else:
        y_true, x_true = False, False
        reason = "no real roots: superlinear volatility everywhere"

    return MartingalityReport(
        spec=spec,
        constants=constants,
        profile=profile,
        unstopped_true=y_true,
        stopped_true=x_true,
        reason=reason,
        defect=defect_fn,
    )


def martingale_defect(spec: PolynomialSpec, horizon: float) -> float:
    """y0 - E[Y_T] in closed form; requires two distinct real roots.

    (y0 - r1) * P(dual GBM reaches 1 by T); zero started inside the closed
    root interval.  Other root layouts have no closed form here and raise
    CaseError; the CLI falls back to Monte Carlo for those.
    """
    constants, profile = classify(spec)
    if profile.kind is not RootKind.TWO_REAL_ROOTS:
        raise CaseError(
            f"closed-form defect needs two distinct real roots, got {profile.kind.value}"
        )
    if profile.at_root or (profile.r1 <= spec.y0 <= profile.r2):
        return 0.0
    dual = build_gbm_dual(spec)
    return (spec.y0 - profile.r1) * hit_time_cdf(dual.z0, dual.sigma, horizon)
