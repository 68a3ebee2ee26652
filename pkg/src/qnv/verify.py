"""Invariant suites: the checks behind `qnv verify`.

Each check returns a CheckResult rather than asserting, so the CLI, the
service, and the test suite can share one implementation.  All randomness is
seeded; a suite that passes once passes forever for the same inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .closed_forms import ClosedFormMap, build, reciprocal_map
from .engine import MCParams, price_stopped, stopping_indices
from .estimates import PriceEstimate
from .measures import JointClaim, joint_price, symmetry_check
from .payoffs import ClaimSpec, constant, identity
from .poly import PolynomialSpec, dual_polynomial

__all__ = [
    "CheckResult",
    "VerifyReport",
    "residual_grid",
    "transform_residuals",
    "run_verification",
    "FIXTURE_SPECS",
]

# One representative per closed-form branch; the frozen (started-at-a-root)
# case sits last.
FIXTURE_SPECS: tuple[PolynomialSpec, ...] = (
    PolynomialSpec(0.0, 0.0, 1.0, 1.0),
    PolynomialSpec(0.0, 1.0, 0.0, 1.0),
    PolynomialSpec(1.0, 0.0, 0.0, 1.0),
    PolynomialSpec(1.0, -3.0, 2.0, 1.5),
    PolynomialSpec(1.0, -3.0, 2.0, 3.0),
    PolynomialSpec(1.0, 0.0, 1.0, 1.0),
    PolynomialSpec(2.0, -4.0, 2.0, 1.0),
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# --------------------------------------------------------------------------
# Finite-difference residuals of the closed forms
# --------------------------------------------------------------------------


def residual_grid(map_: ClosedFormMap, n: int = 1001) -> np.ndarray:
    """Interior evaluation grid: stay where |f| is moderate so difference
    quotients are well conditioned, cap the unbounded sides at |x| = 8."""
    lo, hi = map_.a, map_.b
    bound = 20.0 * max(1.0, map_.spec.y0)
    lo_f, hi_f = (-bound, bound) if map_.increasing else (bound, -bound)
    try:
        lo = max(lo, float(map_.invert_f(lo_f)))
    except Exception:
        pass
    try:
        hi = min(hi, float(map_.invert_f(hi_f)))
    except Exception:
        pass
    lo, hi = max(lo, -8.0), min(hi, 8.0)
    width = hi - lo
    return np.linspace(lo + 1e-4 * width, hi - 1e-4 * width, n)


def transform_residuals(spec: PolynomialSpec, n: int = 1001) -> tuple[float, float]:
    """Max relative residuals of f' = P(f) and g'' = -C g on the grid.

    Step sizes balance truncation against cancellation: first differences
    tolerate a much smaller h than second differences, and the g step shrinks
    with sqrt(|C|) to keep the h^2 C truncation term at the same relative
    size for stiff specs.
    """
    map_ = build(spec)
    C = map_.constants.C
    x = residual_grid(map_, n)
    h_f = 1e-6 * np.maximum(1.0, np.abs(x))
    h_g = 1e-3 / (1.0 + math.sqrt(abs(C)))

    f_mid = np.asarray(map_.f(x))
    d_f = (np.asarray(map_.f(x + h_f)) - np.asarray(map_.f(x - h_f))) / (2.0 * h_f)
    p_f = spec.e1 * f_mid * f_mid + spec.e2 * f_mid + spec.e3
    res_f = np.max(np.abs(d_f - p_f) / np.maximum(1.0, np.abs(p_f)))

    g_mid = np.asarray(map_.g(x))
    d2_g = (np.asarray(map_.g(x + h_g)) - 2.0 * g_mid + np.asarray(map_.g(x - h_g))) / (h_g * h_g)
    res_g = np.max(np.abs(d2_g + C * g_mid) / np.maximum(1.0, np.abs(C * g_mid)))
    return float(res_f), float(res_g)


# --------------------------------------------------------------------------
# Individual checks
# --------------------------------------------------------------------------


def _check_ode(specs: list[PolynomialSpec]) -> CheckResult:
    worst = 0.0
    for spec in specs:
        res_f, res_g = transform_residuals(spec)
        worst = max(worst, res_f, res_g)
    return CheckResult(
        "ode-residuals",
        worst <= 1e-6,
        f"max relative residual {worst:.3e} over {len(specs)} specs (tol 1e-06)",
    )


def _check_normalization(specs: list[PolynomialSpec], params: MCParams) -> CheckResult:
    claim = ClaimSpec(horizon=1.0, dollar=constant(1.0))
    worst = 0.0
    for spec in specs:
        est = price_stopped(spec, claim, replace(params, control_variate=True))
        worst = max(worst, abs(est.mean - 1.0))
    return CheckResult(
        "weight-normalization",
        worst <= 1e-12,
        f"max |price(1) - 1| = {worst:.3e} with the unit control variate (tol 1e-12)",
    )


def _duality_points(map_: ClosedFormMap, dual: ClosedFormMap, n: int = 512) -> np.ndarray:
    lo = max(map_.a, dual.a, -8.0)
    hi = min(map_.b, dual.b, 8.0)
    width = hi - lo
    return np.linspace(lo + 1e-3 * width, hi - 1e-3 * width, n)


def _check_duality(specs: list[PolynomialSpec]) -> CheckResult:
    worst = 0.0
    for spec in specs:
        map_ = build(spec)
        dual = build(dual_polynomial(spec))
        recip = reciprocal_map(map_)
        x = _duality_points(map_, dual)
        g_f = np.asarray(map_.g(x)) * np.asarray(map_.f(x))
        lhs = np.asarray(dual.g(x)) * spec.y0
        worst = max(worst, float(np.max(np.abs(lhs - g_f) / np.maximum(1.0, np.abs(g_f)))))
        # reciprocal_map must agree with the dual build where both exist
        inside = (x > recip.a) & (x < recip.b)
        xr = x[inside]
        for ours, theirs in ((recip.f, dual.f), (recip.g, dual.g)):
            v1, v2 = np.asarray(ours(xr)), np.asarray(theirs(xr))
            worst = max(worst, float(np.max(np.abs(v1 - v2) / np.maximum(1.0, np.abs(v2)))))
    return CheckResult(
        "duality-grid",
        worst <= 1e-10,
        f"max relative gap {worst:.3e} between g*f/y0 and the dual weight (tol 1e-10)",
    )


def _check_stop_swap(params: MCParams) -> CheckResult:
    swap_params = replace(params, n_paths=min(params.n_paths, 10_000))
    mismatches = 0
    total = 0
    for spec in (PolynomialSpec(1.0, 0.0, 1.0, 1.0), PolynomialSpec(1.0, 0.0, 0.0, 1.0)):
        primal = stopping_indices(spec, 1.0, swap_params)
        dual = stopping_indices(dual_polynomial(spec), 1.0, swap_params)
        mismatches += int(np.sum(primal["s_trigger"] != dual["tau_trigger"]))
        mismatches += int(np.sum(primal["tau_trigger"] != dual["s_trigger"]))
        total += primal["s_trigger"].size
    return CheckResult(
        "stop-swap",
        mismatches == 0,
        f"{mismatches} index mismatches across {total} paths (zero hit vs domain exit swap)",
    )


def _zscore(lhs: PriceEstimate, rhs: PriceEstimate) -> float:
    spread = math.hypot(lhs.stderr, rhs.stderr)
    if spread == 0.0:
        return 0.0 if lhs.mean == rhs.mean else math.inf
    return (lhs.mean - rhs.mean) / spread


def _check_symmetry(params: MCParams) -> CheckResult:
    spec = PolynomialSpec(1.0, 0.0, 1.0, 1.0)

    def h(u):
        u = np.asarray(u, dtype=float)
        return np.where(u > 1.0, np.minimum(u, 10.0), 0.0)

    lhs, rhs = symmetry_check(spec, h, 1.0, 1.0, params)
    z = _zscore(lhs, rhs)
    return CheckResult(
        "symmetry-fixture",
        abs(z) <= 3.0,
        f"reflection identity z-score {z:+.2f} ({lhs.mean:.6f} vs {rhs.mean:.6f})",
    )


def _check_joint(params: MCParams) -> CheckResult:
    claim = JointClaim(ClaimSpec(1.0, identity(), constant(1.0)))

    strict = PolynomialSpec(1.0, 0.0, 1.0, 1.0)
    est = joint_price(strict, claim, params)
    gap = abs(est.mean - strict.y0)
    ok_strict = gap <= 3.0 * est.stderr

    true_mart = PolynomialSpec(1.0, -3.0, 2.0, 0.5)
    joint = joint_price(true_mart, claim, params)
    plain = price_stopped(true_mart, ClaimSpec(1.0, identity()), params)
    ok_true = joint.mean == plain.mean and joint.diagnostics["term_euro"] == 0.0

    return CheckResult(
        "joint-fixture",
        ok_strict and ok_true,
        f"strict-local gap {gap:.4f} vs 3 sigma {3.0 * est.stderr:.4f}; "
        f"true-martingale euro term {joint.diagnostics['term_euro']:.1e}",
    )


def run_verification(
    spec: PolynomialSpec | None,
    params: MCParams,
) -> VerifyReport:
    """Run every suite on the fixture pack, plus the given spec where it fits.

    The symmetry and joint fixtures have hard-coded shapes, so the config
    spec only joins the analytic and engine-level checks.
    """
    specs = list(FIXTURE_SPECS)
    if spec is not None and spec not in specs:
        specs.insert(0, spec)
    checks = (
        _check_ode(specs),
        _check_normalization(specs, params),
        _check_duality(specs),
        _check_stop_swap(params),
        _check_symmetry(params),
        _check_joint(params),
    )
    return VerifyReport(checks=checks)
