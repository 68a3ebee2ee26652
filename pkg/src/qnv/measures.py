"""Dual-measure pricing tools built on the reciprocal model.

The reciprocal of the stopped process is itself a stopped process of the same
family with negated, reversed coefficients and start 1/y0, and its pricing
weight is g(x) f(x) / y0 with the same exponential rate C.  Everything here
exploits that concretely: expectations "under the extension measure" are
ordinary Monte Carlo runs of the dual model on the same Brownian engine, with
zero hits and explosions swapping roles.  No abstract measure change is ever
constructed.

Operations
  dual_model            pair a model with its reciprocal counterpart
  foellmer_expectation  extension-measure identity, both sides plus the gap
  symmetry_check        reflection identity for self-reciprocal coefficients
  semistatic_hedge_plan three-leg barrier replication with verification hooks
  joint_price           two-currency claim: dollar leg plus explosion leg
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .closed_forms import ClosedFormMap, build
from .engine import MCParams, Task, price_stopped, run_tasks
from .errors import LegInconsistency, NonFinitePayoff, SpecShapeError
from .estimates import PriceEstimate, summarize
from .payoffs import ClaimSpec, PathStats, Payoff
from .poly import PolynomialSpec, dual_polynomial

__all__ = [
    "DualModel",
    "FoellmerResult",
    "JointClaim",
    "HedgePosition",
    "HedgePlan",
    "dual_model",
    "foellmer_expectation",
    "symmetry_check",
    "semistatic_hedge_plan",
    "joint_price",
]

# Relative tolerance of the coefficient-shape gate for the reflection identity.
_SHAPE_RTOL = 1e-10
# Relative tolerance of the dollar/euro leg agreement on sampled paths.
_LEG_RTOL = 1e-8


@dataclass(frozen=True)
class DualModel:
    """A model together with its reciprocal: maps share W, swap stop roles.

    The zero hit of the primal is the domain explosion of the dual and vice
    versa; both transforms carry the same exponential rate C, which holds
    exactly in floating point because the dual constant is assembled from the
    same products.
    """

    spec: PolynomialSpec
    dual_spec: PolynomialSpec
    map: ClosedFormMap
    dual_map: ClosedFormMap


def dual_model(spec: PolynomialSpec) -> DualModel:
    map_ = build(spec)
    dual_spec = dual_polynomial(spec)
    dmap = build(dual_spec)
    if dmap.constants.C != map_.constants.C:
        raise AssertionError("dual transform changed the exponential rate C")
    return DualModel(spec=spec, dual_spec=dual_spec, map=map_, dual_map=dmap)


def _reciprocal_or(arr: np.ndarray, at_zero: float) -> np.ndarray:
    out = np.empty_like(arr)
    zero = arr == 0.0
    with np.errstate(divide="ignore"):
        out[~zero] = 1.0 / arr[~zero]
    out[zero] = at_zero
    return out


@dataclass(frozen=True)
class FoellmerResult:
    """Both sides of the extension-measure identity and their per-path gap.

    lhs comes from the dual model (terminal times the functional of the
    reciprocal path, on non-explosion), rhs from the primal (functional on
    survival of zero, divided by the start value).  Both run on common random
    numbers with raw estimators, so diff is a paired estimate whose spread
    measures the actual disagreement, not two independent MC errors.
    """

    lhs: PriceEstimate
    rhs: PriceEstimate
    diff: PriceEstimate


def foellmer_expectation(
    spec: PolynomialSpec, functional: Payoff, horizon: float, params: MCParams
) -> FoellmerResult:
    """Estimate E[functional / X_T on no-explosion] under the dual model
    against E[functional on {X_T > 0}] / y0 under the primal.

    The functional sees PathStats of the stopped primal process on both
    sides; the dual run hands it the reciprocal of the dual path.  Rows where
    the respective indicator is off are never evaluated.
    """
    model = dual_model(spec)
    x0 = spec.y0

    def dual_side(stats: PathStats) -> np.ndarray:
        out = np.zeros_like(stats.terminal)
        rows = (stats.terminal > 0.0) & np.isfinite(stats.terminal)
        if np.any(rows):
            recip = PathStats(
                terminal=1.0 / stats.terminal[rows],
                run_min=_reciprocal_or(stats.run_max[rows], 0.0),
                run_max=_reciprocal_or(stats.run_min[rows], np.inf),
            )
            out[rows] = stats.terminal[rows] * functional(recip)
        return out

    def primal_side(stats: PathStats) -> np.ndarray:
        out = np.zeros_like(stats.terminal)
        rows = (stats.terminal > 0.0) & np.isfinite(stats.terminal)
        if np.any(rows):
            sub = PathStats(
                terminal=stats.terminal[rows],
                run_min=stats.run_min[rows],
                run_max=stats.run_max[rows],
            )
            out[rows] = functional(sub)
        return out

    # Raw estimators: the control variate would add (1 - weight) noise to
    # rows where the two sides cancel exactly path by path.
    tasks = [
        Task(model.dual_map, Payoff("dual-side", dual_side), "stopped", control_variate=False),
        Task(model.map, Payoff("primal-side", primal_side), "stopped", control_variate=False),
    ]
    res = run_tasks(tasks, horizon, params)
    rhs_contrib = res[1].contributions / x0
    lhs = summarize(res[0].contributions, params.seed, "transform", res[0].diagnostics)
    rhs = summarize(rhs_contrib, params.seed, "transform", res[1].diagnostics)
    diff = summarize(res[0].contributions - rhs_contrib, params.seed, "transform-paired", {})
    return FoellmerResult(lhs=lhs, rhs=rhs, diff=diff)


# --------------------------------------------------------------------------
# Reflection symmetry and the barrier hedge built on it
# --------------------------------------------------------------------------


def _require_reflection_shape(spec: PolynomialSpec, level: float) -> None:
    if not (np.isfinite(level) and level > 0.0):
        raise SpecShapeError(f"reflection level must be positive and finite, got {level}")
    scale = max(abs(spec.e3), abs(spec.e1) * level * level)
    if abs(spec.e3 - spec.e1 * level * level) > _SHAPE_RTOL * scale:
        raise SpecShapeError(
            f"coefficients are not reflection-symmetric about {level}: "
            f"need e3 = e1 * level^2, got e1={spec.e1} e3={spec.e3}"
        )


def _require_start_at(spec: PolynomialSpec, level: float) -> None:
    if abs(spec.y0 - level) > _SHAPE_RTOL * max(spec.y0, level):
        raise SpecShapeError(
            f"reflection identity needs the start value at the level: y0={spec.y0}, level={level}"
        )


def _probe_reflection_payoff(h) -> None:
    probe = np.asarray(h(np.array([0.0, np.inf])), dtype=float)
    if probe[0] != 0.0:
        raise NonFinitePayoff("reflection payoff must satisfy h(0) = 0")
    if not np.isfinite(probe[1]):
        raise NonFinitePayoff("reflection payoff must be finite at infinity")


def _scaled_payoff(h, level: float, label: str) -> Payoff:
    def values(stats: PathStats) -> np.ndarray:
        return np.asarray(h(stats.terminal / level), dtype=float)

    return Payoff(label, values)


def _reflected_payoff(h, level: float, label: str) -> Payoff:
    # h(level / x) * x / level, with the two ends pinned: 0 at x = 0 because
    # h(inf) is finite, 0 at x = inf where the pricing weight vanishes anyway.
    def values(stats: PathStats) -> np.ndarray:
        t = stats.terminal
        out = np.zeros_like(t)
        rows = (t > 0.0) & np.isfinite(t)
        if np.any(rows):
            out[rows] = np.asarray(h(level / t[rows]), dtype=float) * (t[rows] / level)
        return out

    return Payoff(label, values)


def symmetry_check(
    spec: PolynomialSpec, h, level: float, horizon: float, params: MCParams
) -> tuple[PriceEstimate, PriceEstimate]:
    """Estimate E[h(X_T / L)] and E[h(L / X_T) X_T / L] independently.

    Requires coefficients of the self-reciprocal shape e3 = e1 L^2 with the
    process started at L; h must be vectorized with h(0) = 0 and a finite
    value at infinity.  The two sides use different seeds on purpose: the
    identity is between laws, not paths.
    """
    _require_reflection_shape(spec, level)
    _require_start_at(spec, level)
    _probe_reflection_payoff(h)
    lhs_claim = ClaimSpec(horizon=horizon, dollar=_scaled_payoff(h, level, "h(x/L)"))
    rhs_claim = ClaimSpec(horizon=horizon, dollar=_reflected_payoff(h, level, "h(L/x)*x/L"))
    lhs = price_stopped(spec, lhs_claim, params)
    rhs = price_stopped(spec, rhs_claim, replace(params, seed=params.seed + 1))
    return lhs, rhs


@dataclass(frozen=True)
class HedgePosition:
    name: str
    payoff: Payoff
    window: str


@dataclass(frozen=True)
class HedgePlan:
    """Semi-static replication of a down-and-in claim paying h(X_T / L).

    Hold positions 1 and 2 from inception.  If the barrier is hit, swap
    position 2 into position 3 at that moment; the reflection identity at the
    barrier makes the swap value-neutral.  If the barrier is never hit, both
    initial legs expire worthless (the path stayed above L).
    """

    spec: PolynomialSpec
    h: object
    barrier: float
    horizon: float
    positions: tuple[HedgePosition, ...]

    def swap_value_check(self, params: MCParams) -> tuple[PriceEstimate, PriceEstimate]:
        """Price legs 3 and 2 restarted at the barrier; they should agree.

        Restarting is a coefficient-preserving change of start value, so the
        shape gate passes by construction and the check is exactly the
        reflection identity for h restricted to {u > 1}.
        """
        at_barrier = PolynomialSpec(self.spec.e1, self.spec.e2, self.spec.e3, self.barrier)
        h = self.h

        def knocked(u):
            u = np.asarray(u, dtype=float)
            return np.where(u > 1.0, np.asarray(h(u), dtype=float), 0.0)

        return symmetry_check(at_barrier, knocked, self.barrier, self.horizon, params)

    def replication_check(self, params: MCParams) -> PriceEstimate:
        """Per-path absolute gap between the plan's payout and the target.

        The bookkeeping nets out algebraically on every path (hit or not), so
        the estimate should be exactly zero; any positive mean means the legs
        or the swap rule are wrong.  Runs raw, without the control variate.
        """
        h, level = self.h, self.barrier
        pos1, pos2, pos3 = (p.payoff for p in self.positions)

        def residual(stats: PathStats) -> np.ndarray:
            hit = stats.run_min <= level
            held = pos1(stats) + np.where(hit, pos3(stats), pos2(stats))
            target = np.where(hit, _scaled_payoff(h, level, "h")(stats), 0.0)
            return np.abs(held - target)

        task = Task(build(self.spec), Payoff("replication-gap", residual), "stopped", False)
        res = run_tasks([task], self.horizon, params)[0]
        return summarize(res.contributions, params.seed, "transform", res.diagnostics)


def semistatic_hedge_plan(spec: PolynomialSpec, h, level: float, horizon: float) -> HedgePlan:
    """Three European legs replicating h(X_T / L) knocked in at the level L.

    Needs the self-reciprocal coefficient shape and a start strictly above
    the barrier.  The returned plan carries verification routines; nothing is
    priced here.
    """
    _require_reflection_shape(spec, level)
    if not spec.y0 > level:
        raise SpecShapeError(
            f"down-and-in setup needs the start above the barrier: y0={spec.y0}, level={level}"
        )
    _probe_reflection_payoff(h)

    def below(stats: PathStats) -> np.ndarray:
        t = stats.terminal
        return np.where(t <= level, np.asarray(h(t / level), dtype=float), 0.0)

    def above(stats: PathStats) -> np.ndarray:
        t = stats.terminal
        return np.where(t > level, np.asarray(h(t / level), dtype=float), 0.0)

    def reflected_below(stats: PathStats) -> np.ndarray:
        t = stats.terminal
        out = np.zeros_like(t)
        rows = (t > 0.0) & np.isfinite(t) & (t < level)
        if np.any(rows):
            out[rows] = np.asarray(h(level / t[rows]), dtype=float) * (t[rows] / level)
        return out

    positions = (
        HedgePosition("h(x/L) below the barrier", Payoff("h(x/L)*1{x<=L}", below), "inception to expiry"),
        HedgePosition(
            "reflected leg", Payoff("h(L/x)*(x/L)*1{x<L}", reflected_below), "inception until the barrier hit"
        ),
        HedgePosition("h(x/L) above the barrier", Payoff("h(x/L)*1{x>L}", above), "entered at the barrier hit"),
    )
    return HedgePlan(spec=spec, h=h, barrier=level, horizon=horizon, positions=positions)


# --------------------------------------------------------------------------
# Two-currency claims
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JointClaim:
    """A claim with both legs: dollars if the rate stays finite, euros if not.

    Both payoffs are declared in the primal coordinate; the euro leg is read
    at terminal = inf on explosion paths (its value there is the euro amount
    delivered when a dollar is worthless).  On paths with 0 < X_T < inf the
    legs must describe the same claim: euro * X_T = dollar.
    """

    claim: ClaimSpec

    def __post_init__(self) -> None:
        if self.claim.euro is None:
            raise SpecShapeError("a joint claim needs both legs; euro payoff is missing")


def _consistency_guard(claim: ClaimSpec) -> Payoff:
    dollar, euro = claim.dollar, claim.euro

    def values(stats: PathStats) -> np.ndarray:
        d = np.asarray(dollar(stats), dtype=float)
        rows = (stats.terminal > 0.0) & np.isfinite(stats.terminal)
        if np.any(rows):
            sub = PathStats(
                terminal=stats.terminal[rows],
                run_min=stats.run_min[rows],
                run_max=stats.run_max[rows],
            )
            implied = np.asarray(euro(sub), dtype=float) * sub.terminal
            gap = np.abs(implied - d[rows])
            scale = np.maximum(1.0, np.maximum(np.abs(implied), np.abs(d[rows])))
            worst = int(np.argmax(gap / scale))
            if gap[worst] > _LEG_RTOL * scale[worst]:
                raise LegInconsistency(
                    f"legs disagree at X_T={sub.terminal[worst]}: "
                    f"dollar={d[rows][worst]}, euro*X_T={implied[worst]}"
                )
        return d

    return Payoff(dollar.label, values)


def joint_price(spec: PolynomialSpec, joint: JointClaim, params: MCParams) -> PriceEstimate:
    """Minimal price of a joint claim: dollar leg plus y0 times the euro leg
    collected on explosion paths under the reciprocal weight.

    Both terms run on the same Brownian paths, so the reported stderr is that
    of the combined per-path contribution.  The mean satisfies the accounting
    identity mean = term_dollar + y0 * term_euro exactly; both terms and
    their own standard errors sit in the diagnostics.
    """
    claim = joint.claim
    map_ = build(spec)
    tasks = [
        Task(map_, _consistency_guard(claim), "stopped", params.control_variate),
        Task(map_, claim.euro, "hyper", control_variate=False),
    ]
    res = run_tasks(tasks, claim.horizon, params)
    x0 = spec.y0

    dollar = summarize(res[0].contributions, params.seed, "transform", {})
    euro = summarize(res[1].contributions, params.seed, "transform", {})
    combined = summarize(
        res[0].contributions + x0 * res[1].contributions, params.seed, "transform-joint", {}
    )
    mean = dollar.mean + x0 * euro.mean
    diagnostics = dict(res[0].diagnostics)
    diagnostics.update(
        term_dollar=dollar.mean,
        term_dollar_stderr=dollar.stderr,
        term_euro=euro.mean,
        term_euro_stderr=euro.stderr,
    )
    return replace(
        combined,
        mean=mean,
        ci95=(mean - 1.96 * combined.stderr, mean + 1.96 * combined.stderr),
        diagnostics=diagnostics,
    )
