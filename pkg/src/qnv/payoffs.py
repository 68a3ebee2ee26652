"""Claims and the payoff registry.

A payoff maps per-path statistics (terminal value, running extrema) to a
nonnegative amount.  Terminal values use the extended half-line: absorbed
paths carry 0.0, hyperinflated paths +inf.  Payoffs must return something
finite wherever they will be multiplied by a positive weight; the engines
enforce that at evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QnvError

__all__ = [
    "PathStats",
    "Payoff",
    "ClaimSpec",
    "call",
    "put",
    "digital",
    "capped_call",
    "identity",
    "constant",
    "reciprocal",
    "down_and_in",
    "table",
]


@dataclass(frozen=True)
class PathStats:
    """Per-path inputs to a payoff, all aligned arrays."""

    terminal: np.ndarray
    run_min: np.ndarray
    run_max: np.ndarray


@dataclass(frozen=True)
class Payoff:
    """Vectorized payoff with a printable label."""

    label: str
    fn: object  # callable(PathStats) -> np.ndarray

    def __call__(self, stats: PathStats) -> np.ndarray:
        return np.asarray(self.fn(stats), dtype=float)

    def describe(self) -> str:
        return self.label


@dataclass(frozen=True)
class ClaimSpec:
    """A claim: horizon plus a domestic payoff and an optional euro leg.

    The euro leg (units of the reciprocal numeraire) is only consulted by the
    joint pricer; single-leg pricing ignores it.
    """

    horizon: float
    dollar: Payoff
    euro: Payoff | None = None

    def __post_init__(self) -> None:
        if not (self.horizon > 0.0 and np.isfinite(self.horizon)):
            raise QnvError(f"claim horizon must be positive and finite, got {self.horizon!r}")


def call(strike: float) -> Payoff:
    return Payoff(f"call(K={strike:g})", lambda s: np.maximum(s.terminal - strike, 0.0))


def put(strike: float) -> Payoff:
    # At +inf terminal the put is worthless, which numpy gets right for free.
    return Payoff(f"put(K={strike:g})", lambda s: np.maximum(strike - s.terminal, 0.0))


def digital(strike: float) -> Payoff:
    return Payoff(f"digital(K={strike:g})", lambda s: (s.terminal > strike).astype(float))


def capped_call(strike: float, cap: float) -> Payoff:
    if not cap > strike:
        raise QnvError(f"cap {cap!r} must exceed strike {strike!r}")
    return Payoff(
        f"capped-call(K={strike:g}, cap={cap:g})",
        lambda s: np.clip(s.terminal - strike, 0.0, cap - strike),
    )


def identity() -> Payoff:
    return Payoff("terminal", lambda s: s.terminal)


def constant(value: float) -> Payoff:
    return Payoff(f"constant({value:g})", lambda s: np.full_like(s.terminal, float(value)))


def reciprocal() -> Payoff:
    """1/terminal with the conventions 1/0 = +inf and 1/inf = 0."""

    def fn(s: PathStats) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / s.terminal

    return Payoff("reciprocal", fn)


def down_and_in(level: float, inner: Payoff) -> Payoff:
    """inner payoff paid only when the running minimum reached ``level``."""

    def fn(s: PathStats) -> np.ndarray:
        return np.where(s.run_min <= level, inner(s), 0.0)

    return Payoff(f"down-and-in(L={level:g}, {inner.label})", fn)


def table(points: list[tuple[float, float]], value_at_inf: float = 0.0) -> Payoff:
    """Piecewise-linear terminal payoff with constant extension.

    ``points`` are (terminal, value) knots; outside the knot span the payoff
    is constant at the nearest knot value; +inf terminals pay value_at_inf.
    """
    if len(points) < 2:
        raise QnvError("table payoff needs at least two knots")
    xs = np.asarray([p[0] for p in points], dtype=float)
    vs = np.asarray([p[1] for p in points], dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise QnvError("table knots must have strictly increasing x")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(vs)) and np.isfinite(value_at_inf)):
        raise QnvError("table knots and value_at_inf must be finite")

    def fn(s: PathStats) -> np.ndarray:
        out = np.interp(s.terminal, xs, vs)
        return np.where(np.isinf(s.terminal), float(value_at_inf), out)

    knots = ",".join(f"{x:g}:{v:g}" for x, v in points)
    return Payoff(f"table({knots}; inf={value_at_inf:g})", fn)
