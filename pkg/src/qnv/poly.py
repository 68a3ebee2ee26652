"""Coefficient handling for dY = (e1*Y^2 + e2*Y + e3) dB started at y0 > 0.

Everything downstream keys off the quadratic P(z) = e1*z^2 + e2*z + e3: the
invariant C = e1*e3 - e2^2/4 (quarter of the negated discriminant), the
initial drift-like constant mu0 = e1*y0 + e2/2, and the real-root layout.
The dual spec (-e3, -e2, -e1, 1/y0) drives the reciprocal process 1/Y and
shares the same C, which is asserted rather than recomputed trustingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import InvalidSpec

__all__ = [
    "PolynomialSpec",
    "DerivedConstants",
    "RootKind",
    "LinearKind",
    "RootPosition",
    "RootProfile",
    "classify",
    "dual_polynomial",
    "eval_poly",
    "roots_of",
    "ZERO_RTOL",
]

# Coefficients (and C) within this relative tolerance of zero are treated as
# exact zeros for branch selection.  Pass exact zeros for exact control.
ZERO_RTOL = 1e-12


@dataclass(frozen=True)
class PolynomialSpec:
    """Quadratic diffusion coefficient P(z) = e1*z^2 + e2*z + e3 with start y0."""

    e1: float
    e2: float
    e3: float
    y0: float

    def __post_init__(self) -> None:
        for name in ("e1", "e2", "e3", "y0"):
            value = getattr(self, name)
            object.__setattr__(self, name, float(value))
            if not math.isfinite(getattr(self, name)):
                raise InvalidSpec(f"{name} must be finite, got {value!r}")
        if self.y0 <= 0.0:
            raise InvalidSpec(f"y0 must be strictly positive, got {self.y0!r}")

    def coefficients(self) -> tuple[float, float, float]:
        return (self.e1, self.e2, self.e3)


@dataclass(frozen=True)
class DerivedConstants:
    """Branch-independent constants of a spec.

    c is the shift constant of the hyperbolic/trigonometric transform branches
    and is None whenever the branch does not define one (linear cases, the
    double root, and the frozen at-root configuration).
    """

    C: float
    mu0: float
    c: float | None


class RootKind(Enum):
    LINEAR = "linear"
    DOUBLE_ROOT = "double-root"
    TWO_REAL_ROOTS = "two-real-roots"
    COMPLEX_ROOTS = "complex-roots"


class LinearKind(Enum):
    CONSTANT = "constant"
    ARITHMETIC_BM = "arithmetic-bm"
    SHIFTED_GBM = "shifted-gbm"


class RootPosition(Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    AT_ROOT = "at-root"


@dataclass(frozen=True)
class RootProfile:
    """Real-root layout of P relative to the start point y0."""

    kind: RootKind
    linear_kind: LinearKind | None = None
    r: float | None = None
    r1: float | None = None
    r2: float | None = None
    position: RootPosition | None = None
    at_root: bool = False  # P(y0) == 0: the process is frozen at y0


def eval_poly(spec: PolynomialSpec, z):
    """P(z) by Horner's rule; z may be a scalar or ndarray."""
    return (spec.e1 * z + spec.e2) * z + spec.e3


def dual_polynomial(spec: PolynomialSpec) -> PolynomialSpec:
    """Spec of the reciprocal process 1/Y: coefficients negated and reversed."""
    return PolynomialSpec(-spec.e3, -spec.e2, -spec.e1, 1.0 / spec.y0)


def _is_zero(value: float, *others: float) -> bool:
    return abs(value) <= ZERO_RTOL * max(1.0, *(abs(o) for o in others))


def classify(spec: PolynomialSpec) -> tuple[DerivedConstants, RootProfile]:
    """Derived constants plus the root layout of P relative to y0.

    The at-root test uses P(y0) directly: with two real roots the identity
    P(y0) = (mu0^2 + C)/e1 ties it to |mu0| = sqrt(-C), so the branch choice
    below stays consistent with the transform formulas.
    """
    e1, e2, e3 = spec.coefficients()
    C = e1 * e3 - 0.25 * e2 * e2
    mu0 = e1 * spec.y0 + 0.5 * e2
    e1_zero = _is_zero(e1, e2, e3)
    c_zero = _is_zero(C, e2, e3)
    p_y0 = eval_poly(spec, spec.y0)
    at_root = abs(p_y0) <= ZERO_RTOL * max(
        1.0, abs(e1) * spec.y0 * spec.y0, abs(e2) * spec.y0, abs(e3)
    )

    if e1_zero:
        e2_zero = _is_zero(e2, e3)
        e3_zero = _is_zero(e3, e2)
        if e2_zero and e3_zero:
            profile = RootProfile(
                RootKind.LINEAR, linear_kind=LinearKind.CONSTANT, at_root=True
            )
        elif e2_zero:
            profile = RootProfile(
                RootKind.LINEAR, linear_kind=LinearKind.ARITHMETIC_BM, at_root=False
            )
        else:
            profile = RootProfile(
                RootKind.LINEAR,
                linear_kind=LinearKind.SHIFTED_GBM,
                r=-e3 / e2 + 0.0,
                at_root=at_root,
            )
        return DerivedConstants(C=C, mu0=mu0, c=None), profile

    if c_zero:
        r = -0.5 * e2 / e1 + 0.0  # +0.0 scrubs the negative zero of -0/e1
        profile = RootProfile(RootKind.DOUBLE_ROOT, r=r, r1=r, r2=r, at_root=at_root)
        return DerivedConstants(C=C, mu0=mu0, c=None), profile

    if C < 0.0:
        s = math.sqrt(-C)
        r1 = (-0.5 * e2 - s) / e1 + 0.0
        r2 = (-0.5 * e2 + s) / e1 + 0.0
        if r1 > r2:
            r1, r2 = r2, r1
        if at_root:
            position, c = RootPosition.AT_ROOT, None
        elif e1 * p_y0 < 0.0:  # strictly between the roots
            position, c = RootPosition.INSIDE, math.atanh(-mu0 / s)
        else:
            u = -mu0 / s  # |u| > 1 outside the roots
            position, c = RootPosition.OUTSIDE, 0.5 * math.log((u + 1.0) / (u - 1.0))
        profile = RootProfile(
            RootKind.TWO_REAL_ROOTS,
            r1=r1,
            r2=r2,
            position=position,
            at_root=at_root,
        )
        return DerivedConstants(C=C, mu0=mu0, c=c), profile

    c = math.atan(-mu0 / math.sqrt(C))
    return DerivedConstants(C=C, mu0=mu0, c=c), RootProfile(RootKind.COMPLEX_ROOTS)


def roots_of(profile: RootProfile) -> list[float]:
    """Real roots of P in increasing order; empty for complex roots and for P == 0."""
    if profile.kind is RootKind.COMPLEX_ROOTS:
        return []
    if profile.kind is RootKind.LINEAR:
        return [profile.r] if profile.r is not None else []
    if profile.kind is RootKind.DOUBLE_ROOT:
        return [profile.r]
    return [profile.r1, profile.r2]


def has_root_at_or_above(profile: RootProfile, x0: float) -> bool:
    """True when some real root r satisfies r >= x0 (stopped-martingale test)."""
    return any(r >= x0 for r in roots_of(profile))
