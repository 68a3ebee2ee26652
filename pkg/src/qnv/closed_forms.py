"""Closed-form transform of Brownian motion for quadratic diffusion coefficients.

For dY = P(Y) dB with P(z) = e1*z^2 + e2*z + e3 and Y_0 = y0 > 0 there is a
maximal open interval (a, b) around 0 and a pair (f, g) on it with

    f' = P(f),     f(0) = y0,
    -g'' = C*g,    g(0) = 1,  g'(0) = -mu0,

where C = e1*e3 - e2^2/4 and mu0 = e1*y0 + e2/2.  Then Y_t = f(W_t) stopped
at the exit of W from (a, b), priced under the measure tilt e^{Ct/2} g(W_t).
f is strictly monotone on (a, b), explodes at any finite endpoint, and g
vanishes there.  The branch of (f, g, a, b) is decided by the root layout of
P; each branch below solves the same ODE data, which the tests verify by
finite differences rather than by trusting the algebra.

The reciprocal process 1/Y follows the dual coefficients (-e3, -e2, -e1), and
its transform triple is g_hat = g*f/y0, f_hat = 1/f on the subinterval of
(a, b) cut down to exclude zeros of f.  Near a finite endpoint (within 1e-8)
f is evaluated through the dual branch as 1/f_hat, which is regular there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import CaseError, DomainError, RangeError
from .poly import (
    DerivedConstants,
    PolynomialSpec,
    RootKind,
    RootProfile,
    classify,
    dual_polynomial,
)

__all__ = ["Branch", "ClosedFormMap", "ReciprocalMap", "build", "reciprocal_map"]

# Distance from a finite endpoint below which f switches to the reciprocal of
# the dual branch; the direct formula diverges there and loses precision first.
_NEAR_BOUNDARY = 1e-8


class Branch(Enum):
    FROZEN = "frozen"                # P(y0) = 0: Y is constant
    BM_SCALE = "bm-scale"            # e1 = e2 = 0: scaled Brownian motion
    EXP = "exp"                      # e1 = 0, e2 != 0: shifted geometric BM
    RATIONAL = "rational"            # double root: Moebius transform
    HYPERBOLIC_IN = "hyperbolic-in"   # two roots, y0 between them: tanh
    HYPERBOLIC_OUT = "hyperbolic-out"  # two roots, y0 outside: coth
    TRIG = "trig"                    # complex roots: tan


def _split(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _merge(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


@dataclass(frozen=True)
class ClosedFormMap:
    """Transform triple (f, g) on (a, b) for one diffusion spec.

    a < 0 < b (possibly infinite); ``increasing`` is the sign of f' on the
    interval; (range_lo, range_hi) is the open range of f.  Evaluation is
    vectorized; scalar in, scalar out.
    """

    spec: PolynomialSpec
    constants: DerivedConstants
    profile: RootProfile
    branch: Branch
    a: float
    b: float
    increasing: bool
    range_lo: float
    range_hi: float

    # ------------------------------------------------------------------ f

    def _f_raw(self, x: np.ndarray) -> np.ndarray:
        e1, e2, e3 = self.spec.coefficients()
        y0 = self.spec.y0
        mu0 = self.constants.mu0
        c = self.constants.c
        if self.branch is Branch.FROZEN:
            return np.full_like(x, y0)
        if self.branch is Branch.BM_SCALE:
            return e3 * x + y0
        if self.branch is Branch.EXP:
            r = -e3 / e2
            return (y0 - r) * np.exp(e2 * x) + r
        if self.branch is Branch.RATIONAL:
            r = -0.5 * e2 / e1
            return (y0 - r) / (1.0 - mu0 * x) + r
        if self.branch is Branch.HYPERBOLIC_IN:
            s = math.sqrt(-self.constants.C)
            return (-s / e1) * np.tanh(s * x + c) - 0.5 * e2 / e1
        if self.branch is Branch.HYPERBOLIC_OUT:
            s = math.sqrt(-self.constants.C)
            return (-s / e1) / np.tanh(s * x + c) - 0.5 * e2 / e1
        rc = math.sqrt(self.constants.C)
        return (-rc / e1) * np.tan(-rc * x + c) - 0.5 * e2 / e1

    def f(self, x):
        """Transform value; +-inf exactly at a finite endpoint."""
        arr, scalar = _split(x)
        self._check_domain(arr)
        flat = np.atleast_1d(arr)
        with np.errstate(all="ignore"):
            out = self._f_raw(flat)
        # Exact endpoint hits and the near-endpoint band go through the dual
        # branch: f = 1/f_hat with f_hat regular (and zero exactly at a, b).
        for endpoint, toward_hi in ((self.a, not self.increasing), (self.b, self.increasing)):
            if not math.isfinite(endpoint):
                continue
            at = flat == endpoint
            out[at] = math.inf if toward_hi else -math.inf
            near = (np.abs(flat - endpoint) < _NEAR_BOUNDARY) & ~at
            if np.any(near):
                dual = build(dual_polynomial(self.spec))
                with np.errstate(all="ignore"):
                    out[near] = 1.0 / dual._f_raw(flat[near])
        out = out.reshape(np.shape(arr))
        return _merge(out, scalar)

    # ------------------------------------------------------------------ g

    def g(self, x):
        """Measure-change factor; exactly 0.0 at a finite endpoint."""
        arr, scalar = _split(x)
        self._check_domain(arr)
        e2 = self.spec.e2
        mu0 = self.constants.mu0
        c = self.constants.c
        if self.branch is Branch.FROZEN:
            out = np.exp(-mu0 * arr)
        elif self.branch is Branch.BM_SCALE:
            out = np.ones_like(arr)
        elif self.branch is Branch.EXP:
            out = np.exp(-0.5 * e2 * arr)
        elif self.branch is Branch.RATIONAL:
            out = 1.0 - mu0 * arr
        elif self.branch is Branch.HYPERBOLIC_IN:
            s = math.sqrt(-self.constants.C)
            out = np.cosh(s * arr + c) / math.cosh(c)
        elif self.branch is Branch.HYPERBOLIC_OUT:
            s = math.sqrt(-self.constants.C)
            out = np.sinh(s * arr + c) / math.sinh(c)
        else:
            rc = math.sqrt(self.constants.C)
            out = np.cos(rc * arr - c) / math.cos(c)
        for endpoint in (self.a, self.b):
            if math.isfinite(endpoint):
                out = np.where(arr == endpoint, 0.0, out)
        return _merge(out, scalar)

    # ----------------------------------------------------------------- mu

    def mu(self, x):
        """Drift-like function mu = e1*f + e2/2 (exact composition)."""
        arr, scalar = _split(x)
        return _merge(self.spec.e1 * np.asarray(self.f(arr)) + 0.5 * self.spec.e2, scalar)

    # ------------------------------------------------------------- invert

    def invert_f(self, y):
        """Unique x in (a, b) with f(x) = y; RangeError outside the open range."""
        arr, scalar = _split(y)
        if self.branch is Branch.FROZEN:
            ok = arr == self.spec.y0
            if not np.all(ok):
                bad = np.asarray(arr)[~ok] if not scalar else arr
                raise RangeError(
                    f"constant transform at {self.spec.y0}: cannot invert {bad!r}"
                )
            return _merge(np.zeros_like(arr), scalar)
        inside = (arr > self.range_lo) & (arr < self.range_hi)
        if not np.all(inside):
            bad = float(np.asarray(arr).ravel()[np.argmin(inside)])
            raise RangeError(
                f"{bad!r} outside the open range ({self.range_lo}, {self.range_hi})"
            )
        e1, e2, e3 = self.spec.coefficients()
        y0 = self.spec.y0
        mu0 = self.constants.mu0
        c = self.constants.c
        if self.branch is Branch.BM_SCALE:
            out = (arr - y0) / e3
        elif self.branch is Branch.EXP:
            r = -e3 / e2
            out = np.log((arr - r) / (y0 - r)) / e2
        elif self.branch is Branch.RATIONAL:
            r = -0.5 * e2 / e1
            out = (1.0 - (y0 - r) / (arr - r)) / mu0
        elif self.branch is Branch.HYPERBOLIC_IN:
            s = math.sqrt(-self.constants.C)
            out = (np.arctanh(-(e1 * arr + 0.5 * e2) / s) - c) / s
        elif self.branch is Branch.HYPERBOLIC_OUT:
            s = math.sqrt(-self.constants.C)
            u = -(e1 * arr + 0.5 * e2) / s
            out = (0.5 * np.log((u + 1.0) / (u - 1.0)) - c) / s
        else:
            rc = math.sqrt(self.constants.C)
            out = (c - np.arctan(-(e1 * arr + 0.5 * e2) / rc)) / rc
        return _merge(out, scalar)

    # ------------------------------------------------------------ helpers

    def zero_of_f(self) -> float | None:
        """Level x_S with f(x_S) = 0, or None when 0 is not in the range."""
        if self.range_lo < 0.0 < self.range_hi:
            return float(self.invert_f(0.0))
        return None

    def hyperinflation_boundary(self) -> float | None:
        """Finite endpoint where f explodes to +inf, or None."""
        end = self.b if self.increasing else self.a
        return end if math.isfinite(end) else None

    def _check_domain(self, arr: np.ndarray) -> None:
        bad = ~((arr >= self.a) & (arr <= self.b))  # catches NaN too
        if np.any(bad):
            offender = float(np.asarray(arr).ravel()[np.argmax(bad.ravel())])
            raise DomainError(f"{offender!r} outside [{self.a}, {self.b}]")


@lru_cache(maxsize=None)
def build(spec: PolynomialSpec) -> ClosedFormMap:
    """Construct the transform triple for a spec (cached; maps are immutable)."""
    constants, profile = classify(spec)
    e1, e2, e3 = spec.coefficients()
    y0 = spec.y0
    mu0 = constants.mu0
    c = constants.c
    inf = math.inf

    if profile.at_root:
        return ClosedFormMap(
            spec, constants, profile, Branch.FROZEN,
            a=-inf, b=inf, increasing=True, range_lo=y0, range_hi=y0,
        )

    if profile.kind is RootKind.LINEAR:
        if profile.linear_kind is not None and profile.r is None:
            # e2 == 0, e3 != 0: scaled Brownian motion
            return ClosedFormMap(
                spec, constants, profile, Branch.BM_SCALE,
                a=-inf, b=inf, increasing=e3 > 0, range_lo=-inf, range_hi=inf,
            )
        r = profile.r
        lim = {True: inf, False: -inf}[y0 > r]
        lo, hi = min(r, lim), max(r, lim)
        increasing = (e2 * (y0 - r)) > 0  # sign of f' = P(f0) = e2*(f0 - r)
        return ClosedFormMap(
            spec, constants, profile, Branch.EXP,
            a=-inf, b=inf, increasing=increasing, range_lo=lo, range_hi=hi,
        )

    if profile.kind is RootKind.DOUBLE_ROOT:
        # mu0 = e1*(y0 - r) != 0 here; mu0 = 0 implies at-root, handled above.
        bound = 1.0 / mu0
        a, b = (-inf, bound) if mu0 > 0 else (bound, inf)
        r = profile.r
        lim = inf if (y0 > r) else -inf
        lo, hi = min(r, lim), max(r, lim)
        return ClosedFormMap(
            spec, constants, profile, Branch.RATIONAL,
            a=a, b=b, increasing=e1 > 0, range_lo=lo, range_hi=hi,
        )

    if profile.kind is RootKind.TWO_REAL_ROOTS:
        s = math.sqrt(-constants.C)
        if abs(mu0) < s:
            return ClosedFormMap(
                spec, constants, profile, Branch.HYPERBOLIC_IN,
                a=-inf, b=inf, increasing=e1 < 0,
                range_lo=profile.r1, range_hi=profile.r2,
            )
        bound = -c / s
        a, b = (bound, inf) if c > 0 else (-inf, bound)
        lo, hi = (profile.r2, inf) if y0 > profile.r2 else (-inf, profile.r1)
        return ClosedFormMap(
            spec, constants, profile, Branch.HYPERBOLIC_OUT,
            a=a, b=b, increasing=e1 > 0, range_lo=lo, range_hi=hi,
        )

    rc = math.sqrt(constants.C)
    return ClosedFormMap(
        spec, constants, profile, Branch.TRIG,
        a=(c - 0.5 * math.pi) / rc, b=(c + 0.5 * math.pi) / rc,
        increasing=e1 > 0, range_lo=-inf, range_hi=inf,
    )


@dataclass(frozen=True)
class ReciprocalMap:
    """Transform triple of 1/Y expressed through the primal triple.

    f_hat = 1/f and g_hat = g*f/y0 on (a_hat, b_hat), the primal interval cut
    at the zero of f.  At the surviving primal endpoint g_hat has a finite
    positive limit (the dual branch value); at a zero of f it vanishes.
    """

    base: ClosedFormMap
    spec: PolynomialSpec  # dual coefficients, started at 1/y0
    a: float
    b: float

    def f(self, x):
        arr, scalar = _split(x)
        self._check_domain(arr)
        base_f = np.asarray(self.base.f(np.clip(arr, self.base.a, self.base.b)))
        with np.errstate(divide="ignore"):
            out = 1.0 / base_f
        return _merge(out, scalar)

    def g(self, x):
        arr, scalar = _split(x)
        self._check_domain(arr)
        flat = np.atleast_1d(arr)
        out = np.empty_like(flat)
        interior = (flat > self.a) & (flat < self.b)
        if np.any(interior):
            xi = flat[interior]
            out[interior] = (
                np.asarray(self.base.g(xi)) * np.asarray(self.base.f(xi)) / self.base.spec.y0
            )
        # Endpoints: zero where f_hat explodes (zero of f); the dual branch
        # limit where the primal g vanishes but f explodes.
        dual = build(self.spec)
        for endpoint in (self.a, self.b):
            if not math.isfinite(endpoint):
                continue
            at = flat == endpoint
            if np.any(at):
                if endpoint in (self.base.a, self.base.b):
                    out[at] = float(dual.g(endpoint))
                else:
                    out[at] = 0.0
        out = out.reshape(np.shape(arr))
        return _merge(out, scalar)

    def mu(self, x):
        arr, scalar = _split(x)
        f_hat = np.asarray(self.f(arr))
        return _merge(self.spec.e1 * f_hat + 0.5 * self.spec.e2, scalar)

    def _check_domain(self, arr: np.ndarray) -> None:
        bad = ~((arr >= self.a) & (arr <= self.b))
        if np.any(bad):
            offender = float(np.asarray(arr).ravel()[np.argmax(bad.ravel())])
            raise DomainError(f"{offender!r} outside [{self.a}, {self.b}]")


def reciprocal_map(map_: ClosedFormMap) -> ReciprocalMap:
    """Restrict-and-invert: the transform of 1/Y on the primal interval.

    The interval shrinks to exclude the zero of f (where 1/f explodes); the
    result agrees with build(dual_polynomial(spec)) on the shared interior.
    """
    if map_.branch is Branch.FROZEN:
        return ReciprocalMap(map_, dual_polynomial(map_.spec), map_.a, map_.b)
    x_s = map_.zero_of_f()
    a_hat, b_hat = map_.a, map_.b
    if x_s is not None:
        if x_s < 0:
            a_hat = x_s
        else:
            b_hat = x_s
    return ReciprocalMap(map_, dual_polynomial(map_.spec), a_hat, b_hat)
