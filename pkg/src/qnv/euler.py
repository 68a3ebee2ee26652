"""Plain Euler-Maruyama oracle for dY = (e1*Y^2 + e2*Y + e3) dB.

Deliberately primitive and fully independent of the transform engine: the
scheme discretizes the SDE itself, so its only shared vocabulary with the
rest of the package is the spec type, the claim/payoff protocol, and the
result container.  Use it to cross-check the exact routes, not for accuracy:
terminal laws converge at weak order dt, absorption and running extrema are
read off the grid (no bridge correction, barrier probabilities biased low by
O(sqrt(dt))), and the quadratic branches can overshoot; paths beyond the cap
are frozen there, counted, and reported with a warning.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NonFinitePayoff, ResourceError
from .estimates import PriceEstimate, summarize
from .payoffs import ClaimSpec, PathStats
from .poly import PolynomialSpec

__all__ = ["EulerParams", "euler_price", "euler_terminal"]

STREAM_EULER = 2


@dataclass(frozen=True)
class EulerParams:
    """Oracle parameters.

    cap freezes runaway paths at +-cap (default 1e6 * max(1, y0)); absorbed
    paths freeze at 0.  Chunking and seeding mirror the engine's determinism
    contract with an independent stream tag.
    """

    seed: int
    dt: float = 1e-3
    n_paths: int = 100_000
    absorb_at_zero: bool = True
    cap: float | None = None
    chunk_paths: int = 65536
    threads: int = 1
    max_increments: int = 40_000_000_000

    def resolve_cap(self, y0: float) -> float:
        return self.cap if self.cap is not None else 1e6 * max(1.0, y0)

    def resolve_steps(self, horizon: float) -> int:
        return max(1, round(horizon / self.dt))


def _rng(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(STREAM_EULER, chunk))
    return np.random.Generator(np.random.Philox(ss))


def _chunk_sizes(n_paths: int, chunk_paths: int) -> list[tuple[int, int]]:
    out = []
    k, left = 0, n_paths
    while left > 0:
        out.append((k, min(chunk_paths, left)))
        left -= out[-1][1]
        k += 1
    return out


def euler_terminal(
    spec: PolynomialSpec,
    d_w: np.ndarray,
    absorb_at_zero: bool = True,
    cap: float = 1e6,
) -> np.ndarray:
    """Terminal values driven by a given increment matrix (for convergence tests)."""
    e1, e2, e3 = spec.coefficients()
    y = np.full(d_w.shape[0], spec.y0)
    frozen = np.zeros(d_w.shape[0], dtype=bool)
    for k in range(d_w.shape[1]):
        vol = (e1 * y + e2) * y + e3
        y_new = np.where(frozen, y, y + vol * d_w[:, k])
        if absorb_at_zero:
            hit = ~frozen & (y_new <= 0.0)
            y_new[hit] = 0.0
            frozen |= hit
        blown = ~frozen & (np.abs(y_new) >= cap)
        y_new[blown] = np.sign(y_new[blown]) * cap
        frozen |= blown
        y = y_new
    return y


def euler_price(spec: PolynomialSpec, claim: ClaimSpec, params: EulerParams) -> PriceEstimate:
    """Average the claim over Euler paths; estimator tag "euler".

    Payoffs are taken as-is (no weights, no nonnegativity requirement: the
    discretized unstopped process can go negative where the exact one
    cannot, and that bias is part of what this oracle is for).
    """
    n_steps = params.resolve_steps(claim.horizon)
    if params.n_paths * n_steps > params.max_increments:
        raise ResourceError(
            f"{params.n_paths} paths x {n_steps} steps exceeds the budget of {params.max_increments}"
        )
    dt = claim.horizon / n_steps
    sq = math.sqrt(dt)
    cap = params.resolve_cap(spec.y0)
    e1, e2, e3 = spec.coefficients()

    def process(chunk_size: tuple[int, int]) -> tuple[np.ndarray, int, int]:
        chunk, size = chunk_size
        rng = _rng(params.seed, chunk)
        y = np.full(size, spec.y0)
        frozen = np.zeros(size, dtype=bool)
        absorbed = np.zeros(size, dtype=bool)
        exploded = np.zeros(size, dtype=bool)
        run_min = y.copy()
        run_max = y.copy()
        for _ in range(n_steps):
            xi = rng.standard_normal(size)
            vol = (e1 * y + e2) * y + e3
            y_new = np.where(frozen, y, y + vol * (sq * xi))
            if params.absorb_at_zero:
                hit = ~frozen & (y_new <= 0.0)
                y_new[hit] = 0.0
                absorbed |= hit
                frozen |= hit
            blown = ~frozen & (np.abs(y_new) >= cap)
            y_new[blown] = np.sign(y_new[blown]) * cap
            exploded |= blown
            frozen |= blown
            y = y_new
            np.minimum(run_min, y, out=run_min)
            np.maximum(run_max, y, out=run_max)
        stats = PathStats(terminal=y, run_min=run_min, run_max=run_max)
        values = np.asarray(claim.dollar(stats), dtype=float)
        if np.any(np.isnan(values)):
            raise NonFinitePayoff(f"payoff {claim.dollar.label} returned NaN on an Euler path")
        return values, int(np.sum(absorbed)), int(np.sum(exploded))

    chunk_list = _chunk_sizes(params.n_paths, params.chunk_paths)
    if params.threads > 1:
        with ThreadPoolExecutor(max_workers=params.threads) as pool:
            outs = list(pool.map(process, chunk_list))
    else:
        outs = [process(cs) for cs in chunk_list]

    n_absorbed = sum(o[1] for o in outs)
    n_exploded = sum(o[2] for o in outs)
    if n_exploded:
        warnings.warn(
            f"{n_exploded} Euler paths hit the cap {cap:g}; their payoffs are biased",
            RuntimeWarning,
            stacklevel=2,
        )
    contributions = np.concatenate([o[0] for o in outs])
    return summarize(
        contributions,
        params.seed,
        "euler",
        {"n_absorbed": n_absorbed, "n_exploded": n_exploded, "dt": dt},
    )
