"""Monte Carlo pricing on transformed Brownian paths.

The process Y (or its zero-stopped version X) never gets discretized here:
paths of a standard Brownian motion W are exact on the grid, first exits and
zero hits are located through per-step Brownian-bridge extrema, and prices
are weighted averages e^{Ct/2} g(W) of the payoff evaluated at f(W).

Determinism contract: paths are generated in fixed-size chunks; chunk k draws
from Philox keyed by SeedSequence(entropy=seed, spawn_key=(stream, k)), and
reductions run in fixed chunk order.  Results are bit-identical for any
thread count, and any single path can be reproduced by regenerating its
chunk.

Bridge extrema: within each step the running minimum (maximum) is refreshed
with a sample of the bridge minimum (maximum) given the step endpoints, which
is exact marginally; the min and max of the same step are drawn independently,
a second-order approximation when both endpoints of (a, b) are finite.  Every
level check downstream (domain exit, zero hit, barrier payoffs, event tables)
reads the same adjusted extrema, so those checks agree with each other path
by path, not just in distribution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .closed_forms import Branch, ClosedFormMap, build
from .errors import NonFinitePayoff, NonIntegrable, QnvError, ResourceError
from .estimates import PriceEstimate, summarize
from .payoffs import ClaimSpec, PathStats, Payoff
from .poly import PolynomialSpec, RootKind, classify, dual_polynomial

__all__ = [
    "MCParams",
    "PathGrid",
    "Task",
    "TaskResult",
    "simulate_paths",
    "run_tasks",
    "price_unstopped",
    "price_stopped",
    "stopping_indices",
    "event_E1",
    "event_E2",
]

# Sub-stream tags; the Euler oracle and the two-root dual use their own so a
# shared seed never reuses random numbers across routes.
STREAM_TRANSFORM = 1


@dataclass(frozen=True)
class MCParams:
    """Engine parameters; defaults suit T about 1.

    n_steps overrides the per-unit-horizon resolution when set.  chunk_paths
    fixes the reproducibility granularity and must not depend on threads.
    """

    seed: int
    n_paths: int = 100_000
    steps_per_unit: int = 512
    n_steps: int | None = None
    chunk_paths: int = 4096
    threads: int = 1
    control_variate: bool = True
    max_increments: int = 40_000_000_000

    def resolve_steps(self, horizon: float) -> int:
        if self.n_steps is not None:
            return int(self.n_steps)
        return max(1, round(self.steps_per_unit * horizon))

    def check_budget(self, n_steps: int) -> None:
        total = self.n_paths * n_steps
        if total > self.max_increments:
            raise ResourceError(
                f"{self.n_paths} paths x {n_steps} steps = {total} increments "
                f"exceeds the budget of {self.max_increments}"
            )


@dataclass(frozen=True)
class PathGrid:
    """One simulated path: grid values plus bridge-adjusted running extrema.

    run_min[j] <= min(w[:j+1]) and run_max[j] >= max(w[:j+1]): the adjustment
    only ever widens.  Stopping indices are filled by pricing code that knows
    the levels; the bare simulator leaves them None.
    """

    times: np.ndarray
    w: np.ndarray
    run_min: np.ndarray
    run_max: np.ndarray
    tau_idx: int | None = None
    s_idx: int | None = None


@dataclass
class _Batch:
    w: np.ndarray        # (n, n_steps+1) exact grid values, w[:,0] = 0
    cum_min: np.ndarray  # (n, n_steps+1) bridge-adjusted running minima
    cum_max: np.ndarray
    dt: float
    n_steps: int

    @property
    def sentinel(self) -> int:
        return self.n_steps + 1


def _rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, chunk))
    return np.random.Generator(np.random.Philox(ss))


def _chunks(n_paths: int, chunk_paths: int) -> list[tuple[int, int]]:
    sizes = []
    k = 0
    remaining = n_paths
    while remaining > 0:
        size = min(chunk_paths, remaining)
        sizes.append((k, size))
        remaining -= size
        k += 1
    return sizes


def _sample_batch(seed: int, stream: int, chunk: int, n: int, n_steps: int, dt: float) -> _Batch:
    rng = _rng(seed, stream, chunk)
    z = rng.standard_normal((n, n_steps))
    u_lo = rng.random((n, n_steps))
    u_hi = rng.random((n, n_steps))
    w = np.empty((n, n_steps + 1))
    w[:, 0] = 0.0
    np.cumsum(z * math.sqrt(dt), axis=1, out=w[:, 1:])
    left, right = w[:, :-1], w[:, 1:]
    half = 0.5 * (left + right)
    gap2 = (right - left) ** 2
    # Bridge extremum sampling: P(min <= L) = exp(-2 (L-left)(L-right)/dt)
    # inverts to min = (left+right)/2 - sqrt((left-right)^2 - 2 dt ln U)/2.
    step_min = half - 0.5 * np.sqrt(gap2 - (2.0 * dt) * np.log1p(-u_lo))
    step_max = half + 0.5 * np.sqrt(gap2 - (2.0 * dt) * np.log1p(-u_hi))
    cum_min = np.minimum.accumulate(np.concatenate([w[:, :1], step_min], axis=1), axis=1)
    cum_max = np.maximum.accumulate(np.concatenate([w[:, :1], step_max], axis=1), axis=1)
    return _Batch(w=w, cum_min=cum_min, cum_max=cum_max, dt=dt, n_steps=n_steps)


def _first_touch(batch: _Batch, level: float | None) -> np.ndarray:
    """Index of the first grid point whose adjusted extremum reaches level.

    Levels are never 0 (the path starts there); negative levels are read off
    the running minima, positive ones off the maxima.  Sentinel = n_steps+1
    means no touch within the horizon.
    """
    n = batch.w.shape[0]
    if level is None or not math.isfinite(level):
        return np.full(n, batch.sentinel, dtype=np.int64)
    if level < 0.0:
        mask = batch.cum_min <= level
    else:
        mask = batch.cum_max >= level
    hit = mask.any(axis=1)
    return np.where(hit, mask.argmax(axis=1), batch.sentinel).astype(np.int64)


def simulate_paths(
    seed: int,
    n_paths: int,
    horizon: float,
    n_steps: int,
    chunk_paths: int = 4096,
    max_increments: int = 40_000_000_000,
) -> Iterator[PathGrid]:
    """Yield reproducible Brownian paths with bridge-adjusted running extrema."""
    if n_paths * n_steps > max_increments:
        raise ResourceError(
            f"{n_paths} paths x {n_steps} steps exceeds the budget of {max_increments}"
        )
    dt = horizon / n_steps
    times = np.linspace(0.0, horizon, n_steps + 1)
    for chunk, size in _chunks(n_paths, chunk_paths):
        batch = _sample_batch(seed, STREAM_TRANSFORM, chunk, size, n_steps, dt)
        for i in range(size):
            yield PathGrid(
                times=times,
                w=batch.w[i],
                run_min=batch.cum_min[i],
                run_max=batch.cum_max[i],
            )


# --------------------------------------------------------------------------
# Stopping structure of one transform on one batch
# --------------------------------------------------------------------------


@dataclass
class _StopData:
    idx_s: np.ndarray       # first touch of the zero level of f
    idx_hyper: np.ndarray   # first touch of the explosion endpoint (f -> +inf)
    idx_far: np.ndarray     # first touch of the other finite endpoint
    tau_idx: np.ndarray     # domain exit = min(idx_hyper, idx_far)
    absorbed: np.ndarray    # zero hit strictly before the horizon and before tau
    hyper: np.ndarray       # explosion before the horizon and before the zero hit
    survived: np.ndarray    # neither, for the stopped process
    x_s: float | None
    hyper_end: float | None


def _stop_data(map_: ClosedFormMap, batch: _Batch) -> _StopData:
    n_steps = batch.n_steps
    x_s = map_.zero_of_f()
    hyper_end = map_.hyperinflation_boundary()
    far_end = map_.a if map_.increasing else map_.b
    far_end = far_end if math.isfinite(far_end) else None

    idx_s = _first_touch(batch, x_s)
    idx_hyper = _first_touch(batch, hyper_end)
    idx_far = _first_touch(batch, far_end)
    tau_idx = np.minimum(idx_hyper, idx_far)

    in_horizon_s = idx_s <= n_steps
    in_horizon_h = idx_hyper <= n_steps

    # The far endpoint maps to -inf, which the path can only reach after
    # passing the zero of f, so a far exit never precedes absorption; ties
    # within one step go to the zero hit (continuity).  Against the explosion
    # endpoint, a same-step tie is genuinely ambiguous and goes to whichever
    # level is closer to the step's starting point.
    tie = (idx_s == idx_hyper) & in_horizon_s & in_horizon_h
    s_first = idx_s < idx_hyper
    if np.any(tie):
        rows = np.nonzero(tie)[0]
        w_prev = batch.w[rows, idx_s[rows] - 1]
        s_first = s_first.copy()
        s_first[rows] = np.abs(x_s - w_prev) <= np.abs(hyper_end - w_prev)

    absorbed = in_horizon_s & s_first
    hyper = in_horizon_h & ~s_first & (idx_hyper <= idx_far)
    survived = ~absorbed & ~hyper & (tau_idx > n_steps) & (idx_s > n_steps)
    return _StopData(
        idx_s=idx_s,
        idx_hyper=idx_hyper,
        idx_far=idx_far,
        tau_idx=tau_idx,
        absorbed=absorbed,
        hyper=hyper,
        survived=survived,
        x_s=x_s,
        hyper_end=hyper_end,
    )


# --------------------------------------------------------------------------
# Tasks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Task:
    """One expectation to accumulate over the shared path batch.

    mode "unstopped" prices h(Y_T) (survival of the full domain, no zero
    absorption); "stopped" prices h(X_T) with absorption at the zero of f;
    "hyper" accumulates the explosion-paths term of a joint claim, weighted
    by the dual transform's g at the endpoint.  The control variate exploits
    E[weight] = 1 and never applies to "hyper".
    """

    map: ClosedFormMap
    payoff: Payoff
    mode: str
    control_variate: bool = True


@dataclass
class TaskResult:
    contributions: np.ndarray
    diagnostics: dict


def _gather_prev(arr2d: np.ndarray, idx: np.ndarray, rows: np.ndarray) -> np.ndarray:
    return arr2d[rows, idx[rows] - 1]


def _check_values(values: np.ndarray, weight: np.ndarray, label: str) -> None:
    active = weight > 0.0
    vals = values[active]
    if np.any(np.isnan(vals)):
        raise NonFinitePayoff(f"payoff {label} returned NaN on a sampled path")
    if np.any(vals < 0.0):
        raise NonFinitePayoff(f"payoff {label} returned a negative value; claims must be nonnegative")
    if np.any(np.isinf(vals)):
        raise NonIntegrable(f"payoff {label} is infinite on a path with positive weight")


def _task_contrib(task: Task, sd: _StopData, batch: _Batch, horizon: float) -> np.ndarray:
    map_ = task.map
    n = batch.w.shape[0]
    n_steps = batch.n_steps
    C = map_.constants.C
    w_T = batch.w[:, n_steps]

    weight = np.zeros(n)
    terminal = np.zeros(n)
    lo = np.zeros(n)
    hi = np.zeros(n)

    if task.mode == "unstopped":
        alive = sd.tau_idx > n_steps
        if np.any(alive):
            weight[alive] = math.exp(0.5 * C * horizon) * np.asarray(map_.g(w_T[alive]))
            terminal[alive] = map_.f(w_T[alive])
            fmin = np.asarray(map_.f(batch.cum_min[alive, n_steps]))
            fmax = np.asarray(map_.f(batch.cum_max[alive, n_steps]))
            lo[alive] = fmin if map_.increasing else fmax
            hi[alive] = fmax if map_.increasing else fmin

    elif task.mode == "stopped":
        alive = sd.survived
        if np.any(alive):
            weight[alive] = math.exp(0.5 * C * horizon) * np.asarray(map_.g(w_T[alive]))
            terminal[alive] = map_.f(w_T[alive])
            fmin = np.asarray(map_.f(batch.cum_min[alive, n_steps]))
            fmax = np.asarray(map_.f(batch.cum_max[alive, n_steps]))
            lo[alive] = fmin if map_.increasing else fmax
            hi[alive] = fmax if map_.increasing else fmin
        rows = np.nonzero(sd.absorbed)[0]
        if rows.size:
            t_hit = (sd.idx_s[rows] - 0.5) * batch.dt
            g_at_zero = float(map_.g(sd.x_s))
            weight[rows] = np.exp(0.5 * C * t_hit) * g_at_zero
            terminal[rows] = 0.0
            lo[rows] = 0.0
            if map_.increasing:
                hi[rows] = map_.f(_gather_prev(batch.cum_max, sd.idx_s, rows))
            else:
                hi[rows] = map_.f(_gather_prev(batch.cum_min, sd.idx_s, rows))
        rows = np.nonzero(sd.hyper)[0]
        if rows.size:
            terminal[rows] = math.inf
            hi[rows] = math.inf
            if map_.increasing:
                lo[rows] = map_.f(_gather_prev(batch.cum_min, sd.idx_hyper, rows))
            else:
                lo[rows] = map_.f(_gather_prev(batch.cum_max, sd.idx_hyper, rows))

    elif task.mode == "hyper":
        rows = np.nonzero(sd.hyper)[0]
        if rows.size:
            dual_g = build(dual_polynomial(map_.spec)).g
            g_hat_end = float(dual_g(sd.hyper_end))
            t_hit = (sd.idx_hyper[rows] - 0.5) * batch.dt
            weight[rows] = np.exp(0.5 * C * t_hit) * g_hat_end
            terminal[rows] = math.inf
            hi[rows] = math.inf
            if map_.increasing:
                lo[rows] = map_.f(_gather_prev(batch.cum_min, sd.idx_hyper, rows))
            else:
                lo[rows] = map_.f(_gather_prev(batch.cum_max, sd.idx_hyper, rows))
    else:
        raise QnvError(f"unknown task mode {task.mode!r}")

    stats = PathStats(terminal=terminal, run_min=lo, run_max=hi)
    values = task.payoff(stats)
    if values.shape != weight.shape:
        raise NonFinitePayoff(
            f"payoff {task.payoff.label} returned shape {values.shape}, expected {weight.shape}"
        )
    _check_values(values, weight, task.payoff.label)
    contrib = np.zeros_like(weight)
    active = weight > 0.0
    contrib[active] = values[active] * weight[active]
    if task.control_variate and task.mode != "hyper":
        contrib = contrib + (1.0 - weight)
    return contrib


def run_tasks(tasks: list[Task], horizon: float, params: MCParams) -> list[TaskResult]:
    """Accumulate several expectations over one shared set of Brownian paths.

    All tasks see identical paths (common random numbers), so per-path
    differences between task contributions are meaningful.
    """
    if not tasks:
        return []
    n_steps = params.resolve_steps(horizon)
    params.check_budget(n_steps)
    dt = horizon / n_steps
    chunk_list = _chunks(params.n_paths, params.chunk_paths)

    maps = []
    for task in tasks:
        if task.map not in maps:
            maps.append(task.map)

    counters = [
        {"n_absorbed": 0, "n_hyper": 0, "n_survived": 0} for _ in tasks
    ]

    def process(chunk_size: tuple[int, int]) -> list:
        chunk, size = chunk_size
        batch = _sample_batch(params.seed, STREAM_TRANSFORM, chunk, size, n_steps, dt)
        stop_cache = {m: _stop_data(m, batch) for m in maps}
        out = []
        for task in tasks:
            sd = stop_cache[task.map]
            out.append((_task_contrib(task, sd, batch, horizon), sd))
        return out

    per_task_chunks: list[list[np.ndarray]] = [[] for _ in tasks]
    if params.threads > 1:
        with ThreadPoolExecutor(max_workers=params.threads) as pool:
            chunk_results = list(pool.map(process, chunk_list))
    else:
        chunk_results = [process(cs) for cs in chunk_list]
    for chunk_out in chunk_results:
        for t, (contrib, sd) in enumerate(chunk_out):
            per_task_chunks[t].append(contrib)
            counters[t]["n_absorbed"] += int(np.sum(sd.absorbed))
            counters[t]["n_hyper"] += int(np.sum(sd.hyper))
            counters[t]["n_survived"] += int(np.sum(sd.survived))

    results = []
    for t in range(len(tasks)):
        results.append(
            TaskResult(
                contributions=np.concatenate(per_task_chunks[t]),
                diagnostics=dict(counters[t]),
            )
        )
    return results


def price_unstopped(spec: PolynomialSpec, claim: ClaimSpec, params: MCParams) -> PriceEstimate:
    """E[h(Y_T)] for the free (unstopped) process."""
    map_ = build(spec)
    task = Task(map_, claim.dollar, "unstopped", params.control_variate)
    res = run_tasks([task], claim.horizon, params)[0]
    return summarize(res.contributions, params.seed, "transform", res.diagnostics)


def price_stopped(spec: PolynomialSpec, claim: ClaimSpec, params: MCParams) -> PriceEstimate:
    """E[h(X_T)] for the process absorbed at its first zero."""
    map_ = build(spec)
    task = Task(map_, claim.dollar, "stopped", params.control_variate)
    res = run_tasks([task], claim.horizon, params)[0]
    return summarize(res.contributions, params.seed, "transform", res.diagnostics)


def stopping_indices(spec: PolynomialSpec, horizon: float, params: MCParams) -> dict:
    """Effective stopping indices per path (for the zero/exit interchange check).

    s_trigger is the zero-hit index on paths the zero hit actually stopped,
    tau_trigger the exit index on paths the exit stopped; sentinel n_steps+1
    elsewhere.  Runs on the same paths as pricing with the same params.
    """
    map_ = build(spec)
    n_steps = params.resolve_steps(horizon)
    params.check_budget(n_steps)
    dt = horizon / n_steps
    sent = n_steps + 1
    s_parts, tau_parts = [], []
    for chunk, size in _chunks(params.n_paths, params.chunk_paths):
        batch = _sample_batch(params.seed, STREAM_TRANSFORM, chunk, size, n_steps, dt)
        sd = _stop_data(map_, batch)
        s_parts.append(np.where(sd.absorbed, sd.idx_s, sent))
        tau_parts.append(np.where(sd.hyper, sd.idx_hyper, sent))
    return {
        "s_trigger": np.concatenate(s_parts),
        "tau_trigger": np.concatenate(tau_parts),
        "sentinel": sent,
    }


# --------------------------------------------------------------------------
# Exit event tables
# --------------------------------------------------------------------------


def event_E1(spec: PolynomialSpec, run_min, run_max) -> np.ndarray:
    """Survival event {tau > T} from path extrema, by root-layout case.

    Mirror convention: cases with mu0 < 0 reuse the mu0 > 0 row with the path
    reflected, which lands on the expressions below.  Vectorized over paths.
    """
    run_min = np.asarray(run_min, dtype=float)
    run_max = np.asarray(run_max, dtype=float)
    constants, profile = classify(spec)
    mu0, C = constants.mu0, constants.C
    always = np.ones_like(run_min, dtype=bool)

    if profile.kind is RootKind.LINEAR or profile.at_root:
        return always
    if profile.kind is RootKind.DOUBLE_ROOT:
        if mu0 > 0:
            return run_max < 1.0 / mu0
        return run_min > 1.0 / mu0
    if C < 0.0:
        s = math.sqrt(-C)
        if abs(mu0) < s:
            return always
        u = -mu0 / s
        c = 0.5 * math.log((u + 1.0) / (u - 1.0))
        if c > 0:
            return run_min > -c / s
        return run_max < -c / s
    rc = math.sqrt(C)
    c = math.atan(-mu0 / rc)
    return (run_min > (c - 0.5 * math.pi) / rc) & (run_max < (c + 0.5 * math.pi) / rc)


def event_E2(spec: PolynomialSpec, stopped_min, stopped_max) -> np.ndarray:
    """Survival event {tau > T and S} from extrema of the zero-stopped path.

    Same table as event_E1; the stopping is encoded in the extrema.  When P
    has a real root at or above y0 this is identically true.
    """
    return event_E1(spec, stopped_min, stopped_max)
