"""Brownian engine: path statistics, determinism, weights and events.

Monte Carlo tolerances follow the usual CLT accounting: with a fixed seed
every assertion is deterministic, and bands are set at 3-4 standard errors
of the quantity under test.
"""

import math

import numpy as np
import pytest
from scipy.stats import kstest

from qnv.closed_forms import build
from qnv.engine import (
    MCParams,
    Task,
    event_E1,
    event_E2,
    price_stopped,
    price_unstopped,
    run_tasks,
    simulate_paths,
    stopping_indices,
)
from qnv.errors import ResourceError
from qnv.payoffs import ClaimSpec, PathStats, Payoff, constant, digital, identity
from qnv.poly import PolynomialSpec, dual_polynomial
from qnv.verify import FIXTURE_SPECS

STD_NORMAL_MASS_WITHIN_1 = 0.6826894921370859  # 2*Phi(1) - 1


class TestPathGrid:
    def test_grid_contract(self):
        for grid in simulate_paths(seed=5, n_paths=3, horizon=2.0, n_steps=16):
            assert grid.w[0] == 0.0
            assert grid.times[0] == 0.0 and grid.times[-1] == 2.0
            assert grid.w.shape == (17,)
            # bridge adjustment may only widen the extrema
            assert np.all(grid.run_min <= np.minimum.accumulate(grid.w) + 1e-15)
            assert np.all(grid.run_max >= np.maximum.accumulate(grid.w) - 1e-15)
            assert np.all(np.diff(grid.run_min) <= 1e-15)
            assert np.all(np.diff(grid.run_max) >= -1e-15)

    def test_paths_reproducible(self):
        a = [g.w.copy() for g in simulate_paths(seed=9, n_paths=5, horizon=1.0, n_steps=8)]
        b = [g.w.copy() for g in simulate_paths(seed=9, n_paths=5, horizon=1.0, n_steps=8)]
        for wa, wb in zip(a, b):
            assert np.array_equal(wa, wb)

    def test_terminal_is_standard_normal(self):
        horizon = 1.7
        w_t = np.array(
            [g.w[-1] for g in simulate_paths(seed=31, n_paths=8192, horizon=horizon, n_steps=32)]
        )
        stat = kstest(w_t / math.sqrt(horizon), "norm")
        assert stat.pvalue > 0.01
        assert abs(w_t.mean()) < 4.0 * math.sqrt(horizon / 8192)

    def test_budget_guard(self):
        with pytest.raises(ResourceError):
            list(simulate_paths(seed=1, n_paths=10**9, horizon=1.0, n_steps=10**6))
        with pytest.raises(ResourceError):
            price_stopped(
                PolynomialSpec(0.0, 0.0, 1.0, 1.0),
                ClaimSpec(horizon=1.0, dollar=identity()),
                MCParams(seed=1, n_paths=10**9, n_steps=10**6),
            )


# ---------------------------------------------------------------------------
# Weight normalization: pricing the constant claim must hit 1 exactly
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("spec", FIXTURE_SPECS, ids=str)
def test_unit_claim_prices_to_one(spec):
    claim = ClaimSpec(horizon=1.0, dollar=constant(1.0))
    est = price_stopped(spec, claim, MCParams(seed=17, n_paths=8192, n_steps=64))
    # control variate turns every path contribution into w + (1 - w)
    assert abs(est.mean - 1.0) <= 1e-12
    assert est.stderr <= 1e-12


def test_control_variate_reduces_noise():
    spec = PolynomialSpec(1.0, -3.0, 2.0, 1.5)
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    base = MCParams(seed=23, n_paths=20_000, n_steps=128)
    with_cv = price_stopped(spec, claim, base)
    without_cv = price_stopped(spec, claim, MCParams(seed=23, n_paths=20_000, n_steps=128, control_variate=False))
    assert with_cv.stderr < without_cv.stderr
    z = (with_cv.mean - without_cv.mean) / math.hypot(with_cv.stderr, without_cv.stderr)
    assert abs(z) < 4.0


# ---------------------------------------------------------------------------
# Known values
# ---------------------------------------------------------------------------


def test_stopped_bm_survival_probability():
    # Brownian motion from 1 absorbed at 0: survival by T=1 is 2*Phi(1)-1
    spec = PolynomialSpec(0.0, 0.0, 1.0, 1.0)
    claim = ClaimSpec(horizon=1.0, dollar=digital(0.0))
    est = price_stopped(spec, claim, MCParams(seed=41, n_paths=50_000, n_steps=256))
    assert abs(est.mean - STD_NORMAL_MASS_WITHIN_1) < 3.0 * est.stderr


def test_stopped_bm_mean_is_start():
    spec = PolynomialSpec(0.0, 0.0, 1.0, 1.0)
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    est = price_stopped(spec, claim, MCParams(seed=43, n_paths=50_000, n_steps=256))
    assert abs(est.mean - 1.0) < 3.0 * est.stderr


def test_inverse_bessel_defect_visible():
    # strict local case: the estimate must sit below y0 by far more than noise
    spec = PolynomialSpec(1.0, 0.0, 0.0, 1.0)
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    est = price_stopped(spec, claim, MCParams(seed=47, n_paths=50_000, n_steps=256))
    assert est.mean < 1.0 - 20.0 * est.stderr
    assert abs(est.mean - STD_NORMAL_MASS_WITHIN_1) < 4.0 * est.stderr


def test_unstopped_equals_stopped_when_zero_unreachable():
    # the inverse-Bessel map never reaches zero, so the two modes coincide
    spec = PolynomialSpec(1.0, 0.0, 0.0, 1.0)
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    params = MCParams(seed=53, n_paths=10_000, n_steps=128)
    a = price_unstopped(spec, claim, params)
    b = price_stopped(spec, claim, params)
    assert a.mean == b.mean
    assert a.stderr == b.stderr


# ---------------------------------------------------------------------------
# Scheduling determinism
# ---------------------------------------------------------------------------


def test_threads_do_not_change_results():
    spec = PolynomialSpec(1.0, -3.0, 2.0, 3.0)
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    one = price_stopped(spec, claim, MCParams(seed=29, n_paths=30_000, n_steps=128, threads=1))
    four = price_stopped(spec, claim, MCParams(seed=29, n_paths=30_000, n_steps=128, threads=4))
    assert one.mean == four.mean
    assert one.stderr == four.stderr
    assert one.diagnostics == four.diagnostics


def test_common_random_numbers_across_tasks():
    spec = PolynomialSpec(1.0, -3.0, 2.0, 1.5)
    map_ = build(spec)
    tasks = [
        Task(map_, identity(), "stopped"),
        Task(map_, identity(), "stopped"),
    ]
    res = run_tasks(tasks, 1.0, MCParams(seed=59, n_paths=5_000, n_steps=64))
    assert np.array_equal(res[0].contributions, res[1].contributions)


# ---------------------------------------------------------------------------
# Exit events from running extrema
# ---------------------------------------------------------------------------


def _final_extrema(seed: int, n_paths: int, n_steps: int, horizon: float = 1.0):
    mins, maxs = [], []
    for g in simulate_paths(seed=seed, n_paths=n_paths, horizon=horizon, n_steps=n_steps):
        mins.append(g.run_min[-1])
        maxs.append(g.run_max[-1])
    return np.array(mins), np.array(maxs)


def test_event_e1_trivial_cases():
    run_min = np.array([-2.0, -0.5])
    run_max = np.array([0.5, 3.0])
    assert np.all(event_E1(PolynomialSpec(0.0, 0.0, 1.0, 1.0), run_min, run_max))
    assert np.all(event_E1(PolynomialSpec(2.0, -4.0, 2.0, 1.0), run_min, run_max))


def test_event_e1_inverse_bessel_is_max_below_one():
    # mu0 = 1: survival of the open interval means the running max stays
    # below 1/mu0 = 1
    spec = PolynomialSpec(1.0, 0.0, 0.0, 1.0)
    run_min, run_max = _final_extrema(seed=61, n_paths=8192, n_steps=64)
    assert np.array_equal(event_E1(spec, run_min, run_max), run_max < 1.0)


@pytest.mark.parametrize(
    "spec",
    list(FIXTURE_SPECS) + [PolynomialSpec(1.0, 0.0, 1.0, 1.0), PolynomialSpec(2.0, -4.0, 2.5, 1.0)],
    ids=str,
)
def test_event_e1_matches_domain_boundaries(spec):
    map_ = build(spec)
    run_min, run_max = _final_extrema(seed=67, n_paths=8192, n_steps=64)
    direct = (run_min > map_.a) & (run_max < map_.b)
    assert np.array_equal(event_E1(spec, run_min, run_max), direct)


@pytest.mark.parametrize(
    "spec",
    [PolynomialSpec(1.0, 0.0, 0.0, 1.0), PolynomialSpec(1.0, -3.0, 2.0, 3.0)],
    ids=str,
)
def test_event_e1_matches_stopping_indices(spec):
    # f has no zero in range for these specs, so the only stop is the domain
    # exit and the sentinel view must agree with the extrema view per path
    assert build(spec).zero_of_f() is None
    params = MCParams(seed=67, n_paths=8192, n_steps=64)
    idx = stopping_indices(spec, 1.0, params)
    run_min, run_max = _final_extrema(seed=67, n_paths=8192, n_steps=64)
    survived = idx["tau_trigger"] == idx["sentinel"]
    assert np.array_equal(event_E1(spec, run_min, run_max), survived)


def test_event_e2_always_true_with_root_above_start():
    spec = PolynomialSpec(1.0, -3.0, 2.0, 1.5)
    stopped_min = np.array([-9.0, -0.1, 0.0])
    stopped_max = np.array([9.0, 0.1, 0.0])
    assert np.all(event_E2(spec, stopped_min, stopped_max))


def test_stop_swap_between_primal_and_dual():
    # the dual path explodes exactly where the primal hits zero and vice versa
    for spec in (PolynomialSpec(1.0, 0.0, 1.0, 1.0), PolynomialSpec(1.0, 0.0, 0.0, 1.0)):
        params = MCParams(seed=71, n_paths=10_000, n_steps=128)
        primal = stopping_indices(spec, 1.0, params)
        dual = stopping_indices(dual_polynomial(spec), 1.0, params)
        assert np.array_equal(primal["s_trigger"], dual["tau_trigger"])
        assert np.array_equal(primal["tau_trigger"], dual["s_trigger"])


# ---------------------------------------------------------------------------
# Payoff plumbing through the engine
# ---------------------------------------------------------------------------


def test_path_dependent_payoff_sees_running_extrema():
    spec = PolynomialSpec(0.0, 0.0, 1.0, 1.0)
    seen = {}

    def grab(stats: PathStats):
        seen["min"] = stats.run_min.copy()
        seen["max"] = stats.run_max.copy()
        return np.ones_like(stats.terminal)

    claim = ClaimSpec(horizon=1.0, dollar=Payoff("probe", grab))
    price_stopped(spec, claim, MCParams(seed=73, n_paths=512, n_steps=16))
    assert seen["min"].shape == (512,)
    assert np.all(seen["min"] <= seen["max"])
    # absorbed paths report a floor of exactly zero
    assert np.all(seen["min"] >= 0.0)
