"""Euler oracle: exactly solvable baselines, absorption, caps, determinism.

The oracle is deliberately plain (no weights, no bridge correction), so the
expected values here account for its known discretization effects:

* barrier monitoring only at grid points undercounts absorptions; the
  Broadie-Glasserman-Kou barrier shift beta*sqrt(dt), beta = 0.5826, gives
  the discrete-monitoring probability to O(dt), far inside MC noise below;
* strong convergence on the geometric case has order in [1/2, 1], so
  halving dt shrinks the pathwise RMS error by a factor in about [1.4, 2].
"""

import math

import numpy as np
import pytest
from scipy.special import ndtr

from qnv.errors import ResourceError
from qnv.euler import EulerParams, euler_price, euler_terminal
from qnv.payoffs import ClaimSpec, digital, identity
from qnv.poly import PolynomialSpec

BGK_SHIFT = 0.5826

BM_SPEC = PolynomialSpec(0.0, 0.0, 1.0, 1.0)
GBM_SPEC = PolynomialSpec(0.0, 1.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Exactly solvable dynamics
# ---------------------------------------------------------------------------


def test_bm_terminal_moments():
    # constant volatility: the scheme is exact in distribution
    rng = np.random.default_rng(1)
    n, steps, dt = 20_000, 100, 0.01
    d_w = rng.standard_normal((n, steps)) * math.sqrt(dt)
    y = euler_terminal(BM_SPEC, d_w, absorb_at_zero=False)
    assert np.allclose(y, 1.0 + d_w.sum(axis=1))
    assert abs(y.mean() - 1.0) < 4.0 * math.sqrt(1.0 / n)
    assert abs(y.var() - 1.0) < 4.0 * math.sqrt(2.0 / (n - 1))


def test_gbm_moments():
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    params = EulerParams(seed=3, dt=1e-3, n_paths=50_000, absorb_at_zero=False)
    est = euler_price(GBM_SPEC, claim, params)
    # the chain is a martingale step by step, so the mean is unbiased
    assert abs(est.mean - 1.0) < 4.0 * est.stderr
    assert est.diagnostics["n_absorbed"] == 0
    assert est.diagnostics["n_exploded"] == 0


def test_gbm_second_moment():
    rng = np.random.default_rng(5)
    n, steps, dt = 50_000, 200, 0.005
    d_w = rng.standard_normal((n, steps)) * math.sqrt(dt)
    y = euler_terminal(GBM_SPEC, d_w, absorb_at_zero=False)
    sq = y * y
    # per-step second-moment factor is exactly (1 + dt)
    expected = (1.0 + dt) ** steps
    assert abs(sq.mean() - expected) < 4.0 * sq.std(ddof=1) / math.sqrt(n)


def test_strong_convergence_rate_on_gbm():
    # shared increments, closed form exp(W_T - T/2) as the reference
    rng = np.random.default_rng(7)
    n, fine_steps, dt = 1_000, 200, 0.01
    fine = rng.standard_normal((n, fine_steps)) * math.sqrt(dt / 2.0)
    coarse = fine[:, 0::2] + fine[:, 1::2]
    exact = np.exp(fine.sum(axis=1) - 0.5)
    err_coarse = np.sqrt(np.mean((euler_terminal(GBM_SPEC, coarse, absorb_at_zero=False) - exact) ** 2))
    err_fine = np.sqrt(np.mean((euler_terminal(GBM_SPEC, fine, absorb_at_zero=False) - exact) ** 2))
    assert 1.2 <= err_coarse / err_fine <= 2.2


# ---------------------------------------------------------------------------
# Absorption at zero
# ---------------------------------------------------------------------------


def test_absorbed_fraction_matches_discrete_barrier_probability():
    dt = 1e-3
    params = EulerParams(seed=11, dt=dt, n_paths=20_000, absorb_at_zero=True)
    claim = ClaimSpec(horizon=1.0, dollar=digital(0.0))
    est = euler_price(BM_SPEC, claim, params)
    frac = est.diagnostics["n_absorbed"] / params.n_paths
    p_disc = 2.0 * ndtr(-(1.0 + BGK_SHIFT * math.sqrt(dt)))
    se = math.sqrt(p_disc * (1.0 - p_disc) / params.n_paths)
    assert abs(frac - p_disc) < 4.0 * se
    # survivors are exactly the paths the digital pays on
    assert est.mean == 1.0 - frac


def test_absorbed_paths_freeze_at_zero():
    rng = np.random.default_rng(13)
    d_w = rng.standard_normal((10_000, 250)) * math.sqrt(1.0 / 250.0)
    y = euler_terminal(BM_SPEC, d_w, absorb_at_zero=True)
    assert y.min() >= 0.0
    absorbed = y == 0.0
    assert absorbed.any()
    # freezing is permanent: replaying the suffix cannot revive a path
    assert np.all(y[absorbed] == 0.0)


def test_stopped_mean_is_start_value():
    params = EulerParams(seed=17, dt=1e-3, n_paths=20_000, absorb_at_zero=True)
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    est = euler_price(BM_SPEC, claim, params)
    assert abs(est.mean - 1.0) < 4.0 * est.stderr


# ---------------------------------------------------------------------------
# Cap handling
# ---------------------------------------------------------------------------


def test_cap_hit_warns_and_counts():
    spec = PolynomialSpec(1.0, 0.0, 0.0, 1.0)
    params = EulerParams(seed=19, dt=1e-3, n_paths=2_000, absorb_at_zero=False, cap=5.0)
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    with pytest.warns(RuntimeWarning, match="cap"):
        est = euler_price(spec, claim, params)
    assert est.diagnostics["n_exploded"] > 0
    # capped paths contribute at the cap, so the estimate stays finite
    assert np.isfinite(est.mean) and np.isfinite(est.stderr)


def test_default_cap_scales_with_start():
    assert EulerParams(seed=1).resolve_cap(3.0) == 3e6
    assert EulerParams(seed=1).resolve_cap(0.5) == 1e6
    assert EulerParams(seed=1, cap=123.0).resolve_cap(3.0) == 123.0


# ---------------------------------------------------------------------------
# Determinism and budget
# ---------------------------------------------------------------------------


def test_threads_and_reruns_are_deterministic():
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    base = dict(seed=23, dt=1e-2, n_paths=30_000, chunk_paths=8192)
    one = euler_price(BM_SPEC, claim, EulerParams(**base, threads=1))
    four = euler_price(BM_SPEC, claim, EulerParams(**base, threads=4))
    again = euler_price(BM_SPEC, claim, EulerParams(**base, threads=1))
    assert one.mean == four.mean == again.mean
    assert one.stderr == four.stderr
    assert one.diagnostics == four.diagnostics
    other = euler_price(BM_SPEC, claim, EulerParams(seed=24, dt=1e-2, n_paths=30_000))
    assert other.mean != one.mean


def test_increment_budget_guard():
    claim = ClaimSpec(horizon=1.0, dollar=identity())
    with pytest.raises(ResourceError):
        euler_price(BM_SPEC, claim, EulerParams(seed=1, dt=1e-7, n_paths=10**7))
