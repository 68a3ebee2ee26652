"""Monte Carlo result container shared by every pricing route."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PriceEstimate", "summarize"]


@dataclass(frozen=True)
class PriceEstimate:
    """Point estimate with its sampling error.

    ci95 is mean +- 1.96 stderr.  diagnostics carries route-specific counters
    (absorbed/exploded path counts, raw weight mean, ...) and never feeds back
    into the estimate itself.
    """

    mean: float
    stderr: float
    ci95: tuple[float, float]
    n_paths: int
    seed: int
    estimator: str
    diagnostics: dict = field(default_factory=dict)


def summarize(
    contributions: np.ndarray,
    seed: int,
    estimator: str,
    diagnostics: dict | None = None,
) -> PriceEstimate:
    """Reduce per-path contributions to a PriceEstimate.

    The input array is in fixed path order, so np.sum's pairwise reduction
    makes the result independent of how chunks were scheduled.
    """
    n = contributions.size
    mean = float(np.sum(contributions) / n)
    if n > 1:
        stderr = float(np.sqrt(np.sum((contributions - mean) ** 2) / (n - 1)) / math.sqrt(n))
    else:
        stderr = math.inf
    half = 1.96 * stderr
    return PriceEstimate(
        mean=mean,
        stderr=stderr,
        ci95=(mean - half, mean + half),
        n_paths=n,
        seed=seed,
        estimator=estimator,
        diagnostics=diagnostics or {},
    )
