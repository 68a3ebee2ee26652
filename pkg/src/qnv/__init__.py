"""Pricing and diagnostics for quadratic normal volatility models.

A process with quadratic absolute volatility dY = P(Y) dB is a deterministic
transform of Brownian motion: Y = f(W) up to a first exit, with prices
recovered as weighted averages e^{Ct/2} g(W) of payoffs in f(W).  This
package builds those closed forms for every root layout of P, prices claims
on the zero-stopped process by exact-path Monte Carlo, classifies true versus
strict-local martingality (with closed-form defects where they exist), and
exposes the reciprocal-dual machinery: numeraire changes, the reflection
symmetry, semi-static barrier hedges and two-currency joint claims.
"""

from .closed_forms import Branch, ClosedFormMap, ReciprocalMap, build, reciprocal_map
from .config import RunConfig, build_payoff, emit_config, load_config, parse_config
from .engine import (
    MCParams,
    PathGrid,
    event_E1,
    event_E2,
    price_stopped,
    price_unstopped,
    simulate_paths,
    stopping_indices,
)
from .errors import (
    CaseError,
    ConfigError,
    DomainError,
    InvalidSpec,
    LegInconsistency,
    NonFinitePayoff,
    NonIntegrable,
    QnvError,
    RangeError,
    ResourceError,
    SpecShapeError,
)
from .estimates import PriceEstimate, summarize
from .euler import EulerParams, euler_price
from .gbm import GbmDualSpec, build_gbm_dual, gbm_price, hit_time_cdf, survival_probability
from .martingality import MartingalityReport, classify_martingality, martingale_defect
from .measures import (
    DualModel,
    FoellmerResult,
    HedgePlan,
    HedgePosition,
    JointClaim,
    dual_model,
    foellmer_expectation,
    joint_price,
    semistatic_hedge_plan,
    symmetry_check,
)
from .payoffs import (
    ClaimSpec,
    PathStats,
    Payoff,
    call,
    capped_call,
    constant,
    digital,
    down_and_in,
    identity,
    put,
    reciprocal,
    table,
)
from .poly import (
    DerivedConstants,
    PolynomialSpec,
    RootKind,
    RootPosition,
    RootProfile,
    classify,
    dual_polynomial,
    eval_poly,
)
from .verify import CheckResult, VerifyReport, run_verification, transform_residuals

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "CaseError",
    "CheckResult",
    "ClaimSpec",
    "ClosedFormMap",
    "ConfigError",
    "DerivedConstants",
    "DomainError",
    "DualModel",
    "EulerParams",
    "FoellmerResult",
    "GbmDualSpec",
    "HedgePlan",
    "HedgePosition",
    "InvalidSpec",
    "JointClaim",
    "LegInconsistency",
    "MCParams",
    "MartingalityReport",
    "NonFinitePayoff",
    "NonIntegrable",
    "PathGrid",
    "PathStats",
    "Payoff",
    "PolynomialSpec",
    "PriceEstimate",
    "QnvError",
    "RangeError",
    "ReciprocalMap",
    "ResourceError",
    "RootKind",
    "RootPosition",
    "RootProfile",
    "RunConfig",
    "SpecShapeError",
    "VerifyReport",
    "build",
    "build_gbm_dual",
    "build_payoff",
    "call",
    "capped_call",
    "classify",
    "classify_martingality",
    "constant",
    "digital",
    "down_and_in",
    "dual_model",
    "dual_polynomial",
    "emit_config",
    "euler_price",
    "eval_poly",
    "event_E1",
    "event_E2",
    "foellmer_expectation",
    "gbm_price",
    "hit_time_cdf",
    "identity",
    "joint_price",
    "load_config",
    "martingale_defect",
    "parse_config",
    "price_stopped",
    "price_unstopped",
    "put",
    "reciprocal",
    "reciprocal_map",
    "run_verification",
    "semistatic_hedge_plan",
    "simulate_paths",
    "stopping_indices",
    "summarize",
    "survival_probability",
    "symmetry_check",
    "table",
    "transform_residuals",
]
