"""HTTP facade and the command handlers behind it.

The CLI calls the ``*_payload`` handlers in-process by default and POSTs the
same request bodies to this app when pointed at a server, so both paths
produce identical response dictionaries.  Values that can be infinite (domain
endpoints) travel as null to stay inside strict JSON.
"""

from __future__ import annotations

import math
import time
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .closed_forms import build
from .config import build_payoff
from .engine import MCParams, price_stopped
from .errors import CaseError, ConfigError, QnvError, ResourceError
from .estimates import PriceEstimate
from .euler import EulerParams, euler_price
from .gbm import build_gbm_dual, gbm_price
from .martingality import classify_martingality, martingale_defect
from .measures import JointClaim, joint_price
from .payoffs import ClaimSpec, identity
from .poly import PolynomialSpec, RootKind, classify
from .verify import run_verification

__all__ = ["app", "classify_payload", "price_payload", "defect_payload", "verify_payload"]

_KIND_NAMES = {
    RootKind.LINEAR: "Linear",
    RootKind.DOUBLE_ROOT: "DoubleRoot",
    RootKind.TWO_REAL_ROOTS: "TwoRealRoots",
    RootKind.COMPLEX_ROOTS: "NoRealRoots",
}


# --------------------------------------------------------------------------
# Request bodies
# --------------------------------------------------------------------------


class ModelBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")
    e1: float
    e2: float
    e3: float
    y0: float

    def to_spec(self) -> PolynomialSpec:
        return PolynomialSpec(self.e1, self.e2, self.e3, self.y0)


class PayoffBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: str
    strike: float | None = None
    cap: float | None = None
    value: float | None = None
    level: float | None = None
    inner: "PayoffBlock | None" = None
    points: list[tuple[float, float]] | None = None
    value_at_inf: float | None = None

    def description(self) -> dict:
        desc: dict = {"kind": self.kind}
        for name in ("strike", "cap", "value", "level", "value_at_inf"):
            v = getattr(self, name)
            if v is not None:
                desc[name] = v
        if self.points is not None:
            desc["points"] = [[x, v] for x, v in self.points]
        if self.inner is not None:
            desc["inner"] = self.inner.description()
        return desc


class ClaimBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")
    horizon: float
    dollar: PayoffBlock
    euro: PayoffBlock | None = None


class EngineBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")
    estimator: Literal["transform", "euler", "gbm-dual", "all"] = "transform"
    n_paths: int = Field(default=100_000, gt=0)
    n_steps: int | None = Field(default=None, gt=0)
    dt: float | None = Field(default=None, gt=0.0)
    seed: int
    threads: int = Field(default=1, gt=0)
    timings: bool = False


class ClassifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    model: ModelBlock
    timings: bool = False


class PriceRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    model: ModelBlock
    claim: ClaimBlock
    engine: EngineBlock


class DefectRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    model: ModelBlock
    horizon: float = 1.0
    engine: EngineBlock


class VerifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    model: ModelBlock | None = None
    engine: EngineBlock


# --------------------------------------------------------------------------
# Response bodies
# --------------------------------------------------------------------------


class EstimateBody(BaseModel):
    estimate: float
    stderr: float
    ci95: tuple[float, float]
    n_paths: int
    seed: int
    estimator: str
    spec: dict
    claim: dict
    runtime_ms: float
    diagnostics: dict


class PriceResponse(BaseModel):
    results: list[EstimateBody]
    pairwise_z: dict[str, float]


class ClassifyResponse(BaseModel):
    spec: dict
    constants: dict
    profile: dict
    branch: str
    domain: tuple[float | None, float | None]
    increasing: bool
    martingality: dict
    summary: str
    runtime_ms: float


class DefectResponse(BaseModel):
    spec: dict
    horizon: float
    defect: float
    defect_over_y0: float
    stderr: float
    method: str
    martingality: dict
    runtime_ms: float


class CheckBody(BaseModel):
    name: str
    passed: bool
    detail: str


class VerifyResponse(BaseModel):
    passed: bool
    checks: list[CheckBody]
    runtime_ms: float


RESPONSE_MODELS = {
    "classify": ClassifyResponse,
    "price": PriceResponse,
    "defect": DefectResponse,
    "verify": VerifyResponse,
}


# --------------------------------------------------------------------------
# Handlers
# --------------------------------------------------------------------------


def _spec_dict(spec: PolynomialSpec) -> dict:
    return {"e1": spec.e1, "e2": spec.e2, "e3": spec.e3, "y0": spec.y0}


def _none_if_inf(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return x


def _elapsed_ms(t0: float, timings: bool) -> float:
    # Wall time is noise as far as reproducibility goes; it only appears on
    # request.
    return (time.perf_counter() - t0) * 1e3 if timings else 0.0


def _martingality_dict(spec: PolynomialSpec) -> tuple[dict, str]:
    report = classify_martingality(spec)
    if report.unstopped_true and report.stopped_true:
        verdict = "true martingale (Y and X)"
    elif report.stopped_true:
        verdict = "strict local (Y), true martingale (X)"
    else:
        verdict = "strict local (Y and X)"
    body = {
        "unstopped_true": report.unstopped_true,
        "stopped_true": report.stopped_true,
        "reason": report.reason,
    }
    return body, verdict


def classify_payload(spec: PolynomialSpec, timings: bool = False) -> dict:
    t0 = time.perf_counter()
    constants, profile = classify(spec)
    map_ = build(spec)
    mart, verdict = _martingality_dict(spec)

    kind = _KIND_NAMES[profile.kind]
    if profile.kind is RootKind.DOUBLE_ROOT:
        head = f"{kind} r={profile.r:g}"
    elif profile.kind is RootKind.TWO_REAL_ROOTS:
        head = f"{kind} r1={profile.r1:g} r2={profile.r2:g}"
    else:
        head = kind
    if profile.at_root:
        head += " (started at a root)"

    return {
        "spec": _spec_dict(spec),
        "constants": {"C": constants.C, "mu0": constants.mu0, "c": constants.c},
        "profile": {
            "kind": kind,
            "at_root": profile.at_root,
            "r": profile.r,
            "r1": profile.r1,
            "r2": profile.r2,
            "position": profile.position.value if profile.position is not None else None,
        },
        "branch": map_.branch.name.lower(),
        "domain": (_none_if_inf(map_.a), _none_if_inf(map_.b)),
        "increasing": map_.increasing,
        "martingality": mart,
        "summary": f"{head}; {verdict}",
        "runtime_ms": _elapsed_ms(t0, timings),
    }


def _estimate_body(
    est: PriceEstimate, spec: PolynomialSpec, claim_desc: dict, runtime_ms: float
) -> dict:
    diagnostics = {
        k: (int(v) if isinstance(v, (int,)) else float(v)) for k, v in est.diagnostics.items()
    }
    return {
        "estimate": est.mean,
        "stderr": est.stderr,
        "ci95": tuple(est.ci95),
        "n_paths": est.n_paths,
        "seed": est.seed,
        "estimator": est.estimator,
        "spec": _spec_dict(spec),
        "claim": claim_desc,
        "runtime_ms": runtime_ms,
        "diagnostics": diagnostics,
    }


def price_payload(
    spec: PolynomialSpec,
    claim: ClaimSpec,
    claim_desc: dict,
    estimator: str,
    n_paths: int,
    n_steps: int | None,
    dt: float | None,
    seed: int,
    threads: int,
    timings: bool = False,
) -> dict:
    if claim.euro is not None and estimator != "transform":
        raise ConfigError("a euro leg is priced by the transform estimator only")

    routes = [estimator]
    if estimator == "all":
        routes = ["transform", "euler", "gbm-dual"]
        try:
            build_gbm_dual(spec)
        except CaseError:
            routes.remove("gbm-dual")

    mc = MCParams(seed=seed, n_paths=n_paths, n_steps=n_steps, threads=threads)
    results: list[tuple[str, PriceEstimate, float]] = []
    for route in routes:
        t0 = time.perf_counter()
        if route == "transform":
            if claim.euro is not None:
                est = joint_price(spec, JointClaim(claim), mc)
            else:
                est = price_stopped(spec, claim, mc)
        elif route == "euler":
            ep = EulerParams(seed=seed, n_paths=n_paths, threads=threads)
            if dt is not None:
                ep = EulerParams(seed=seed, dt=dt, n_paths=n_paths, threads=threads)
            est = euler_price(spec, claim, ep)
        else:
            est = gbm_price(spec, claim, mc)
        results.append((route, est, _elapsed_ms(t0, timings)))

    pairwise: dict[str, float] = {}
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            (name_a, a, _), (name_b, b, _) = results[i], results[j]
            spread = math.hypot(a.stderr, b.stderr)
            z = 0.0 if a.mean == b.mean else (a.mean - b.mean) / spread if spread else math.inf
            pairwise[f"{name_a}/{name_b}"] = z

    return {
        "results": [_estimate_body(est, spec, claim_desc, ms) for _, est, ms in results],
        "pairwise_z": pairwise,
    }


def defect_payload(
    spec: PolynomialSpec,
    horizon: float,
    n_paths: int,
    n_steps: int | None,
    seed: int,
    threads: int,
    timings: bool = False,
) -> dict:
    t0 = time.perf_counter()
    mart, _ = _martingality_dict(spec)
    if mart["stopped_true"]:
        defect, stderr, method = 0.0, 0.0, "zero"
    else:
        try:
            defect, stderr, method = martingale_defect(spec, horizon), 0.0, "closed-form"
        except CaseError:
            mc = MCParams(seed=seed, n_paths=n_paths, n_steps=n_steps, threads=threads)
            est = price_stopped(spec, ClaimSpec(horizon=horizon, dollar=identity()), mc)
            defect, stderr, method = spec.y0 - est.mean, est.stderr, "monte-carlo"
    return {
        "spec": _spec_dict(spec),
        "horizon": horizon,
        "defect": defect,
        "defect_over_y0": defect / spec.y0,
        "stderr": stderr,
        "method": method,
        "martingality": mart,
        "runtime_ms": _elapsed_ms(t0, timings),
    }


def verify_payload(
    spec: PolynomialSpec | None,
    n_paths: int,
    seed: int,
    threads: int,
    timings: bool = False,
) -> dict:
    t0 = time.perf_counter()
    params = MCParams(seed=seed, n_paths=n_paths, threads=threads)
    report = run_verification(spec, params)
    return {
        "passed": report.passed,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in report.checks],
        "runtime_ms": _elapsed_ms(t0, timings),
    }


# --------------------------------------------------------------------------
# FastAPI application
# --------------------------------------------------------------------------

app = FastAPI(title="qnv", description="Quadratic normal volatility pricing service")


@app.exception_handler(QnvError)
async def _qnv_error(request: Request, exc: QnvError) -> JSONResponse:
    if isinstance(exc, ConfigError):
        code = 2
    elif isinstance(exc, ResourceError):
        code = 5
    else:
        code = 3
    return JSONResponse(status_code=400, content={"detail": str(exc), "exit_code": code})


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/classify", response_model=ClassifyResponse)
def classify_endpoint(req: ClassifyRequest) -> dict:
    return classify_payload(req.model.to_spec(), timings=req.timings)


@app.post("/price", response_model=PriceResponse)
def price_endpoint(req: PriceRequest) -> dict:
    dollar_desc = req.claim.dollar.description()
    euro_desc = req.claim.euro.description() if req.claim.euro is not None else None
    claim = ClaimSpec(
        horizon=req.claim.horizon,
        dollar=build_payoff(dollar_desc),
        euro=build_payoff(euro_desc) if euro_desc is not None else None,
    )
    claim_desc = {"horizon": req.claim.horizon, "dollar": dollar_desc, "euro": euro_desc}
    e = req.engine
    return price_payload(
        req.model.to_spec(), claim, claim_desc,
        e.estimator, e.n_paths, e.n_steps, e.dt, e.seed, e.threads, e.timings,
    )


@app.post("/defect", response_model=DefectResponse)
def defect_endpoint(req: DefectRequest) -> dict:
    e = req.engine
    return defect_payload(
        req.model.to_spec(), req.horizon, e.n_paths, e.n_steps, e.seed, e.threads, e.timings
    )


@app.post("/verify", response_model=VerifyResponse)
def verify_endpoint(req: VerifyRequest) -> dict:
    spec = req.model.to_spec() if req.model is not None else None
    e = req.engine
    return verify_payload(spec, e.n_paths, e.seed, e.threads, e.timings)
