"""Run configuration: flat key=value files with block prefixes.

Example::

    model.e1 = 1.0
    model.e2 = -3.0
    model.e3 = 2.0
    model.y0 = 1.5
    claim.kind = capped-call
    claim.strike = 1.0
    claim.cap = 4.0
    claim.horizon = 1.0
    engine.estimator = all
    engine.n_paths = 100000
    engine.seed = 7
    output.format = json

Unknown keys are rejected outright; a typo must never silently fall back to
a default.  `emit_config` writes the canonical form back out, and re-reading
that text reproduces the run bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, QnvError
from .payoffs import (
    ClaimSpec,
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
from .poly import PolynomialSpec

__all__ = [
    "RunConfig",
    "parse_config",
    "load_config",
    "emit_config",
    "build_payoff",
]

_MODEL_KEYS = ("e1", "e2", "e3", "y0")
_ESTIMATORS = ("transform", "euler", "gbm-dual", "all")
_FORMATS = ("json", "csv")

# Parameters each payoff kind consumes; anything else under its prefix is a
# config error.  "inner" nests one non-barrier payoff.
_KIND_PARAMS: dict[str, tuple[str, ...]] = {
    "identity": (),
    "reciprocal": (),
    "constant": ("value",),
    "call": ("strike",),
    "put": ("strike",),
    "digital": ("strike",),
    "capped-call": ("strike", "cap"),
    "down-and-in": ("level", "inner"),
    "table": ("points", "value_at_inf"),
}


@dataclass(frozen=True)
class RunConfig:
    """Parsed run: domain objects plus the payoff descriptions for echoing."""

    spec: PolynomialSpec
    claim: ClaimSpec
    dollar_desc: dict
    euro_desc: dict | None
    estimator: str
    n_paths: int
    n_steps: int | None
    dt: float | None
    seed: int
    out_format: str
    out_path: str | None


# --------------------------------------------------------------------------
# Payoff descriptions <-> Payoff objects
# --------------------------------------------------------------------------


def build_payoff(desc: dict) -> Payoff:
    """Build a payoff from its canonical description dict.

    The description is what both the config parser and the service request
    models produce: {"kind": ..., <params>}, with "inner" another description
    and "points" a list of [x, value] pairs.
    """
    kind = desc.get("kind")
    if kind not in _KIND_PARAMS:
        known = ", ".join(sorted(_KIND_PARAMS))
        raise ConfigError(f"unknown payoff kind {kind!r}; expected one of: {known}")
    allowed = _KIND_PARAMS[kind]
    for key in desc:
        if key != "kind" and key not in allowed:
            raise ConfigError(f"payoff kind {kind!r} does not take {key!r}")

    def need(name: str):
        if name not in desc:
            raise ConfigError(f"payoff kind {kind!r} needs {name!r}")
        return desc[name]

    try:
        if kind == "identity":
            return identity()
        if kind == "reciprocal":
            return reciprocal()
        if kind == "constant":
            return constant(float(need("value")))
        if kind == "call":
            return call(float(need("strike")))
        if kind == "put":
            return put(float(need("strike")))
        if kind == "digital":
            return digital(float(need("strike")))
        if kind == "capped-call":
            return capped_call(float(need("strike")), float(need("cap")))
        if kind == "down-and-in":
            inner = need("inner")
            if inner.get("kind") == "down-and-in":
                raise ConfigError("down-and-in payoffs do not nest")
            return down_and_in(float(need("level")), build_payoff(inner))
        points = [(float(x), float(v)) for x, v in need("points")]
        return table(points, float(desc.get("value_at_inf", 0.0)))
    except ConfigError:
        raise
    except (QnvError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad {kind!r} payoff: {exc}") from exc


def _parse_points(raw: str) -> list[list[float]]:
    points = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError(f"table point {item!r} is not of the form x:value")
        points.append([_parse_float("claim.table.points", parts[0]), _parse_float("claim.table.points", parts[1])])
    return points


def _format_points(points: list) -> str:
    return ",".join(f"{float(x)!r}:{float(v)!r}" for x, v in points)


def _desc_from_flat(flat: dict[str, str], prefix: str) -> dict:
    """Assemble a payoff description from its flat sub-block."""
    desc: dict = {}
    inner: dict[str, str] = {}
    for key, value in flat.items():
        if key.startswith("inner."):
            inner[key[len("inner."):]] = value
        elif key == "kind":
            desc["kind"] = value
        elif key in ("strike", "cap", "value", "level"):
            desc[key] = _parse_float(f"{prefix}{key}", value)
        elif key == "table.points":
            desc["points"] = _parse_points(value)
        elif key == "table.value_at_inf":
            desc["value_at_inf"] = _parse_float(f"{prefix}{key}", value)
        else:
            raise ConfigError(f"unknown config key {prefix}{key!r}")
    if inner:
        desc["inner"] = _desc_from_flat(inner, prefix + "inner.")
    if "kind" not in desc:
        raise ConfigError(f"payoff block {prefix!r} is missing {prefix}kind")
    return desc


def _flat_from_desc(desc: dict, prefix: str, out: list[tuple[str, str]]) -> None:
    out.append((prefix + "kind", desc["kind"]))
    for key in ("strike", "cap", "value", "level"):
        if key in desc:
            out.append((prefix + key, repr(float(desc[key]))))
    if "points" in desc:
        out.append((prefix + "table.points", _format_points(desc["points"])))
    if "value_at_inf" in desc:
        out.append((prefix + "table.value_at_inf", repr(float(desc["value_at_inf"]))))
    if "inner" in desc:
        _flat_from_desc(desc["inner"], prefix + "inner.", out)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw, 10)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _split_lines(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def parse_config(text: str) -> RunConfig:
    entries = _split_lines(text)

    model: dict[str, float] = {}
    claim_flat: dict[str, str] = {}
    euro_flat: dict[str, str] = {}
    horizon = 1.0
    estimator = "transform"
    n_paths = 100_000
    n_steps: int | None = None
    dt: float | None = None
    seed: int | None = None
    out_format = "json"
    out_path: str | None = None

    for key, value in entries.items():
        if key.startswith("model."):
            name = key[len("model."):]
            if name not in _MODEL_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            model[name] = _parse_float(key, value)
        elif key == "claim.horizon":
            horizon = _parse_float(key, value)
        elif key.startswith("claim.euro."):
            euro_flat[key[len("claim.euro."):]] = value
        elif key.startswith("claim."):
            claim_flat[key[len("claim."):]] = value
        elif key == "engine.estimator":
            if value not in _ESTIMATORS:
                raise ConfigError(f"{key}: expected one of {', '.join(_ESTIMATORS)}, got {value!r}")
            estimator = value
        elif key == "engine.n_paths":
            n_paths = _parse_int(key, value)
        elif key == "engine.n_steps":
            n_steps = _parse_int(key, value)
        elif key == "engine.dt":
            dt = _parse_float(key, value)
        elif key == "engine.seed":
            seed = _parse_int(key, value)
        elif key == "output.format":
            if value not in _FORMATS:
                raise ConfigError(f"{key}: expected one of {', '.join(_FORMATS)}, got {value!r}")
            out_format = value
        elif key == "output.path":
            out_path = value
        else:
            raise ConfigError(f"unknown config key {key!r}")

    missing = [k for k in _MODEL_KEYS if k not in model]
    if missing:
        raise ConfigError("missing model coefficients: " + ", ".join(f"model.{k}" for k in missing))
    if seed is None:
        raise ConfigError("engine.seed is mandatory")
    if n_paths <= 0:
        raise ConfigError(f"engine.n_paths must be positive, got {n_paths}")
    if n_steps is not None and n_steps <= 0:
        raise ConfigError(f"engine.n_steps must be positive, got {n_steps}")
    if dt is not None and not dt > 0.0:
        raise ConfigError(f"engine.dt must be positive, got {dt}")

    dollar_desc = _desc_from_flat(claim_flat, "claim.") if claim_flat else {"kind": "identity"}
    euro_desc = _desc_from_flat(euro_flat, "claim.euro.") if euro_flat else None
    if euro_desc is not None and estimator != "transform":
        raise ConfigError("a euro leg is priced by the transform estimator only")

    dollar = build_payoff(dollar_desc)
    euro = build_payoff(euro_desc) if euro_desc is not None else None

    spec = PolynomialSpec(model["e1"], model["e2"], model["e3"], model["y0"])
    claim = ClaimSpec(horizon=horizon, dollar=dollar, euro=euro)
    return RunConfig(
        spec=spec,
        claim=claim,
        dollar_desc=dollar_desc,
        euro_desc=euro_desc,
        estimator=estimator,
        n_paths=n_paths,
        n_steps=n_steps,
        dt=dt,
        seed=seed,
        out_format=out_format,
        out_path=out_path,
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text)


def emit_config(cfg: RunConfig) -> str:
    """Canonical text for a RunConfig; parse(emit(parse(x))) == parse(x)."""
    lines: list[tuple[str, str]] = [
        ("model.e1", repr(cfg.spec.e1)),
        ("model.e2", repr(cfg.spec.e2)),
        ("model.e3", repr(cfg.spec.e3)),
        ("model.y0", repr(cfg.spec.y0)),
    ]
    _flat_from_desc(cfg.dollar_desc, "claim.", lines)
    lines.append(("claim.horizon", repr(cfg.claim.horizon)))
    if cfg.euro_desc is not None:
        _flat_from_desc(cfg.euro_desc, "claim.euro.", lines)
    lines.append(("engine.estimator", cfg.estimator))
    lines.append(("engine.n_paths", str(cfg.n_paths)))
    if cfg.n_steps is not None:
        lines.append(("engine.n_steps", str(cfg.n_steps)))
    if cfg.dt is not None:
        lines.append(("engine.dt", repr(cfg.dt)))
    lines.append(("engine.seed", str(cfg.seed)))
    lines.append(("output.format", cfg.out_format))
    if cfg.out_path is not None:
        lines.append(("output.path", cfg.out_path))
    return "".join(f"{k} = {v}\n" for k, v in lines)
