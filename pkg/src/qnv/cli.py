"""Command-line front end.

    qnv classify|price|verify|defect --config FILE [--threads N]
        [--format json|csv] [--output PATH] [--server URL] [--timings]

Commands run in-process by default; --server URL sends the same request to a
running service instead.  Exit codes: 0 ok, 2 config parse error, 3 model or
claim error, 4 verification failure, 5 resource budget exceeded.

Output is deterministic for a fixed config: floats are printed with 17
significant digits (full round-trip precision), thread count never changes a
number, and runtime_ms stays 0.0 unless --timings is given.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import httpx

from .config import RunConfig, load_config
from .errors import ConfigError, QnvError, ResourceError
from .service import (
    RESPONSE_MODELS,
    classify_payload,
    defect_payload,
    price_payload,
    verify_payload,
)

__all__ = ["main", "dumps17"]

_COMMANDS = ("classify", "price", "verify", "defect")


# --------------------------------------------------------------------------
# Deterministic rendering
# --------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def _render(obj, indent: int) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{pad}{json.dumps(str(k))}: {_render(v, indent + 1)}" for k, v in obj.items()
        )
        return "{\n" + items + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{pad}{_render(v, indent + 1)}" for v in obj)
        return "[\n" + items + "\n" + "  " * indent + "]"
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(str(obj))


def dumps17(payload: dict) -> str:
    """JSON text with floats at 17 significant digits, stable key order."""
    return _render(payload, 0) + "\n"


def _flatten(obj, prefix: str, rows: list[tuple[str, str]]) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(v, f"{prefix}.{k}" if prefix else str(k), rows)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(v, f"{prefix}.{i}", rows)
    elif isinstance(obj, bool):
        rows.append((prefix, "true" if obj else "false"))
    elif isinstance(obj, float):
        rows.append((prefix, _fmt_float(obj)))
    elif obj is None:
        rows.append((prefix, ""))
    else:
        rows.append((prefix, str(obj)))


def render_csv(payload: dict) -> str:
    import csv

    rows: list[tuple[str, str]] = []
    _flatten(payload, "", rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    writer.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# Dispatch
# --------------------------------------------------------------------------


def _run_local(command: str, cfg: RunConfig, threads: int, timings: bool) -> dict:
    if command == "classify":
        return classify_payload(cfg.spec, timings=timings)
    if command == "price":
        claim_desc = {
            "horizon": cfg.claim.horizon,
            "dollar": cfg.dollar_desc,
            "euro": cfg.euro_desc,
        }
        return price_payload(
            cfg.spec, cfg.claim, claim_desc,
            cfg.estimator, cfg.n_paths, cfg.n_steps, cfg.dt, cfg.seed, threads, timings,
        )
    if command == "defect":
        return defect_payload(
            cfg.spec, cfg.claim.horizon, cfg.n_paths, cfg.n_steps, cfg.seed, threads, timings
        )
    return verify_payload(cfg.spec, cfg.n_paths, cfg.seed, threads, timings)


def _request_body(command: str, cfg: RunConfig, threads: int, timings: bool) -> dict:
    model = {"e1": cfg.spec.e1, "e2": cfg.spec.e2, "e3": cfg.spec.e3, "y0": cfg.spec.y0}
    if command == "classify":
        return {"model": model, "timings": timings}
    engine = {
        "estimator": cfg.estimator,
        "n_paths": cfg.n_paths,
        "n_steps": cfg.n_steps,
        "dt": cfg.dt,
        "seed": cfg.seed,
        "threads": threads,
        "timings": timings,
    }
    if command == "price":
        claim = {"horizon": cfg.claim.horizon, "dollar": cfg.dollar_desc, "euro": cfg.euro_desc}
        return {"model": model, "claim": claim, "engine": engine}
    if command == "defect":
        return {"model": model, "horizon": cfg.claim.horizon, "engine": engine}
    return {"model": model, "engine": engine}


def _run_remote(command: str, server: str, body: dict) -> tuple[dict | None, int]:
    url = server.rstrip("/") + "/" + command
    try:
        resp = httpx.post(url, json=body, timeout=600.0)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach {url}: {exc}", file=sys.stderr)
        return None, 1
    if resp.status_code == 200:
        return resp.json(), 0
    try:
        detail = resp.json()
    except ValueError:
        detail = {"detail": resp.text}
    print(f"error: {detail.get('detail', resp.text)}", file=sys.stderr)
    if resp.status_code == 422:
        return None, 2
    return None, int(detail.get("exit_code", 3))


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qnv", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("classify", "root layout, constants, martingality and transform branch"),
        ("price", "run the configured estimator(s) on the configured claim"),
        ("verify", "run the invariant suites; nonzero exit on failure"),
        ("defect", "martingale defect of the zero-stopped process at the horizon"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="flat key=value run configuration")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results unchanged)")
        p.add_argument("--format", choices=["json", "csv"], default=None, help="override output.format")
        p.add_argument("--output", default=None, help="override output.path (default stdout)")
        p.add_argument("--server", default=None, help="POST to a running service instead of in-process")
        p.add_argument("--timings", action="store_true", help="report wall time (breaks byte-stability)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2

    try:
        cfg = load_config(args.config)
        if args.server is None:
            payload = _run_local(args.command, cfg, args.threads, args.timings)
        else:
            body = _request_body(args.command, cfg, args.threads, args.timings)
            payload, code = _run_remote(args.command, args.server, body)
            if payload is None:
                return code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except QnvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    # Round-trip through the response model so field order and value shapes
    # match the HTTP path byte for byte.
    body = RESPONSE_MODELS[args.command](**payload).model_dump()
    fmt = args.format or cfg.out_format
    text = dumps17(body) if fmt == "json" else render_csv(body)
    _write(text, args.output or cfg.out_path)

    if args.command == "verify" and not body["passed"]:
        return 4
    return 0
