"""Command-line front end: a thin client of the HTTP service.

By default the service runs in-process over an ASGI transport, so the CLI
works with no server running; --server points it at a remote instance
instead.  Exit codes: 0 success, 1 verification failure, 2 input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import httpx

from srot.config import ConfigError, RunConfig, default_config, load_config
from srot.fileio import (
    MeasureFormatError,
    REPORT_HEADER,
    TRANSPORT_HEADER,
    read_measure,
    read_plan,
    write_plan,
    write_report,
)
from srot.measures import Plan

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

CURVES_HEADER = "srot-curves v1"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _client(args) -> httpx.Client:
    if args.server:
        return httpx.Client(base_url=args.server, timeout=600.0)
    # no server configured: run the service in-process over a test transport
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from srot.service import create_app

    return TestClient(create_app())


def _post(client: httpx.Client, route: str, payload: dict) -> dict:
    response = client.post(route, json=payload)
    if response.status_code == 200:
        return response.json()
    try:
        body = response.json()
    except ValueError:
        body = {"detail": response.text, "kind": "input"}
    detail = body.get("detail", "request failed")
    kind = body.get("kind", "input")
    code = EXIT_NUMERICAL if kind == "numerical" else EXIT_INPUT
    raise CliError(f"{route}: {detail}", code)


def _run_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = default_config()
    if args.manifold:
        from srot.manifolds import by_name

        cfg = dataclasses.replace(cfg, manifold=by_name(args.manifold, args.dim))
    return cfg


def _common_payload(cfg: RunConfig) -> dict:
    name = cfg.manifold.name
    dim = None
    if name.startswith("euclidean"):
        dim = cfg.manifold.chart_dim
        name = "euclidean"
    shooting = dataclasses.asdict(cfg.shooting)
    shooting = {k: list(v) if isinstance(v, tuple) else v for k, v in shooting.items()}
    return {"manifold": name, "dim": dim, "shooting": shooting}


def _measure_payload(path) -> dict:
    mu = read_measure(path)
    return {
        "points": [[float(c) for c in p] for p in mu.points],
        "weights": [float(w) for w in mu.weights],
    }


def _parse_point(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"cannot parse point {text!r}", EXIT_INPUT) from None


def cmd_distance(args) -> int:
    cfg = _run_config(args)
    payload = _common_payload(cfg)
    payload["x"] = _parse_point(getattr(args, "from"))
    payload["y"] = _parse_point(args.to)
    with _client(args) as client:
        out = _post(client, "/distance", payload)
    print(f"distance = {out['distance']!r}")
    print("lam0 = " + " ".join(repr(v) for v in out["lam0"]))
    if out["constant_path"]:
        print("note: identical endpoints, constant path")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _run_config(args)
    payload = _common_payload(cfg)
    payload["mu0"] = _measure_payload(args.mu0)
    payload["mu1"] = _measure_payload(args.mu1)
    payload["method"] = args.method or cfg.solver_method
    payload["epsilon"] = args.epsilon if args.epsilon is not None else cfg.epsilon
    with _client(args) as client:
        out = _post(client, "/solve", payload)
    plan = Plan(out["plan"]["rows"], out["plan"]["cols"], out["plan"]["weights"])
    if args.out_plan:
        write_plan(args.out_plan, plan)
    print(f"cost = {out['cost']!r}")
    print(f"solver = {out['solver']}")
    if out.get("dual_gap") is not None:
        print(f"dual_gap = {out['dual_gap']!r}")
    return EXIT_OK


def cmd_build_bb(args) -> int:
    cfg = _run_config(args)
    payload = _common_payload(cfg)
    payload["mu0"] = _measure_payload(args.mu0)
    payload["mu1"] = _measure_payload(args.mu1)
    plan = read_plan(args.plan)
    payload["plan"] = {
        "rows": [int(i) for i in plan.rows],
        "cols": [int(j) for j in plan.cols],
        "weights": [float(w) for w in plan.weights],
    }
    with _client(args) as client:
        out = _post(client, "/build-bb", payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(TRANSPORT_HEADER + "\n")
            fh.write(f"curves = {len(out['weights'])}\n")
            fh.write(f"grid_points = {out['grid_points']}\n")
            for k in range(len(out["weights"])):
                fh.write(f"[curve {k}]\n")
                fh.write(f"weight = {out['weights'][k]!r}\n")
                fh.write(f"energy = {out['energies'][k]!r}\n")
                fh.write("start = " + " ".join(repr(v) for v in out["starts"][k]) + "\n")
                fh.write("end = " + " ".join(repr(v) for v in out["ends"][k]) + "\n")
    print(f"relaxed_cost = {out['relaxed_cost']!r}")
    print(f"pair_cost = {out['pair_cost']!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _run_config(args)
    payload = _common_payload(cfg)
    payload["mu0"] = _measure_payload(args.mu0)
    payload["mu1"] = _measure_payload(args.mu1)
    payload["tolerances"] = cfg.tolerances
    if args.corrupt_weight is not None:
        payload["corrupt_weight"] = args.corrupt_weight
    with _client(args) as client:
        out = _post(client, "/verify", payload)
    report = out["report"]
    if args.out_report:
        timestamp = None
        if args.timestamp:
            import datetime

            timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        write_report(args.out_report, report, timestamp=timestamp)
    for key, value in report.items():
        print(f"{key} = {value}")
    if out["passed"]:
        print("PASS")
        return EXIT_OK
    print("FAIL")
    return EXIT_FAIL


def cmd_emit_curves(args) -> int:
    cfg = _run_config(args)
    payload = _common_payload(cfg)
    payload["mu0"] = _measure_payload(args.mu0)
    payload["mu1"] = _measure_payload(args.mu1)
    plan = read_plan(args.plan)
    payload["plan"] = {
        "rows": [int(i) for i in plan.rows],
        "cols": [int(j) for j in plan.cols],
        "weights": [float(w) for w in plan.weights],
    }
    with _client(args) as client:
        out = _post(client, "/emit-curves", payload)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(CURVES_HEADER + "\n")
        fh.write("# " + " ".join(out["columns"]) + "\n")
        for row in out["rows"]:
            fh.write(" ".join(repr(v) for v in row) + "\n")
    print(f"wrote {len(out['rows'])} rows to {args.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    with _client(args) as client:
        out = _post(client, "/selftest", {})
    for check in out["checks"]:
        status = "ok" if check["ok"] else "FAIL"
        print(f"[{status}] {check['name']}: {check['value']!r}")
    if out["passed"]:
        print("PASS")
        return EXIT_OK
    print("FAIL")
    return EXIT_FAIL


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srot", description="sub-Riemannian optimal transport toolkit"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (strict INI)")
    common.add_argument("--server", help="base URL of a running service; default runs in-process")
    common.add_argument("--manifold", help="manifold name (heisenberg or euclidean)")
    common.add_argument("--dim", type=int, help="chart dimension for euclidean")
    common.add_argument("--threads", type=int, default=0, help="cap numeric worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "distance", parents=[common], help="sub-Riemannian distance between two points"
    )
    p.add_argument("--from", required=True, help="start point, comma-separated coordinates")
    p.add_argument("--to", required=True, help="end point, comma-separated coordinates")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("solve", parents=[common], help="solve the static transport problem")
    p.add_argument("--mu0", required=True, help="source measure file")
    p.add_argument("--mu1", required=True, help="target measure file")
    p.add_argument("--out-plan", help="write the optimal plan here")
    p.add_argument("--method", choices=["exact", "entropic"])
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("build-bb", parents=[common], help="build the dynamic measure from a plan")
    p.add_argument("--mu0", required=True)
    p.add_argument("--mu1", required=True)
    p.add_argument("--plan", required=True, help="plan file")
    p.add_argument("--out", help="write the transport summary here")
    p.set_defaults(func=cmd_build_bb)

    p = sub.add_parser("verify", parents=[common], help="verify static/dynamic equivalence")
    p.add_argument("--mu0", required=True)
    p.add_argument("--mu1", required=True)
    p.add_argument("--out-report", help="write the srot-report here")
    p.add_argument("--timestamp", action="store_true", help="include a timestamp line")
    p.add_argument(
        "--corrupt-weight", type=float,
        help="debug: perturb one curve weight to exercise the failure path",
    )
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("emit-curves", parents=[common], help="sample geodesics of a plan for plotting")
    p.add_argument("--mu0", required=True)
    p.add_argument("--mu1", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit_curves)

    p = sub.add_parser("selftest", parents=[common], help="run the built-in sanity checks")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads > 0:
        try:
            from threadpoolctl import threadpool_limits

            threadpool_limits(limits=args.threads)
        except ImportError:
            pass
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (MeasureFormatError, ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except httpx.HTTPError as exc:
        print(f"error: cannot reach the service: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
