"""Command line interface: serve the API, drive simulations, dump/load the store."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys

from .config import AppConfig
from .sim import (
    DEFAULT_BBOX,
    ServiceUnreachable,
    SimError,
    build_run_plan,
    build_seed_plan,
    format_report,
    run_seed,
    run_workload,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdship")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the API service")
    serve.add_argument("--config", help="YAML config file")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.add_argument("--db")

    sim = sub.add_parser("sim", help="workload simulation against a running service")
    sim_sub = sim.add_subparsers(dest="sim_command", required=True)

    seed = sim_sub.add_parser("seed", help="create fixture accounts/couriers/deliveries")
    seed.add_argument("--base-url", default="http://127.0.0.1:8000")
    seed.add_argument("--senders", type=int, default=10)
    seed.add_argument("--couriers", type=int, default=5)
    seed.add_argument("--deliveries", type=int, default=20)
    seed.add_argument("--bbox", default=",".join(str(v) for v in DEFAULT_BBOX),
                      help="lat_min,lon_min,lat_max,lon_max")
    seed.add_argument("--seed", type=int, default=42)
    seed.add_argument("--report", help="write the JSON report to this path")

    run = sim_sub.add_parser("run", help="drive a live workload and audit latency budgets")
    run.add_argument("--base-url", default="http://127.0.0.1:8000")
    run.add_argument("--couriers", type=int, default=2)
    run.add_argument("--senders", type=int, default=2)
    run.add_argument("--rate", type=float, default=6.0, help="deliveries per minute")
    run.add_argument("--duration", type=float, default=60.0, help="seconds")
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--slack", type=float, default=1.0,
                     help="budget multiplier for slower environments")
    run.add_argument("--bbox", default=",".join(str(v) for v in DEFAULT_BBOX))
    run.add_argument("--report", help="write the JSON report to this path")

    store = sub.add_parser("store", help="maintenance on the embedded store")
    store_sub = store.add_subparsers(dest="store_command", required=True)
    dump = store_sub.add_parser("dump", help="emit all records as JSON lines")
    dump.add_argument("--db", required=True)
    dump.add_argument("--out", default="-")
    load = store_sub.add_parser("load", help="load records from a JSON-lines dump")
    load.add_argument("--db", required=True)
    load.add_argument("--infile", required=True)
    return parser


def _parse_bbox(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise SystemExit("--bbox expects lat_min,lon_min,lat_max,lon_max")
    return tuple(parts)


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    config = AppConfig.load(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    if args.db:
        config.db_path = args.db
    app = create_app(config)
    uvicorn.run(
        app,
        host=config.host,
        port=config.port,
        log_level="info",
        ssl_certfile=config.ssl_certfile,
        ssl_keyfile=config.ssl_keyfile,
    )
    return 0


def _emit(report: dict, path: str | None) -> None:
    if path:
        with open(path, "w") as fp:
            json.dump(report, fp, indent=2, sort_keys=True)


def cmd_sim_seed(args) -> int:
    plan = build_seed_plan(
        args.seed, args.senders, args.couriers, args.deliveries, _parse_bbox(args.bbox)
    )
    try:
        report = asyncio.run(run_seed(args.base_url, plan))
    except ServiceUnreachable as exc:
        print(f"service unreachable: {exc}", file=sys.stderr)
        return 2
    except SimError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    _emit(report, args.report)
    created = report["created"]
    print(
        f"seeded: {len(created['senders'])} senders, {len(created['couriers'])} couriers, "
        f"{len(created['deliveries'])} deliveries"
    )
    for code in created["deliveries"]:
        print(f"  delivery {code}")
    if report["failures"] or report["protocol_errors"]:
        print(f"failures: {report['failures']}", file=sys.stderr)
        return 1
    return 0


def cmd_sim_run(args) -> int:
    plan = build_run_plan(
        args.seed, args.senders, args.couriers, args.rate, args.duration,
        _parse_bbox(args.bbox),
    )
    try:
        report = asyncio.run(run_workload(args.base_url, plan, slack=args.slack))
    except ServiceUnreachable as exc:
        print(f"service unreachable: {exc}", file=sys.stderr)
        return 2
    except SimError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    _emit(report, args.report)
    print(format_report(report))
    return 0 if report["pass"] else 1


def cmd_store(args) -> int:
    from .store import SqliteStore

    store = SqliteStore(args.db)
    try:
        if args.store_command == "dump":
            if args.out == "-":
                n = store.dump(sys.stdout)
            else:
                with open(args.out, "w") as fp:
                    n = store.dump(fp)
            print(f"dumped {n} records", file=sys.stderr)
        else:
            with open(args.infile) as fp:
                n = store.load(fp)
            print(f"loaded {n} records", file=sys.stderr)
    finally:
        store.close()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "sim":
        return cmd_sim_seed(args) if args.sim_command == "seed" else cmd_sim_run(args)
    if args.command == "store":
        return cmd_store(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
