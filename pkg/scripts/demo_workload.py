#!/usr/bin/env python3
"""Self-contained demo: boots a service in-process, seeds a fixture, runs a
short simulated workload, and prints the latency report.

    python scripts/demo_workload.py [duration_seconds]
"""

import asyncio
import os
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import uvicorn
import threading
import time

from crowdship.api import create_app
from crowdship.config import AppConfig
from crowdship.sim import build_run_plan, build_seed_plan, format_report, run_seed, run_workload


def main():
    duration = float(sys.argv[1]) if len(sys.argv) > 1 else 30.0
    with tempfile.TemporaryDirectory() as tmp:
        config = AppConfig(db_path=os.path.join(tmp, "demo.db"), auto_activate_accounts=True)
        app = create_app(config)
        server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        while not server.started:
            time.sleep(0.01)
        port = server.servers[0].sockets[0].getsockname()[1]
        base = f"http://127.0.0.1:{port}"
        print(f"demo service on {base}")

        seed_plan = build_seed_plan(42, senders=3, couriers=0, deliveries=5,
                                    bbox=(48.10, 17.05, 48.20, 17.20))
        seeded = asyncio.run(run_seed(base, seed_plan))
        print(f"seeded {len(seeded['created']['deliveries'])} deliveries")

        plan = build_run_plan(42, senders=2, couriers=2, rate_per_min=6,
                              duration_s=duration, bbox=(48.10, 17.05, 48.20, 17.20))
        report = asyncio.run(run_workload(base, plan))
        print(format_report(report))

        server.should_exit = True
        thread.join(timeout=5)
        return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
