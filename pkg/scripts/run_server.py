#!/usr/bin/env python3
"""Start a local dev server with sensible simulation-friendly settings.

Equivalent to `crowdship serve` with a dev config: embedded store in
./devdata, outbox emails written to ./devdata/mail, auto-activated
accounts and a bootstrap admin (admin@crowdship.local / admin-password-1).
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import uvicorn

from crowdship.api import create_app
from crowdship.config import AppConfig


def main():
    os.makedirs("devdata", exist_ok=True)
    config = AppConfig(
        db_path="devdata/crowdship.db",
        email_transport="file:devdata/mail",
        auto_activate_accounts=True,
        admin_email="admin@crowdship.local",
        admin_password="admin-password-1",
    )
    app = create_app(config)
    print(f"serving on http://{config.host}:{config.port}  (db: {config.db_path})")
    uvicorn.run(app, host=config.host, port=config.port)


if __name__ == "__main__":
    main()
