"""Service configuration: dataclass defaults, YAML file, env overrides.

Precedence: built-in defaults < config file < CROWDSHIP_* environment
variables. Keys map to env vars by upper-casing (db_path ->
CROWDSHIP_DB_PATH).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Optional

import yaml


@dataclass
class AppConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    # HMAC key for token signing and symmetric key material for field
    # encryption. Both must be set to non-defaults in any real deployment.
    signing_key: str = "dev-signing-key-change-me"
    field_key: str = "dev-field-key-change-me"
    db_path: str = "crowdship.db"
    # Email transport: "none", "file:<directory>" or "smtp:<host>:<port>".
    email_transport: str = "none"
    email_from: str = "noreply@crowdship.local"
    # Base URL used in emailed links (verification, password reset).
    public_base_url: str = "http://127.0.0.1:8000"
    access_ttl_minutes: int = 15
    renew_ttl_days: int = 14
    action_token_ttl_hours: int = 24
    # Argon2id parameters.
    argon2_time_cost: int = 2
    argon2_memory_kib: int = 32768
    argon2_parallelism: int = 2
    # Publisher connections silent longer than this are closed and their
    # couriers marked unavailable (15x the 4 s publish cadence).
    staleness_seconds: float = 60.0
    sweep_interval_seconds: float = 5.0
    outbox_drain_interval_seconds: float = 5.0
    # Nominal courier speed and fixed handling time used for the expected
    # delivery time: created_at + distance / speed + handling.
    eta_speed_m_per_s: float = 8.33
    eta_handling_s: float = 900.0
    # Dev/simulation mode: activate accounts at registration instead of
    # waiting for the emailed verification link. Never enable in production.
    auto_activate_accounts: bool = False
    # Optional bootstrap admin, created at startup when missing.
    admin_email: Optional[str] = None
    admin_password: Optional[str] = None
    # Directory of built web-console assets, served under /console/ if set.
    console_dir: Optional[str] = None
    max_picture_bytes: int = 5 * 1024 * 1024
    # TLS is normally terminated by a reverse proxy; set both paths to let
    # the service speak HTTPS directly.
    ssl_certfile: Optional[str] = None
    ssl_keyfile: Optional[str] = None

    @classmethod
    def load(cls, path: Optional[str] = None, env: Optional[dict] = None) -> "AppConfig":
        values: dict = {}
        if path:
            with open(path) as fp:
                loaded = yaml.safe_load(fp) or {}
            if not isinstance(loaded, dict):
                raise ValueError(f"config file {path} must contain a mapping")
            values.update(loaded)
        env = os.environ if env is None else env
        for f in fields(cls):
            env_key = f"CROWDSHIP_{f.name.upper()}"
            if env_key in env:
                values[f.name] = env[env_key]
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: _coerce(cls, k, v) for k, v in values.items()})


def _coerce(cls, name: str, value):
    target = next(f for f in fields(cls) if f.name == name)
    if value is None or not isinstance(value, str):
        return value
    t = target.type
    if t in ("int", int):
        return int(value)
    if t in ("float", float):
        return float(value)
    if t in ("bool", bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return value
