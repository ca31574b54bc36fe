"""Password hashing and the access/renew token protocol.

Passwords are hashed with Argon2id (memory-hard, per-hash random salt)
and stored in PHC string format so parameters can change without
invalidating old hashes.

Tokens are compact JWS (header.payload.signature, base64url) signed with
HMAC-SHA-256 under the configured server key. Access tokens verify
statelessly; renew tokens are one-time-use, enforced by a store-backed
nonce ledger consumed with compare-and-set so a double-spend race has
exactly one winner. Email verification and password reset use separate
single-use action tokens (opaque random strings, stored as digests).
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import os
import secrets
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Optional

from cryptography.hazmat.primitives.kdf.argon2 import Argon2id

from .clock import Clock, to_rfc3339, parse_rfc3339
from .store import RecordStore, new_id

MIN_PASSWORD_LENGTH = 8

ACCESS_TOKEN_TTL = timedelta(minutes=15)
RENEW_TOKEN_TTL = timedelta(days=14)
ACTION_TOKEN_TTL = timedelta(hours=24)


class AuthError(Exception):
    pass


class PasswordPolicyError(AuthError):
    pass


class MalformedHash(AuthError):
    pass


class TokenInvalid(AuthError):
    """Bad signature, malformed token, or consumed/unknown nonce."""


class TokenExpired(AuthError):
    pass


class InactiveAccount(AuthError):
    pass


class ActionTokenError(AuthError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason  # expired | consumed | wrong-purpose | unknown-token


@dataclass(frozen=True)
class Argon2Params:
    time_cost: int = 2
    memory_kib: int = 32768
    parallelism: int = 2

    @classmethod
    def fast_insecure(cls) -> "Argon2Params":
        """Weak parameters for test suites only."""
        return cls(time_cost=1, memory_kib=8, parallelism=1)


class PasswordHasher:
    def __init__(self, params: Argon2Params | None = None):
        self.params = params or Argon2Params()

    def hash(self, plain: str) -> str:
        if len(plain) < MIN_PASSWORD_LENGTH:
            raise PasswordPolicyError(
                f"password must be at least {MIN_PASSWORD_LENGTH} characters"
            )
        salt = os.urandom(16)
        digest = self._derive(plain, salt, self.params)
        p = self.params
        return (
            f"$argon2id$v=19$m={p.memory_kib},t={p.time_cost},p={p.parallelism}"
            f"${_b64(salt)}${_b64(digest)}"
        )

    def verify(self, plain: str, encoded: str) -> bool:
        params, salt, digest = self._parse(encoded)
        candidate = self._derive(plain, salt, params)
        return hmac.compare_digest(candidate, digest)

    @staticmethod
    def _derive(plain: str, salt: bytes, params: Argon2Params) -> bytes:
        kdf = Argon2id(
            salt=salt,
            length=32,
            iterations=params.time_cost,
            lanes=params.parallelism,
            memory_cost=params.memory_kib,
        )
        return kdf.derive(plain.encode())

    @staticmethod
    def _parse(encoded: str) -> tuple[Argon2Params, bytes, bytes]:
        try:
            parts = encoded.split("$")
            # ['', 'argon2id', 'v=19', 'm=..,t=..,p=..', salt, digest]
            if len(parts) != 6 or parts[1] != "argon2id":
                raise ValueError("not an argon2id hash")
            opts = dict(kv.split("=") for kv in parts[3].split(","))
            params = Argon2Params(
                time_cost=int(opts["t"]),
                memory_kib=int(opts["m"]),
                parallelism=int(opts["p"]),
            )
            return params, _unb64(parts[4]), _unb64(parts[5])
        except (ValueError, KeyError, IndexError) as exc:
            raise MalformedHash(f"cannot parse password hash: {exc}") from exc


def _b64(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode()


def _unb64(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + pad)


def jws_sign(payload: dict, key: bytes) -> str:
    header = _b64(json.dumps({"alg": "HS256", "typ": "JWT"}).encode())
    body = _b64(json.dumps(payload, separators=(",", ":")).encode())
    signing_input = f"{header}.{body}".encode()
    sig = hmac.new(key, signing_input, hashlib.sha256).digest()
    return f"{header}.{body}.{_b64(sig)}"


def jws_verify(token: str, key: bytes) -> dict:
    """Return the payload claims; raises TokenInvalid on any defect."""
    try:
        header, body, sig = token.split(".")
    except ValueError:
        raise TokenInvalid("malformed token")
    signing_input = f"{header}.{body}".encode()
    expected = hmac.new(key, signing_input, hashlib.sha256).digest()
    try:
        provided = _unb64(sig)
    except Exception:
        raise TokenInvalid("malformed signature")
    if not hmac.compare_digest(expected, provided):
        raise TokenInvalid("invalid signature")
    try:
        return json.loads(_unb64(body))
    except Exception:
        raise TokenInvalid("malformed payload")


@dataclass(frozen=True)
class TokenPair:
    access_token: str
    renew_token: str
    access_expires_at: datetime
    renew_expires_at: datetime


@dataclass(frozen=True)
class AccessClaims:
    account_id: str
    role: str


class ActionPurpose(str, Enum):
    VERIFY_EMAIL = "verify_email"
    RESET_PASSWORD = "reset_password"


class TokenService:
    """Issues and checks the token pairs and action tokens.

    Needs the store only for the renew-nonce ledger and action tokens;
    access-token verification is a pure signature check.
    """

    def __init__(
        self,
        signing_key: str | bytes,
        store: RecordStore,
        clock: Clock,
        access_ttl: timedelta = ACCESS_TOKEN_TTL,
        renew_ttl: timedelta = RENEW_TOKEN_TTL,
        action_ttl: timedelta = ACTION_TOKEN_TTL,
    ):
        if not signing_key:
            raise ValueError("token signing key must be configured")
        self._key = signing_key.encode() if isinstance(signing_key, str) else signing_key
        self._store = store
        self._clock = clock
        self.access_ttl = access_ttl
        self.renew_ttl = renew_ttl
        self.action_ttl = action_ttl

    def issue_pair(self, account: dict, now: Optional[datetime] = None) -> TokenPair:
        if not account.get("is_active"):
            raise InactiveAccount("account is not active")
        now = now or self._clock.now()
        access_exp = now + self.access_ttl
        renew_exp = now + self.renew_ttl
        access = jws_sign(
            {
                "sub": account["id"],
                "role": account["role"],
                "typ": "access",
                "iat": int(now.timestamp()),
                "exp": int(access_exp.timestamp()),
            },
            self._key,
        )
        jti = new_id()
        renew = jws_sign(
            {
                "sub": account["id"],
                "typ": "renew",
                "jti": jti,
                "iat": int(now.timestamp()),
                "exp": int(renew_exp.timestamp()),
            },
            self._key,
        )
        self._store.put(
            "renew_nonces",
            {
                "account_id": account["id"],
                "expires_at": to_rfc3339(renew_exp),
                "consumed": False,
            },
            entity_id=jti,
        )
        return TokenPair(access, renew, access_exp, renew_exp)

    def verify_access(self, token: str, now: Optional[datetime] = None) -> AccessClaims:
        claims = jws_verify(token, self._key)
        if claims.get("typ") != "access":
            raise TokenInvalid("not an access token")
        now = now or self._clock.now()
        if now.timestamp() >= claims["exp"]:
            raise TokenExpired("access token expired")
        return AccessClaims(account_id=claims["sub"], role=claims["role"])

    def renew(self, renew_token: str, now: Optional[datetime] = None) -> TokenPair:
        """Trade a valid renew token for a fresh pair, consuming it.

        A second presentation of the same token fails: the nonce row is
        consumed with compare-and-set, so concurrent double-spends resolve
        to exactly one winner.
        """
        claims = jws_verify(renew_token, self._key)
        if claims.get("typ") != "renew":
            raise TokenInvalid("not a renew token")
        now = now or self._clock.now()
        if now.timestamp() >= claims["exp"]:
            raise TokenExpired("renew token expired")
        jti = claims.get("jti")
        if not jti or self._store.get("renew_nonces", jti) is None:
            raise TokenInvalid("unknown renew token")
        won = self._store.conditional_update(
            "renew_nonces", jti, expect={"consumed": False}, changes={"consumed": True}
        )
        if not won:
            raise TokenInvalid("renew token already used")
        account = self._store.get("accounts", claims["sub"])
        if account is None:
            raise TokenInvalid("account no longer exists")
        return self.issue_pair(account, now=now)

    def create_action_token(
        self, account_id: str, purpose: ActionPurpose, now: Optional[datetime] = None
    ) -> str:
        now = now or self._clock.now()
        token = secrets.token_urlsafe(32)
        self._store.put(
            "action_tokens",
            {
                "digest": hashlib.sha256(token.encode()).hexdigest(),
                "purpose": purpose.value,
                "account_id": account_id,
                "expires_at": to_rfc3339(now + self.action_ttl),
                "consumed": False,
            },
        )
        return token

    def consume_action_token(
        self, token: str, purpose: ActionPurpose, now: Optional[datetime] = None
    ) -> str:
        """Single-use redemption; returns the account id."""
        now = now or self._clock.now()
        digest = hashlib.sha256(token.encode()).hexdigest()
        rows = self._store.list("action_tokens", digest=digest)
        if not rows:
            raise ActionTokenError("unknown-token")
        row = rows[0]
        if row["purpose"] != purpose.value:
            raise ActionTokenError("wrong-purpose")
        if now > parse_rfc3339(row["expires_at"]):
            raise ActionTokenError("expired")
        won = self._store.conditional_update(
            "action_tokens", row["id"], expect={"consumed": False}, changes={"consumed": True}
        )
        if not won:
            raise ActionTokenError("consumed")
        return row["account_id"]
