"""Transactional email outbox.

Domain operations queue notification entries inside the same store
transaction as the write that triggered them, so a created delivery and
its two emails commit or roll back together. A separate drain step pushes
queued entries through a pluggable transport with at-least-once
semantics: an entry is only marked sent after the transport confirmed,
and failures retry with exponential backoff (base 30 s) up to 6 attempts.
Draining is single-consumer, enforced by a store-level lease.

Entries carry personal data (recipient address, names, action-token
links), so recipient and payload are encrypted at rest like any other
sensitive field and only decrypted at send time.
"""

from __future__ import annotations

import email.message
import email.policy
import json
import os
import smtplib
from datetime import timedelta
from enum import Enum
from typing import Optional, Protocol

from .clock import Clock, parse_rfc3339, to_rfc3339
from .domain import is_email
from .fieldcrypto import FieldCipher
from .store import RecordStore, new_id

RETRY_BASE_SECONDS = 30.0
MAX_ATTEMPTS = 6
DRAIN_LEASE_SECONDS = 60.0


class OutboxError(Exception):
    pass


class UnknownKind(OutboxError):
    pass


class InvalidRecipient(OutboxError):
    pass


class TransportUnavailable(OutboxError):
    pass


class EmailKind(str, Enum):
    VERIFY_EMAIL = "verify_email"
    RESET_PASSWORD = "reset_password"
    DELIVERY_CREATED_SENDER = "delivery_created_sender"
    DELIVERY_CREATED_RECEIVER = "delivery_created_receiver"
    DELIVERY_COMPLETED = "delivery_completed"


_TEMPLATES: dict[EmailKind, tuple[str, str]] = {
    EmailKind.VERIFY_EMAIL: (
        "Confirm your account",
        "Hello {name},\n\nConfirm your account by opening:\n{link}\n\n"
        "The link is valid for 24 hours.\n",
    ),
    EmailKind.RESET_PASSWORD: (
        "Password reset",
        "Hello,\n\nChoose a new password by opening:\n{link}\n\n"
        "If you did not ask for this, ignore this message.\n",
    ),
    EmailKind.DELIVERY_CREATED_SENDER: (
        "Your parcel {tracking_code} is on the board",
        "Hello {name},\n\nYour delivery was created. Track it with code "
        "{tracking_code}.\n",
    ),
    EmailKind.DELIVERY_CREATED_RECEIVER: (
        "A parcel is on its way to you",
        "Hello {name},\n\nA parcel addressed to you was registered. "
        "Track it with code {tracking_code}.\n",
    ),
    EmailKind.DELIVERY_COMPLETED: (
        "Parcel {tracking_code} delivered",
        "Hello {name},\n\nYour parcel with code {tracking_code} was marked "
        "delivered.\n",
    ),
}


class Transport(Protocol):
    def send(self, sender: str, recipient: str, subject: str, body: str) -> None:
        """Deliver one message; raise on failure."""


class FileTransport:
    """Writes one RFC 5322 message file per email. The test default."""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def send(self, sender: str, recipient: str, subject: str, body: str) -> None:
        msg = email.message.EmailMessage(policy=email.policy.SMTP)
        msg["From"] = sender
        msg["To"] = recipient
        msg["Subject"] = subject
        msg.set_content(body)
        path = os.path.join(self.directory, f"{new_id()}.eml")
        with open(path, "wb") as fp:
            fp.write(bytes(msg))


class SmtpTransport:
    def __init__(self, host: str, port: int = 25, timeout: float = 10.0):
        self.host = host
        self.port = port
        self.timeout = timeout

    def send(self, sender: str, recipient: str, subject: str, body: str) -> None:
        msg = email.message.EmailMessage(policy=email.policy.SMTP)
        msg["From"] = sender
        msg["To"] = recipient
        msg["Subject"] = subject
        msg.set_content(body)
        with smtplib.SMTP(self.host, self.port, timeout=self.timeout) as client:
            client.send_message(msg)


def transport_from_spec(spec: str) -> Optional[Transport]:
    """Parse the config string: none | file:<dir> | smtp:<host>[:<port>]."""
    if not spec or spec == "none":
        return None
    scheme, _, rest = spec.partition(":")
    if scheme == "file" and rest:
        return FileTransport(rest)
    if scheme == "smtp" and rest:
        host, _, port = rest.partition(":")
        return SmtpTransport(host, int(port) if port else 25)
    raise ValueError(f"unrecognized email transport spec: {spec!r}")


class Outbox:
    def __init__(
        self,
        store: RecordStore,
        clock: Clock,
        cipher: FieldCipher,
        sender: str = "noreply@crowdship.local",
    ):
        self._store = store
        self._clock = clock
        self._cipher = cipher
        self._sender = sender

    def queue(self, kind: EmailKind | str, recipient: str, payload: dict) -> dict:
        """Durably enqueue one notification. Call inside the transaction of
        the domain write that triggers it."""
        try:
            kind = EmailKind(kind)
        except ValueError:
            raise UnknownKind(f"unknown email kind: {kind!r}")
        if not is_email(recipient):
            raise InvalidRecipient(f"not an email address: {recipient!r}")
        now = self._clock.now()
        entry = {
            "kind": kind.value,
            "recipient_enc": self._cipher.encrypt_str(recipient),
            "payload_enc": self._cipher.encrypt_str(json.dumps(payload)),
            "queued_at": to_rfc3339(now),
            "sent_at": None,
            "attempts": 0,
            "next_attempt_at": to_rfc3339(now),
            "last_error": None,
        }
        entry_id = self._store.put("outbox", entry)
        return self._store.get("outbox", entry_id)

    def decode(self, entry: dict) -> dict:
        """Plaintext view of a stored entry (recipient and payload)."""
        out = {k: v for k, v in entry.items() if not k.endswith("_enc")}
        out["recipient"] = self._cipher.decrypt_str(entry["recipient_enc"])
        out["payload"] = json.loads(self._cipher.decrypt_str(entry["payload_enc"]))
        return out

    def pending(self) -> list[dict]:
        return [e for e in self._store.list("outbox", sent_at=None) if e["next_attempt_at"]]

    def drain(self, transport: Transport, batch_size: int = 50, owner: Optional[str] = None) -> int:
        """Send due entries; returns how many were confirmed sent."""
        if transport is None:
            raise TransportUnavailable("no transport configured")
        owner = owner or new_id()
        if not self._acquire_lease(owner):
            return 0
        try:
            now = self._clock.now()
            due = [
                e
                for e in self.pending()
                if parse_rfc3339(e["next_attempt_at"]) <= now
            ][:batch_size]
            sent = 0
            for entry in due:
                subject_tpl, body_tpl = _TEMPLATES[EmailKind(entry["kind"])]
                plain = self.decode(entry)
                fields = {"name": "", "link": "", "tracking_code": "", **plain["payload"]}
                attempts = entry["attempts"] + 1
                try:
                    transport.send(
                        self._sender,
                        plain["recipient"],
                        subject_tpl.format(**fields),
                        body_tpl.format(**fields),
                    )
                except Exception as exc:
                    changes = {"attempts": attempts, "last_error": str(exc)}
                    if attempts >= MAX_ATTEMPTS:
                        changes["next_attempt_at"] = None  # gave up
                    else:
                        backoff = RETRY_BASE_SECONDS * (2 ** (attempts - 1))
                        changes["next_attempt_at"] = to_rfc3339(
                            now + timedelta(seconds=backoff)
                        )
                    self._store.conditional_update(
                        "outbox", entry["id"], expect={"sent_at": None}, changes=changes
                    )
                else:
                    self._store.conditional_update(
                        "outbox",
                        entry["id"],
                        expect={"sent_at": None},
                        changes={"sent_at": to_rfc3339(self._clock.now()), "attempts": attempts},
                    )
                    sent += 1
            return sent
        finally:
            self._release_lease(owner)

    def _acquire_lease(self, owner: str) -> bool:
        now = self._clock.now()
        lease = self._store.get("leases", "outbox-drain")
        if lease is None:
            self._store.put(
                "leases",
                {"holder": owner, "expires_at": to_rfc3339(now + timedelta(seconds=DRAIN_LEASE_SECONDS))},
                entity_id="outbox-drain",
            )
            return True
        expired = parse_rfc3339(lease["expires_at"]) <= now
        if lease["holder"] == owner or expired:
            return self._store.conditional_update(
                "leases",
                "outbox-drain",
                expect={"holder": lease["holder"]},
                changes={
                    "holder": owner,
                    "expires_at": to_rfc3339(now + timedelta(seconds=DRAIN_LEASE_SECONDS)),
                },
            )
        return False

    def _release_lease(self, owner: str) -> None:
        lease = self._store.get("leases", "outbox-drain")
        if lease and lease["holder"] == owner:
            self._store.conditional_update(
                "leases",
                "outbox-drain",
                expect={"holder": owner},
                changes={"expires_at": to_rfc3339(self._clock.now())},
            )
