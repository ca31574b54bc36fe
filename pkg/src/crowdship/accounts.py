"""Account lifecycle: registration, login, verification, reset, profiles.

Accounts store the email encrypted plus a blind index for login lookup;
the linked Person row carries the encrypted personal data. New accounts
stay inactive until the emailed verification token is consumed (or
immediately active when the dev-mode auto_activate flag is set).
"""

from __future__ import annotations

import logging
from typing import Optional

from .auth import (
    MIN_PASSWORD_LENGTH,
    ActionPurpose,
    ActionTokenError,
    PasswordHasher,
    PasswordPolicyError,
    TokenService,
)
from .clock import Clock, to_rfc3339
from .domain import Role, VehicleClass, is_email
from .errors import Conflict, Forbidden, NotFound, Unauthenticated, ValidationFailed
from .fieldcrypto import FieldCipher
from .outbox import EmailKind, Outbox
from .store import RecordStore

log = logging.getLogger(__name__)


class AccountService:
    def __init__(
        self,
        store: RecordStore,
        cipher: FieldCipher,
        hasher: PasswordHasher,
        tokens: TokenService,
        outbox: Outbox,
        clock: Clock,
        public_base_url: str = "http://127.0.0.1:8000",
        auto_activate: bool = False,
    ):
        self.store = store
        self.cipher = cipher
        self.hasher = hasher
        self.tokens = tokens
        self.outbox = outbox
        self.clock = clock
        self.public_base_url = public_base_url.rstrip("/")
        self.auto_activate = auto_activate

    # -- registration -----------------------------------------------------

    def register(
        self,
        email: str,
        password: str,
        first_name: str,
        last_name: str,
        phone: Optional[str] = None,
    ) -> dict:
        fields = {}
        if not is_email(email or ""):
            fields["email"] = "must be a valid email address"
        if not first_name or not first_name.strip():
            fields["first_name"] = "is required"
        if last_name is None:
            fields["last_name"] = "is required"
        if len(password or "") < MIN_PASSWORD_LENGTH:
            fields["password"] = f"must be at least {MIN_PASSWORD_LENGTH} characters"
        if fields:
            raise ValidationFailed(fields)
        password_hash = self.hasher.hash(password)

        bidx = self.cipher.blind_index(email)
        with self.store.transaction():
            if self.store.list("accounts", email_bidx=bidx):
                raise Conflict("an account with this email already exists", code="email_taken")
            account = {
                "email_enc": self.cipher.encrypt_str(email),
                "email_bidx": bidx,
                "password_hash": password_hash,
                "role": Role.USER.value,
                "is_admin": False,
                "is_active": bool(self.auto_activate),
                "created_at": to_rfc3339(self.clock.now()),
            }
            account_id = self.store.put("accounts", account)
            person_id = self._link_or_create_person(
                first_name=first_name.strip(),
                last_name=(last_name or "").strip(),
                email=email,
                phone=phone,
                account_id=account_id,
            )
            token = self.tokens.create_action_token(account_id, ActionPurpose.VERIFY_EMAIL)
            self.outbox.queue(
                EmailKind.VERIFY_EMAIL,
                email,
                {
                    "name": first_name.strip(),
                    "link": f"{self.public_base_url}/console/#/verify?token={token}",
                },
            )
        log.info("registered account %s", account_id)
        return self.describe(account_id)

    def _link_or_create_person(
        self,
        first_name: str,
        last_name: str,
        email: str,
        phone: Optional[str],
        account_id: Optional[str],
    ) -> str:
        """Reuse an unlinked Person with this email, otherwise create one."""
        bidx = self.cipher.blind_index(email)
        for person in self.store.list("persons", email_bidx=bidx):
            if person.get("account_id") is None and account_id is not None:
                self.store.conditional_update(
                    "persons",
                    person["id"],
                    expect={"account_id": None},
                    changes={
                        "account_id": account_id,
                        "first_name_enc": self.cipher.encrypt_str(first_name),
                        "last_name_enc": self.cipher.encrypt_str(last_name),
                        "phone_enc": self.cipher.encrypt_str(phone) if phone else None,
                    },
                )
                return person["id"]
            if person.get("account_id") == account_id and account_id is not None:
                return person["id"]
        doc = {
            "first_name_enc": self.cipher.encrypt_str(first_name),
            "last_name_enc": self.cipher.encrypt_str(last_name),
            "email_enc": self.cipher.encrypt_str(email),
            "email_bidx": bidx,
            "phone_enc": self.cipher.encrypt_str(phone) if phone else None,
            "account_id": account_id,
            "created_at": to_rfc3339(self.clock.now()),
        }
        return self.store.put("persons", doc)

    def resend_verification(self, email: str) -> None:
        """Queue a fresh verification email if the account needs one.

        Silently does nothing for unknown or already-active accounts so the
        endpoint cannot be used to probe which emails are registered.
        """
        account = self.find_by_email(email or "")
        if account is None or account["is_active"]:
            return
        with self.store.transaction():
            token = self.tokens.create_action_token(account["id"], ActionPurpose.VERIFY_EMAIL)
            self.outbox.queue(
                EmailKind.VERIFY_EMAIL,
                email,
                {"name": "", "link": f"{self.public_base_url}/console/#/verify?token={token}"},
            )

    def verify_email(self, token: str):
        account_id = self.tokens.consume_action_token(token, ActionPurpose.VERIFY_EMAIL)
        self.store.conditional_update(
            "accounts", account_id, expect={}, changes={"is_active": True}
        )
        return account_id

    # -- login / reset ----------------------------------------------------

    def find_by_email(self, email: str) -> Optional[dict]:
        rows = self.store.list("accounts", email_bidx=self.cipher.blind_index(email))
        return rows[0] if rows else None

    def login(self, email: str, password: str):
        account = self.find_by_email(email or "")
        if account is None or not self.hasher.verify(password or "", account["password_hash"]):
            raise Unauthenticated("wrong email or password", code="invalid_credentials")
        if not account["is_active"]:
            raise Forbidden("account is not verified yet", code="account_inactive")
        return self.tokens.issue_pair(account)

    def request_password_reset(self, email: str) -> None:
        account = self.find_by_email(email or "")
        if account is None:
            return  # same silence as resend_verification
        with self.store.transaction():
            token = self.tokens.create_action_token(account["id"], ActionPurpose.RESET_PASSWORD)
            self.outbox.queue(
                EmailKind.RESET_PASSWORD,
                email,
                {"link": f"{self.public_base_url}/console/#/reset?token={token}"},
            )

    def confirm_password_reset(self, token: str, new_password: str) -> None:
        try:
            new_hash = self.hasher.hash(new_password or "")
        except PasswordPolicyError as exc:
            raise ValidationFailed({"new_password": str(exc)})
        try:
            account_id = self.tokens.consume_action_token(token, ActionPurpose.RESET_PASSWORD)
        except ActionTokenError as exc:
            raise Forbidden(f"reset token rejected: {exc.reason}", code="token_invalid")
        self.store.conditional_update(
            "accounts", account_id, expect={}, changes={"password_hash": new_hash}
        )

    # -- profile ----------------------------------------------------------

    def get(self, account_id: str) -> dict:
        account = self.store.get("accounts", account_id)
        if account is None:
            raise NotFound("account not found")
        return account

    def person_of(self, account_id: str) -> Optional[dict]:
        rows = self.store.list("persons", account_id=account_id)
        return rows[0] if rows else None

    def describe(self, account_id: str) -> dict:
        """Decrypted own-profile view; never includes the password hash."""
        account = self.get(account_id)
        person = self.person_of(account_id)
        out = {
            "account_id": account["id"],
            "email": self.cipher.decrypt_str(account["email_enc"]),
            "role": account["role"],
            "is_admin": account["is_admin"],
            "is_active": account["is_active"],
        }
        if person:
            out["first_name"] = self.cipher.decrypt_str(person["first_name_enc"])
            out["last_name"] = self.cipher.decrypt_str(person["last_name_enc"])
            out["phone"] = (
                self.cipher.decrypt_str(person["phone_enc"]) if person.get("phone_enc") else None
            )
        courier = self.courier_of(account_id)
        if courier:
            out["courier"] = {
                "courier_id": courier["id"],
                "vehicle_class": courier["vehicle_class"],
                "registered_on": courier["registered_on"],
                "is_available": courier["is_available"],
            }
        return out

    def update_profile(self, account_id: str, changes: dict) -> dict:
        allowed = {"first_name", "last_name", "phone", "password"}
        unknown = set(changes) - allowed
        if unknown:
            raise ValidationFailed({k: "cannot be changed here" for k in sorted(unknown)})
        account = self.get(account_id)
        if "password" in changes:
            try:
                new_hash = self.hasher.hash(changes["password"] or "")
            except PasswordPolicyError as exc:
                raise ValidationFailed({"password": str(exc)})
            self.store.conditional_update(
                "accounts", account["id"], expect={}, changes={"password_hash": new_hash}
            )
        person = self.person_of(account_id)
        if person:
            updates = {}
            if "first_name" in changes:
                updates["first_name_enc"] = self.cipher.encrypt_str(changes["first_name"] or "")
            if "last_name" in changes:
                updates["last_name_enc"] = self.cipher.encrypt_str(changes["last_name"] or "")
            if "phone" in changes:
                updates["phone_enc"] = (
                    self.cipher.encrypt_str(changes["phone"]) if changes["phone"] else None
                )
            if updates:
                self.store.conditional_update("persons", person["id"], expect={}, changes=updates)
        return self.describe(account_id)

    # -- courier role -----------------------------------------------------

    def courier_of(self, account_id: str) -> Optional[dict]:
        rows = self.store.list("couriers", account_id=account_id)
        return rows[0] if rows else None

    def register_courier(self, account_id: str, vehicle_class: str) -> dict:
        try:
            vehicle = VehicleClass(vehicle_class)
        except ValueError:
            raise ValidationFailed(
                {"vehicle_class": f"must be one of {', '.join(v.value for v in VehicleClass)}"}
            )
        account = self.get(account_id)
        with self.store.transaction():
            if self.courier_of(account_id) is not None:
                raise Conflict("account already has a courier profile", code="already_courier")
            courier = {
                "account_id": account_id,
                "vehicle_class": vehicle.value,
                "registered_on": self.clock.now().date().isoformat(),
                "is_available": True,
                "last_lat": None,
                "last_lon": None,
                "last_seen_at": None,
            }
            courier_id = self.store.put("couriers", courier)
            self.store.conditional_update(
                "accounts", account["id"], expect={}, changes={"role": Role.COURIER.value}
            )
        return self.store.get("couriers", courier_id)

    def set_courier_availability(self, account_id: str, is_available: bool) -> dict:
        courier = self.courier_of(account_id)
        if courier is None:
            raise Forbidden("no courier profile for this account", code="not_a_courier")
        self.store.conditional_update(
            "couriers", courier["id"], expect={}, changes={"is_available": bool(is_available)}
        )
        return self.store.get("couriers", courier["id"])

    def ensure_admin(self, email: str, password: str) -> str:
        """Idempotent bootstrap of an active admin account."""
        existing = self.find_by_email(email)
        if existing is not None:
            return existing["id"]
        account = {
            "email_enc": self.cipher.encrypt_str(email),
            "email_bidx": self.cipher.blind_index(email),
            "password_hash": self.hasher.hash(password),
            "role": Role.USER.value,
            "is_admin": True,
            "is_active": True,
            "created_at": to_rfc3339(self.clock.now()),
        }
        account_id = self.store.put("accounts", account)
        self._link_or_create_person("Admin", "", email, None, account_id)
        return account_id
