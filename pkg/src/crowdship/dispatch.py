"""Delivery lifecycle orchestration.

Creation, public tracking with caller-dependent redaction, courier work
discovery, atomic acceptance, state advancement and sender statistics.
All contested writes (accept, state change) go through the store's
compare-and-set so concurrent couriers resolve to exactly one winner.
"""

from __future__ import annotations

import logging
import random
from datetime import timedelta
from typing import Optional

from .clock import Clock, to_rfc3339
from .domain import (
    DeliveryState,
    GeoPoint,
    generate_tracking_code,
    is_email,
    validate_geo,
    validate_item,
    validate_transition,
)
from .errors import Conflict, Forbidden, NotFound, ValidationFailed
from .fieldcrypto import FieldCipher
from .geo import DistanceProvider, HaversineProvider, order_by_distance
from .outbox import EmailKind, Outbox
from .routesvc import latest_point
from .store import RecordStore

log = logging.getLogger(__name__)

ALLOWED_PICTURE_TYPES = {"image/jpeg", "image/png"}


class DispatchService:
    def __init__(
        self,
        store: RecordStore,
        cipher: FieldCipher,
        outbox: Outbox,
        clock: Clock,
        distance_provider: Optional[DistanceProvider] = None,
        eta_speed_m_per_s: float = 8.33,
        eta_handling_s: float = 900.0,
        max_picture_bytes: int = 5 * 1024 * 1024,
        tracking_rng: Optional[random.Random] = None,
    ):
        self.store = store
        self.cipher = cipher
        self.outbox = outbox
        self.clock = clock
        self.distance = distance_provider or HaversineProvider()
        self.eta_speed_m_per_s = eta_speed_m_per_s
        self.eta_handling_s = eta_handling_s
        self.max_picture_bytes = max_picture_bytes
        self.tracking_rng = tracking_rng

    # -- creation -----------------------------------------------------------

    def create_delivery(
        self,
        sender_account_id: str,
        item: dict,
        source: dict,
        destination: dict,
        receiver: dict,
        picture: Optional[tuple[str, bytes]] = None,
    ) -> dict:
        fields: dict[str, str] = {}
        item = item or {}
        fields.update(
            validate_item(
                item.get("width_cm"),
                item.get("height_cm"),
                item.get("depth_cm"),
                item.get("weight_class"),
            ).errors
        )
        for prefix, place in (("source.", source or {}), ("destination.", destination or {})):
            if not (place.get("address_text") or "").strip():
                fields[prefix + "address_text"] = "is required"
            fields.update(validate_geo(place.get("lat"), place.get("lon"), prefix).errors)
        receiver = receiver or {}
        if not (receiver.get("name") or "").strip():
            fields["receiver.name"] = "is required"
        if not is_email(receiver.get("email") or ""):
            fields["receiver.email"] = "must be a valid email address"
        if picture is not None:
            content_type, data = picture
            if content_type not in ALLOWED_PICTURE_TYPES:
                fields["picture"] = "must be a JPEG or PNG image"
            elif len(data) > self.max_picture_bytes:
                fields["picture"] = f"must be at most {self.max_picture_bytes} bytes"
        if fields:
            raise ValidationFailed(fields)

        sender_account = self.store.get("accounts", sender_account_id)
        if sender_account is None or not sender_account["is_active"]:
            raise Forbidden("sender account is not active", code="account_inactive")
        sender_persons = self.store.list("persons", account_id=sender_account_id)
        if not sender_persons:
            raise Forbidden("sender has no profile", code="account_inactive")
        sender_person = sender_persons[0]

        src = GeoPoint(source["lat"], source["lon"])
        dst = GeoPoint(destination["lat"], destination["lon"])
        distance_m = self.distance.distance_m(src, dst)
        now = self.clock.now()
        eta = now + timedelta(
            seconds=distance_m / self.eta_speed_m_per_s + self.eta_handling_s
        )

        with self.store.transaction():
            receiver_person_id = self._person_for_receiver(
                receiver["name"].strip(), receiver["email"].strip()
            )
            picture_id = None
            if picture is not None:
                import base64

                content_type, data = picture
                picture_id = self.store.put(
                    "pictures",
                    {"content_type": content_type, "data_b64": base64.b64encode(data).decode()},
                )
            code = self._unique_tracking_code()
            delivery = {
                "tracking_code": code,
                "sender_account_id": sender_account_id,
                "sender_person_id": sender_person["id"],
                "receiver_person_id": receiver_person_id,
                "item": {
                    "width_cm": item["width_cm"],
                    "height_cm": item["height_cm"],
                    "depth_cm": item["depth_cm"],
                    "weight_class": item["weight_class"],
                    "fragile": bool(item.get("fragile", False)),
                    "description": item.get("description"),
                },
                "picture_id": picture_id,
                "source": _place_doc(source),
                "destination": _place_doc(destination),
                "state": DeliveryState.READY.value,
                "courier_id": None,
                "route_distance_m": distance_m,
                "expected_delivery_time": to_rfc3339(eta),
                "created_at": to_rfc3339(now),
                "note": None,
            }
            delivery_id = self.store.put("deliveries", delivery)
            sender_email = self.cipher.decrypt_str(sender_person["email_enc"])
            sender_name = self.cipher.decrypt_str(sender_person["first_name_enc"])
            self.outbox.queue(
                EmailKind.DELIVERY_CREATED_SENDER,
                sender_email,
                {"name": sender_name, "tracking_code": code},
            )
            self.outbox.queue(
                EmailKind.DELIVERY_CREATED_RECEIVER,
                receiver["email"].strip(),
                {"name": receiver["name"].strip(), "tracking_code": code},
            )
        log.info("created delivery %s (%s)", delivery_id, code)
        return self.store.get("deliveries", delivery_id)

    def _unique_tracking_code(self) -> str:
        # Collisions at 60 bits are order 1e-10 even after 1e4 codes; the
        # retry loop is the spec'd safety net, not a hot path.
        for _ in range(16):
            code = generate_tracking_code(self.tracking_rng)
            if not self.store.list("deliveries", tracking_code=code):
                return code
        raise RuntimeError("could not find a free tracking code after 16 attempts")

    def _person_for_receiver(self, name: str, email: str) -> str:
        bidx = self.cipher.blind_index(email)
        existing = self.store.list("persons", email_bidx=bidx)
        if existing:
            # Prefer the account-linked row if the receiver is registered.
            linked = [p for p in existing if p.get("account_id")]
            return (linked or existing)[0]["id"]
        first, _, last = name.rpartition(" ")
        if not first:
            first, last = last, ""
        return self.store.put(
            "persons",
            {
                "first_name_enc": self.cipher.encrypt_str(first),
                "last_name_enc": self.cipher.encrypt_str(last),
                "email_enc": self.cipher.encrypt_str(email),
                "email_bidx": bidx,
                "phone_enc": None,
                "account_id": None,
                "created_at": to_rfc3339(self.clock.now()),
            },
        )

    # -- lookups ------------------------------------------------------------

    def by_code(self, tracking_code: str) -> dict:
        rows = self.store.list("deliveries", tracking_code=tracking_code)
        if not rows:
            raise NotFound("unknown tracking code", code="unknown_tracking_code")
        return rows[0]

    def tracking_view(self, tracking_code: str, caller_account_id: Optional[str] = None) -> dict:
        """Public tracking data; receiver identity appears only when the
        caller's account email matches the receiver person."""
        delivery = self.by_code(tracking_code)
        view = {
            "tracking_code": delivery["tracking_code"],
            "state": delivery["state"],
            "source_address": delivery["source"]["address_text"],
            "destination_address": delivery["destination"]["address_text"],
            "item": dict(delivery["item"]),
            "expected_delivery_time": delivery["expected_delivery_time"],
            "created_at": delivery["created_at"],
        }
        if delivery["state"] == DeliveryState.DELIVERING.value:
            last = latest_point(self.store, delivery["id"])
            if last:
                view["courier_position"] = {"lat": last["lat"], "lon": last["lon"], "ts": last["ts"]}
        if caller_account_id is not None:
            receiver = self.store.get("persons", delivery["receiver_person_id"])
            account = self.store.get("accounts", caller_account_id)
            if receiver and account and receiver["email_bidx"] == account["email_bidx"]:
                view["receiver"] = {
                    "first_name": self.cipher.decrypt_str(receiver["first_name_enc"]),
                    "last_name": self.cipher.decrypt_str(receiver["last_name_enc"]),
                    "email": self.cipher.decrypt_str(receiver["email_enc"]),
                }
        return view

    def describe(self, delivery: dict, include_receiver: bool = False) -> dict:
        """Participant-facing view (sender, courier, receiver history)."""
        view = {
            "tracking_code": delivery["tracking_code"],
            "state": delivery["state"],
            "item": dict(delivery["item"]),
            "source": dict(delivery["source"]),
            "destination": dict(delivery["destination"]),
            "route_distance_m": delivery["route_distance_m"],
            "expected_delivery_time": delivery["expected_delivery_time"],
            "created_at": delivery["created_at"],
            "courier_id": delivery.get("courier_id"),
            "note": delivery.get("note"),
        }
        if include_receiver:
            receiver = self.store.get("persons", delivery["receiver_person_id"])
            if receiver:
                view["receiver"] = {
                    "first_name": self.cipher.decrypt_str(receiver["first_name_enc"]),
                    "last_name": self.cipher.decrypt_str(receiver["last_name_enc"]),
                    "email": self.cipher.decrypt_str(receiver["email_enc"]),
                }
        return view

    # -- history & statistics ------------------------------------------------

    def list_history(self, account_id: str, direction: str = "sent") -> list[dict]:
        """Sender or receiver history, newest first."""
        if direction not in ("sent", "received"):
            raise ValidationFailed({"direction": "must be 'sent' or 'received'"})
        if direction == "sent":
            rows = self.store.list("deliveries", sender_account_id=account_id)
            include_receiver = True
        else:
            account = self.store.get("accounts", account_id)
            if account is None:
                raise NotFound("account not found")
            person_ids = {
                p["id"]
                for p in self.store.list("persons", email_bidx=account["email_bidx"])
            }
            rows = [
                d
                for d in self.store.list("deliveries")
                if d["receiver_person_id"] in person_ids
            ]
            include_receiver = True
        rows.sort(key=lambda d: (d["created_at"], d["id"]), reverse=True)
        return [self.describe(d, include_receiver=include_receiver) for d in rows]

    def statistics(self, account_id: str, months: int = 5) -> dict:
        """Per-calendar-month counts of the caller's sent deliveries over
        the trailing `months` months including the current one."""
        if not isinstance(months, int) or not 1 <= months <= 60:
            raise ValidationFailed({"months": "must be an integer within [1, 60]"})
        now = self.clock.now()
        window: list[str] = []
        year, month = now.year, now.month
        for _ in range(months):
            window.append(f"{year:04d}-{month:02d}")
            month -= 1
            if month == 0:
                year, month = year - 1, 12
        window.reverse()
        buckets = {m: 0 for m in window}
        for d in self.store.list("deliveries", sender_account_id=account_id):
            key = d["created_at"][:7]
            if key in buckets:
                buckets[key] += 1
        return {
            "window": window,
            "months": buckets,
            "total": sum(buckets.values()),
        }

    # -- courier side ---------------------------------------------------------

    def _courier_for_account(self, account_id: str) -> dict:
        rows = self.store.list("couriers", account_id=account_id)
        if not rows:
            raise Forbidden("caller is not a courier", code="not_a_courier")
        return rows[0]

    def closest_deliveries(
        self, courier_account_id: str, location: GeoPoint, limit: int = 10
    ) -> list[dict]:
        """Ready deliveries ordered by distance from `location` to their
        source, nearest first, truncated to `limit`."""
        self._courier_for_account(courier_account_id)
        if limit < 1:
            raise ValidationFailed({"limit": "must be at least 1"})
        ready = self.store.list("deliveries", state=DeliveryState.READY.value)
        ordered = order_by_distance(
            location,
            ready,
            key=lambda d: (
                GeoPoint(d["source"]["lat"], d["source"]["lon"]),
                d["created_at"],
                d["id"],
            ),
        )
        return [self.describe(d) for d in ordered[:limit]]

    def accept_delivery(self, courier_account_id: str, tracking_code: str) -> dict:
        """Claim a ready delivery. Under concurrent acceptance exactly one
        courier wins; the rest see a not_ready conflict."""
        courier = self._courier_for_account(courier_account_id)
        delivery = self.by_code(tracking_code)
        won = self.store.conditional_update(
            "deliveries",
            delivery["id"],
            expect={"state": DeliveryState.READY.value, "courier_id": None},
            changes={"state": DeliveryState.ASSIGNED.value, "courier_id": courier["id"]},
        )
        if not won:
            raise Conflict("delivery is not ready", code="not_ready")
        log.info("courier %s accepted %s", courier["id"], tracking_code)
        return self.store.get("deliveries", delivery["id"])

    def change_state(
        self,
        courier_account_id: str,
        tracking_code: str,
        new_state: str,
        note: Optional[str] = None,
    ) -> dict:
        """Advance an assigned delivery; only its courier may do so."""
        try:
            target = DeliveryState(new_state)
        except ValueError:
            raise ValidationFailed({"state": f"unknown state {new_state!r}"})
        courier = self._courier_for_account(courier_account_id)
        delivery = self.by_code(tracking_code)
        if delivery.get("courier_id") != courier["id"]:
            raise Forbidden(
                "only the assigned courier may change this delivery",
                code="not_assigned_courier",
            )
        current = DeliveryState(delivery["state"])
        if not validate_transition(current, target):
            raise Conflict(
                f"cannot move {current.value} -> {target.value}",
                code="forbidden_transition",
            )
        changes: dict = {"state": target.value}
        if target == DeliveryState.READY:
            changes["courier_id"] = None  # un-accept returns it to the pool
        if note is not None:
            changes["note"] = note
        with self.store.transaction():
            won = self.store.conditional_update(
                "deliveries",
                delivery["id"],
                expect={"state": current.value, "courier_id": courier["id"]},
                changes=changes,
            )
            if not won:
                raise Conflict("delivery state changed concurrently", code="not_ready")
            if target == DeliveryState.DELIVERED:
                sender = self.store.get("persons", delivery["sender_person_id"])
                self.outbox.queue(
                    EmailKind.DELIVERY_COMPLETED,
                    self.cipher.decrypt_str(sender["email_enc"]),
                    {
                        "name": self.cipher.decrypt_str(sender["first_name_enc"]),
                        "tracking_code": tracking_code,
                    },
                )
        return self.store.get("deliveries", delivery["id"])


def _place_doc(place: dict) -> dict:
    return {
        "address_text": place["address_text"].strip(),
        "lat": place["lat"],
        "lon": place["lon"],
    }
