"""Recording and querying of courier location traces.

Each accepted point becomes an append-only row; timestamps must be
strictly increasing per delivery. The public route query exposes traces
of deliveries currently underway, plus finished ones when the caller
narrows by a time window.
"""

from __future__ import annotations

from datetime import datetime
from typing import Optional

from .clock import Clock, parse_rfc3339, to_rfc3339
from .domain import DeliveryState
from .errors import Conflict, NotFound, ValidationFailed
from .store import RecordStore

ACTIVE_STATES = {DeliveryState.ASSIGNED.value, DeliveryState.DELIVERING.value}


def latest_point(store: RecordStore, delivery_id: str) -> Optional[dict]:
    points = store.list("route_points", delivery_id=delivery_id)
    return points[-1] if points else None


class RouteService:
    def __init__(self, store: RecordStore, clock: Clock):
        self.store = store
        self.clock = clock

    def append_point(
        self, delivery_id: str, lat: float, lon: float, at: Optional[datetime] = None
    ) -> dict:
        """Append one point to the delivery's route.

        Rejected when the delivery is not underway or the timestamp does
        not advance past the last recorded point.
        """
        at = at or self.clock.now()
        with self.store.transaction():
            delivery = self.store.get("deliveries", delivery_id)
            if delivery is None:
                raise NotFound("unknown delivery", code="unknown_delivery")
            if delivery["state"] not in ACTIVE_STATES:
                raise Conflict(
                    f"delivery is {delivery['state']}, not underway", code="wrong_state"
                )
            last = latest_point(self.store, delivery_id)
            if last is not None and at <= parse_rfc3339(last["ts"]):
                raise ValidationFailed(
                    {"ts": "timestamp must be after the last recorded point"},
                    message="non-monotonic timestamp",
                )
            seq = (last["seq"] + 1) if last else 0
            point = {
                "delivery_id": delivery_id,
                "seq": seq,
                "lat": lat,
                "lon": lon,
                "ts": to_rfc3339(at),
            }
            point_id = self.store.put("route_points", point)
        return self.store.get("route_points", point_id)

    def points_of(self, delivery_id: str) -> list[dict]:
        return self.store.list("route_points", delivery_id=delivery_id)

    def query(
        self,
        courier_id: Optional[str] = None,
        tracking_code: Optional[str] = None,
        t_from: Optional[datetime] = None,
        t_to: Optional[datetime] = None,
    ) -> list[dict]:
        """Public route listing, every filter optional.

        Without a window only deliveries in the delivering state appear;
        a window additionally admits finished (terminal-state) deliveries
        whose recorded points fall inside it.
        """
        windowed = t_from is not None or t_to is not None
        visible_states = {DeliveryState.DELIVERING.value}
        if windowed:
            visible_states |= {
                DeliveryState.DELIVERED.value,
                DeliveryState.UNDELIVERABLE.value,
            }
        routes = []
        for delivery in self.store.list("deliveries"):
            if delivery["state"] not in visible_states:
                continue
            if courier_id is not None and delivery.get("courier_id") != courier_id:
                continue
            if tracking_code is not None and delivery["tracking_code"] != tracking_code:
                continue
            points = []
            for p in self.points_of(delivery["id"]):
                ts = parse_rfc3339(p["ts"])
                if t_from is not None and ts < t_from:
                    continue
                if t_to is not None and ts > t_to:
                    continue
                points.append({"lat": p["lat"], "lon": p["lon"], "ts": p["ts"]})
            if not points:
                continue
            routes.append(
                {
                    "delivery_id": delivery["tracking_code"],
                    "courier_id": delivery.get("courier_id"),
                    "state": delivery["state"],
                    "points": points,
                }
            )
        return routes
