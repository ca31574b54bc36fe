"""Live location hub: per-delivery channels plus one global channel.

Anyone may subscribe to a delivery channel (addressed by tracking code,
so receivers need nothing but their code) or to the global channel.
Publishing is restricted to the courier assigned to that delivery,
authenticated by access token at connect time. Every accepted publish is
first persisted to the delivery's route, then fanned out enriched with
the courier id and server timestamp, so the stored route and the
broadcast stream are always identical.

The hub is transport-agnostic: the websocket endpoints register
connections and pump their queues. Broadcast never blocks the publisher;
a subscriber whose bounded queue overflows is dropped with a close frame.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Optional

from .auth import AuthError, TokenService
from .clock import Clock, parse_rfc3339, to_rfc3339
from .domain import DeliveryState
from .errors import NotFound
from .routesvc import RouteService, latest_point
from .store import RecordStore

log = logging.getLogger(__name__)

GLOBAL_CHANNEL = "global"
SUBSCRIBER_QUEUE_SIZE = 64


class Mode(str, Enum):
    PUBLISHER = "publisher"
    SUBSCRIBER = "subscriber"


class PublishRejected(Exception):
    def __init__(self, code: str):
        super().__init__(code)
        self.code = code


_CLOSE = object()  # queue sentinel: writer should close the socket


@dataclass(eq=False)
class Connection:
    channel: str  # tracking code, or GLOBAL_CHANNEL
    mode: Mode
    delivery_id: Optional[str] = None
    courier_id: Optional[str] = None
    queue: Optional[asyncio.Queue] = None
    last_publish_at: Optional[datetime] = None
    closed: bool = False
    close_code: int = 1000
    # Set by the transport glue; lets the sweep interrupt a blocked reader.
    transport_close = None

    def enqueue(self, item) -> bool:
        if self.queue is None or self.closed:
            return False
        try:
            self.queue.put_nowait(item)
            return True
        except asyncio.QueueFull:
            return False

    def enqueue_close(self) -> None:
        if self.queue is not None:
            try:
                self.queue.put_nowait(_CLOSE)
            except asyncio.QueueFull:
                # Writer will notice `closed` after draining; nothing else to do.
                pass


class RealtimeHub:
    def __init__(
        self,
        store: RecordStore,
        routes: RouteService,
        tokens: TokenService,
        clock: Clock,
        staleness_seconds: float = 60.0,
    ):
        self.store = store
        self.routes = routes
        self.tokens = tokens
        self.clock = clock
        self.staleness = timedelta(seconds=staleness_seconds)
        self._subscribers: dict[str, set[Connection]] = {}
        self._publishers: set[Connection] = set()

    # -- lifecycle ----------------------------------------------------------

    def open_delivery_channel(self, tracking_code: str, token: Optional[str]) -> Connection:
        """Join a delivery channel. Publisher mode iff the token belongs to
        the courier assigned to that delivery; everyone else subscribes."""
        rows = self.store.list("deliveries", tracking_code=tracking_code)
        if not rows:
            raise NotFound("unknown delivery", code="unknown_delivery")
        delivery = rows[0]
        courier_id = self._courier_for_token(token)
        if courier_id is not None and delivery.get("courier_id") == courier_id:
            conn = Connection(
                channel=tracking_code,
                mode=Mode.PUBLISHER,
                delivery_id=delivery["id"],
                courier_id=courier_id,
                last_publish_at=self.clock.now(),
            )
            self._publishers.add(conn)
        else:
            conn = Connection(
                channel=tracking_code,
                mode=Mode.SUBSCRIBER,
                delivery_id=delivery["id"],
                queue=asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_SIZE),
            )
            self._subscribers.setdefault(tracking_code, set()).add(conn)
        return conn

    def open_global_channel(self) -> Connection:
        conn = Connection(
            channel=GLOBAL_CHANNEL,
            mode=Mode.SUBSCRIBER,
            queue=asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_SIZE),
        )
        self._subscribers.setdefault(GLOBAL_CHANNEL, set()).add(conn)
        return conn

    def _courier_for_token(self, token: Optional[str]) -> Optional[str]:
        if not token:
            return None
        try:
            claims = self.tokens.verify_access(token)
        except AuthError:
            return None
        rows = self.store.list("couriers", account_id=claims.account_id)
        return rows[0]["id"] if rows else None

    def close(self, conn: Connection, code: int = 1000) -> None:
        conn.closed = True
        conn.close_code = code
        self._publishers.discard(conn)
        peers = self._subscribers.get(conn.channel)
        if peers is not None:
            peers.discard(conn)
            if not peers:
                self._subscribers.pop(conn.channel, None)

    # -- publishing -----------------------------------------------------------

    def publish(self, conn: Connection, lat, lon) -> dict:
        """Validate, persist and broadcast one location frame."""
        if conn.mode != Mode.PUBLISHER:
            raise PublishRejected("not_publisher")
        if not isinstance(lat, (int, float)) or not isinstance(lon, (int, float)) \
                or isinstance(lat, bool) or isinstance(lon, bool) \
                or not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
            raise PublishRejected("invalid_coordinates")
        delivery = self.store.get("deliveries", conn.delivery_id)
        if delivery is None or delivery.get("courier_id") != conn.courier_id:
            raise PublishRejected("wrong_state")
        if delivery["state"] not in (
            DeliveryState.ASSIGNED.value,
            DeliveryState.DELIVERING.value,
        ):
            raise PublishRejected("wrong_state")

        at = self.clock.now()
        last = latest_point(self.store, conn.delivery_id)
        if last is not None:
            floor = parse_rfc3339(last["ts"])
            if at <= floor:
                # Server clock did not advance between two frames; nudge so
                # the route keeps strictly increasing timestamps.
                at = floor + timedelta(microseconds=1)
        self.routes.append_point(conn.delivery_id, float(lat), float(lon), at=at)
        self.store.conditional_update(
            "couriers",
            conn.courier_id,
            expect={},
            changes={
                "last_lat": float(lat),
                "last_lon": float(lon),
                "last_seen_at": to_rfc3339(at),
            },
        )
        conn.last_publish_at = at

        message = {
            "delivery_id": delivery["tracking_code"],
            "courier_id": conn.courier_id,
            "lat": float(lat),
            "lon": float(lon),
            "ts": to_rfc3339(at),
        }
        self._broadcast(delivery["tracking_code"], message)
        return message

    def _broadcast(self, channel: str, message: dict) -> None:
        for target in (channel, GLOBAL_CHANNEL):
            for sub in list(self._subscribers.get(target, ())):
                if not sub.enqueue(message):
                    # Slow consumer: drop it rather than stall the publisher.
                    log.warning("dropping slow subscriber on %s", target)
                    self.close(sub, code=1008)
                    try:
                        sub.queue.get_nowait()  # make room for the sentinel
                    except asyncio.QueueEmpty:
                        pass
                    sub.enqueue_close()

    # -- staleness ------------------------------------------------------------

    def staleness_sweep(self, now: Optional[datetime] = None) -> list[Connection]:
        """Close publishers silent past the staleness bound and mark couriers
        with stale positions unavailable. Subscribers are never swept."""
        now = now or self.clock.now()
        swept = []
        for conn in list(self._publishers):
            if conn.last_publish_at and now - conn.last_publish_at > self.staleness:
                self.close(conn, code=4408)
                swept.append(conn)
        cutoff = now - self.staleness
        for courier in self.store.list("couriers", is_available=True):
            seen = courier.get("last_seen_at")
            if seen and parse_rfc3339(seen) < cutoff:
                self.store.conditional_update(
                    "couriers", courier["id"], expect={}, changes={"is_available": False}
                )
        return swept

    def subscriber_count(self, channel: str) -> int:
        return len(self._subscribers.get(channel, ()))
