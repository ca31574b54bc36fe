import pytest

from crowdship.errors import NotFound
from crowdship.realtime import _CLOSE, Mode, PublishRejected

from conftest import make_delivery_payload, make_services


@pytest.fixture
def svc():
    services = make_services(auto_activate_accounts=True)
    yield services
    services.store.close()


@pytest.fixture
def world(svc):
    sender = svc.accounts.register("s@x.org", "password123", "S", "S")
    courier = svc.accounts.register("c@x.org", "password123", "C", "C")
    svc.accounts.register_courier(courier["account_id"], "small")
    other = svc.accounts.register("o@x.org", "password123", "O", "O")
    svc.accounts.register_courier(other["account_id"], "large")
    delivery = svc.dispatch.create_delivery(sender["account_id"], **make_delivery_payload())
    code = delivery["tracking_code"]
    svc.dispatch.accept_delivery(courier["account_id"], code)
    svc.dispatch.change_state(courier["account_id"], code, "delivering")
    return {
        "code": code,
        "courier_token": svc.accounts.login("c@x.org", "password123").access_token,
        "other_token": svc.accounts.login("o@x.org", "password123").access_token,
        "courier_id": svc.accounts.courier_of(courier["account_id"])["id"],
        "courier_account": courier,
        "sender": sender,
    }


class TestOpenChannel:
    def test_unknown_delivery(self, svc):
        with pytest.raises(NotFound):
            svc.hub.open_delivery_channel("AAAAAAAAAAAA", None)

    def test_anonymous_is_subscriber(self, svc, world):
        conn = svc.hub.open_delivery_channel(world["code"], None)
        assert conn.mode == Mode.SUBSCRIBER

    def test_assigned_courier_is_publisher(self, svc, world):
        conn = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        assert conn.mode == Mode.PUBLISHER
        assert conn.courier_id == world["courier_id"]

    def test_other_courier_is_subscriber(self, svc, world):
        conn = svc.hub.open_delivery_channel(world["code"], world["other_token"])
        assert conn.mode == Mode.SUBSCRIBER

    def test_garbage_token_is_subscriber(self, svc, world):
        conn = svc.hub.open_delivery_channel(world["code"], "not-a-token")
        assert conn.mode == Mode.SUBSCRIBER

    def test_global_is_subscriber_only(self, svc):
        conn = svc.hub.open_global_channel()
        assert conn.mode == Mode.SUBSCRIBER


class TestPublish:
    def test_fanout_to_channel_and_global(self, svc, world):
        subs = [svc.hub.open_delivery_channel(world["code"], None) for _ in range(3)]
        glob = svc.hub.open_global_channel()
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        message = svc.hub.publish(pub, 48.15, 17.11)
        assert message["courier_id"] == world["courier_id"]
        assert message["delivery_id"] == world["code"]
        for sub in subs + [glob]:
            assert sub.queue.get_nowait() == message

    def test_subscriber_cannot_publish(self, svc, world):
        sub = svc.hub.open_delivery_channel(world["code"], None)
        with pytest.raises(PublishRejected) as exc:
            svc.hub.publish(sub, 48.0, 17.0)
        assert exc.value.code == "not_publisher"

    def test_invalid_coordinates(self, svc, world):
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        for lat, lon in ((91, 0), (0, 181), ("x", 0), (None, None), (True, 17.0)):
            with pytest.raises(PublishRejected) as exc:
                svc.hub.publish(pub, lat, lon)
            assert exc.value.code == "invalid_coordinates"

    def test_wrong_state(self, svc, world):
        # Publisher connected while delivering; publish after completion
        # must be rejected but keep the connection usable.
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        svc.dispatch.change_state(
            world["courier_account"]["account_id"], world["code"], "delivered"
        )
        with pytest.raises(PublishRejected) as exc:
            svc.hub.publish(pub, 48.0, 17.0)
        assert exc.value.code == "wrong_state"
        assert not pub.closed

    def test_publish_appends_route_and_updates_courier(self, svc, world):
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        svc.clock.advance(4)
        svc.hub.publish(pub, 48.15, 17.11)
        delivery = svc.dispatch.by_code(world["code"])
        points = svc.routes.points_of(delivery["id"])
        assert [(p["lat"], p["lon"]) for p in points] == [(48.15, 17.11)]
        courier = svc.store.get("couriers", world["courier_id"])
        assert (courier["last_lat"], courier["last_lon"]) == (48.15, 17.11)
        assert courier["last_seen_at"]

    def test_route_equals_broadcast_sequence(self, svc, world):
        sub = svc.hub.open_delivery_channel(world["code"], None)
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        sent = []
        for i in range(10):
            svc.clock.advance(4)
            sent.append(svc.hub.publish(pub, 48.0 + i * 0.001, 17.0))
        received = [sub.queue.get_nowait() for _ in range(10)]
        assert received == sent  # FIFO per publisher
        delivery = svc.dispatch.by_code(world["code"])
        points = svc.routes.points_of(delivery["id"])
        assert [(p["lat"], p["lon"], p["ts"]) for p in points] == [
            (m["lat"], m["lon"], m["ts"]) for m in received
        ]

    def test_same_instant_publishes_get_nudged_timestamps(self, svc, world):
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        m1 = svc.hub.publish(pub, 48.0, 17.0)  # clock frozen between frames
        m2 = svc.hub.publish(pub, 48.1, 17.1)
        assert m2["ts"] > m1["ts"]

    def test_slow_subscriber_dropped_not_blocking(self, svc, world):
        from crowdship.realtime import SUBSCRIBER_QUEUE_SIZE

        sub = svc.hub.open_delivery_channel(world["code"], None)
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        for i in range(SUBSCRIBER_QUEUE_SIZE + 5):
            svc.clock.advance(4)
            svc.hub.publish(pub, 48.0, 17.0)
        assert sub.closed
        assert sub.close_code == 1008
        assert svc.hub.subscriber_count(world["code"]) == 0
        # The drained queue ends with the close sentinel.
        items = []
        while not sub.queue.empty():
            items.append(sub.queue.get_nowait())
        assert items[-1] is _CLOSE


class TestStalenessSweep:
    def test_silent_publisher_closed_after_bound(self, svc, world):
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        svc.hub.publish(pub, 48.0, 17.0)
        svc.clock.advance(61)
        swept = svc.hub.staleness_sweep()
        assert pub in swept
        assert pub.closed and pub.close_code == 4408

    def test_regular_cadence_never_swept(self, svc, world):
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        for _ in range(30):
            svc.clock.advance(4)
            svc.hub.publish(pub, 48.0, 17.0)
            assert svc.hub.staleness_sweep() == []
        assert not pub.closed

    def test_subscribers_never_swept(self, svc, world):
        sub = svc.hub.open_delivery_channel(world["code"], None)
        svc.clock.advance(10_000)
        svc.hub.staleness_sweep()
        assert not sub.closed

    def test_stale_courier_marked_unavailable(self, svc, world):
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        svc.hub.publish(pub, 48.0, 17.0)
        assert svc.store.get("couriers", world["courier_id"])["is_available"] is True
        svc.clock.advance(61)
        svc.hub.staleness_sweep()
        assert svc.store.get("couriers", world["courier_id"])["is_available"] is False

    def test_fresh_courier_stays_available(self, svc, world):
        pub = svc.hub.open_delivery_channel(world["code"], world["courier_token"])
        svc.hub.publish(pub, 48.0, 17.0)
        svc.clock.advance(30)
        svc.hub.staleness_sweep()
        assert svc.store.get("couriers", world["courier_id"])["is_available"] is True
