import random
from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from crowdship.domain import (
    Account,
    Delivery,
    DeliveryState,
    GeoPoint,
    Item,
    Place,
    Route,
    RoutePoint,
    TRACKING_CODE_RE,
    WeightClass,
    allowed_transitions,
    generate_tracking_code,
    is_tracking_code,
    validate_item,
    validate_transition,
)

S = DeliveryState

# The full expected transition relation, written out as the oracle.
EXPECTED_EDGES = {
    (S.READY, S.ASSIGNED),
    (S.ASSIGNED, S.DELIVERING),
    (S.ASSIGNED, S.UNDELIVERABLE),
    (S.ASSIGNED, S.READY),
    (S.DELIVERING, S.DELIVERED),
    (S.DELIVERING, S.UNDELIVERABLE),
}


class TestStateMachine:
    def test_exhaustive_25_pairs(self):
        for a in S:
            for b in S:
                assert validate_transition(a, b) == ((a, b) in EXPECTED_EDGES), (a, b)

    def test_edge_count_and_terminals(self):
        edges = [(a, b) for a in S for b in S if validate_transition(a, b)]
        assert len(edges) == 6
        assert allowed_transitions(S.DELIVERED) == frozenset()
        assert allowed_transitions(S.UNDELIVERABLE) == frozenset()

    def test_named_examples(self):
        assert allowed_transitions(S.READY) == {S.ASSIGNED}
        assert allowed_transitions(S.DELIVERING) == {S.DELIVERED, S.UNDELIVERABLE}
        assert validate_transition(S.READY, S.ASSIGNED)
        assert not validate_transition(S.DELIVERED, S.READY)


class TestTrackingCode:
    def test_format(self):
        for _ in range(200):
            code = generate_tracking_code()
            assert TRACKING_CODE_RE.match(code)
            assert is_tracking_code(code)

    def test_deterministic_under_seed(self):
        assert generate_tracking_code(random.Random(7)) == generate_tracking_code(random.Random(7))
        assert generate_tracking_code(random.Random(7)) != generate_tracking_code(random.Random(8))

    def test_no_duplicates_in_large_sample(self):
        # Birthday bound: 1e5 codes at 60 bits -> collision odds ~4e-9.
        codes = {generate_tracking_code() for _ in range(100_000)}
        assert len(codes) == 100_000

    @given(st.integers(min_value=0, max_value=2**64 - 1))
    def test_seeded_codes_always_valid(self, seed):
        assert is_tracking_code(generate_tracking_code(random.Random(seed)))


class TestValidateItem:
    def test_zero_width_names_field(self):
        result = validate_item(0, 20, 10, "medium")
        assert not result.ok
        assert list(result.errors) == ["width_cm"]

    def test_well_formed(self):
        assert validate_item(30, 20, 10, "medium").ok

    def test_two_errors(self):
        result = validate_item(30, 20, -5, None)
        assert set(result.errors) == {"depth_cm", "weight_class"}

    def test_unknown_weight_class(self):
        result = validate_item(30, 20, 10, "enormous")
        assert set(result.errors) == {"weight_class"}

    def test_non_numeric_dimension(self):
        result = validate_item("30", 20, 10, "light")
        assert set(result.errors) == {"width_cm"}


class TestValueInvariants:
    def test_geo_point_ranges(self):
        GeoPoint(90, 180); GeoPoint(-90, -180)
        with pytest.raises(ValueError):
            GeoPoint(90.01, 0)
        with pytest.raises(ValueError):
            GeoPoint(0, -180.01)

    def test_admin_must_be_active(self):
        with pytest.raises(ValueError):
            Account("a1", "a@x.org", "hash", is_admin=True, is_active=False)

    def test_delivery_state_courier_consistency(self):
        kwargs = dict(
            delivery_id="d1",
            tracking_code=generate_tracking_code(),
            sender_person_id="p1",
            receiver_person_id="p2",
            item=Item(1, 1, 1, WeightClass.LIGHT),
            source=Place("a", GeoPoint(0, 0)),
            destination=Place("b", GeoPoint(1, 1)),
            route_distance_m=10.0,
            expected_delivery_time=datetime(2026, 1, 1, tzinfo=timezone.utc),
            created_at=datetime(2026, 1, 1, tzinfo=timezone.utc),
        )
        Delivery(state=S.READY, courier_id=None, **kwargs)
        Delivery(state=S.ASSIGNED, courier_id="c1", **kwargs)
        with pytest.raises(ValueError):
            Delivery(state=S.READY, courier_id="c1", **kwargs)
        with pytest.raises(ValueError):
            Delivery(state=S.ASSIGNED, courier_id=None, **kwargs)

    def test_route_timestamps_strictly_increasing(self):
        t1 = datetime(2026, 1, 1, 12, 0, 0, tzinfo=timezone.utc)
        t2 = datetime(2026, 1, 1, 12, 0, 4, tzinfo=timezone.utc)
        Route("d1", (RoutePoint(GeoPoint(0, 0), t1), RoutePoint(GeoPoint(0, 1), t2)))
        with pytest.raises(ValueError):
            Route("d1", (RoutePoint(GeoPoint(0, 0), t2), RoutePoint(GeoPoint(0, 1), t1)))
        with pytest.raises(ValueError):
            Route("d1", (RoutePoint(GeoPoint(0, 0), t1), RoutePoint(GeoPoint(0, 1), t1)))
