import math
import random
from collections import namedtuple

from hypothesis import given, strategies as st

from crowdship.domain import GeoPoint
from crowdship.geo import EARTH_RADIUS_M, HaversineProvider, haversine_m, order_by_distance


def law_of_cosines_m(a: GeoPoint, b: GeoPoint) -> float:
    """Independent oracle: spherical law of cosines."""
    p1, p2 = math.radians(a.latitude), math.radians(b.latitude)
    dl = math.radians(b.longitude - a.longitude)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return EARTH_RADIUS_M * math.acos(max(-1.0, min(1.0, c)))


latitudes = st.floats(min_value=-90, max_value=90, allow_nan=False)
longitudes = st.floats(min_value=-180, max_value=180, allow_nan=False)
points = st.builds(GeoPoint, latitudes, longitudes)


class TestHaversine:
    def test_identity_is_zero(self):
        p = GeoPoint(48.15, 17.11)
        assert haversine_m(p, p) == 0.0

    def test_one_degree_arc_at_equator(self):
        # Analytic: R * pi / 180 = 111194.93 m
        d = haversine_m(GeoPoint(0, 0), GeoPoint(0, 1))
        assert abs(d - 111_194.93) < 1.0
        assert abs(d - law_of_cosines_m(GeoPoint(0, 0), GeoPoint(0, 1))) < 0.01

    def test_antipodal(self):
        # pi * R = 20015086.8 m
        d = haversine_m(GeoPoint(0, 0), GeoPoint(0, 180))
        assert abs(d - 20_015_087) < 10.0

    @given(points, points)
    def test_symmetric_and_nonnegative(self, a, b):
        assert haversine_m(a, b) >= 0
        assert math.isclose(haversine_m(a, b), haversine_m(b, a), rel_tol=1e-12, abs_tol=1e-9)

    @given(points, points)
    def test_agrees_with_law_of_cosines(self, a, b):
        d = haversine_m(a, b)
        # The law-of-cosines oracle is numerically weak for tiny distances;
        # compare where it is well-conditioned.
        if d > 10.0:
            assert math.isclose(d, law_of_cosines_m(a, b), rel_tol=1e-6, abs_tol=0.5)

    @given(points, points, points)
    def test_triangle_inequality(self, a, b, c):
        assert haversine_m(a, c) <= haversine_m(a, b) + haversine_m(b, c) + 1e-6

    def test_provider_wraps_haversine(self):
        a, b = GeoPoint(48.1486, 17.1077), GeoPoint(48.1550, 17.1650)
        assert HaversineProvider().distance_m(a, b) == haversine_m(a, b)


FakeDelivery = namedtuple("FakeDelivery", "delivery_id created_at source")
FakePlace = namedtuple("FakePlace", "location")


def fake_delivery(rng, i):
    return FakeDelivery(
        delivery_id=f"d{i:03d}",
        created_at=f"2026-01-{1 + rng.randrange(28):02d}T00:00:00Z",
        source=FakePlace(GeoPoint(rng.uniform(-80, 80), rng.uniform(-179, 179))),
    )


class TestOrderByDistance:
    def test_empty(self):
        assert order_by_distance(GeoPoint(0, 0), []) == []

    def test_matches_brute_force_oracle(self):
        rng = random.Random(1234)
        for _ in range(20):
            origin = GeoPoint(rng.uniform(-80, 80), rng.uniform(-179, 179))
            items = [fake_delivery(rng, i) for i in range(50)]
            got = order_by_distance(origin, items)
            expected = sorted(
                items,
                key=lambda d: (
                    law_of_cosines_m(origin, d.source.location),
                    d.created_at,
                    d.delivery_id,
                ),
            )
            assert [d.delivery_id for d in got] == [d.delivery_id for d in expected]

    def test_output_is_permutation(self):
        rng = random.Random(99)
        items = [fake_delivery(rng, i) for i in range(40)]
        got = order_by_distance(GeoPoint(10, 10), items)
        assert sorted(d.delivery_id for d in got) == sorted(d.delivery_id for d in items)

    def test_two_origins_order_differently(self):
        rng = random.Random(7)
        items = [fake_delivery(rng, i) for i in range(10)]
        east = order_by_distance(GeoPoint(0, 170), items)
        west = order_by_distance(GeoPoint(0, -170), items)
        assert [d.delivery_id for d in east] != [d.delivery_id for d in west]

    def test_tie_break_is_deterministic(self):
        same_spot = FakePlace(GeoPoint(5, 5))
        items = [
            FakeDelivery("b", "2026-01-02T00:00:00Z", same_spot),
            FakeDelivery("a", "2026-01-02T00:00:00Z", same_spot),
            FakeDelivery("c", "2026-01-01T00:00:00Z", same_spot),
        ]
        got = order_by_distance(GeoPoint(0, 0), items)
        assert [d.delivery_id for d in got] == ["c", "a", "b"]
