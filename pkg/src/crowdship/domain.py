"""Core domain types for the shared-delivery platform.

Everything here is pure: immutable value types, the delivery state
machine, tracking-code generation and input validation. Storage and
transport live elsewhere.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from typing import Optional


class Role(str, Enum):
    USER = "user"
    COURIER = "courier"


class VehicleClass(str, Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


class WeightClass(str, Enum):
    LIGHT = "light"
    MEDIUM = "medium"
    HEAVY = "heavy"


class DeliveryState(str, Enum):
    READY = "ready"
    ASSIGNED = "assigned"
    DELIVERING = "delivering"
    DELIVERED = "delivered"
    UNDELIVERABLE = "undeliverable"


# The allowed edge set of the delivery state machine. assigned -> ready is
# the courier un-accepting, which returns the parcel to the open pool;
# delivered and undeliverable are terminal.
_TRANSITIONS: dict[DeliveryState, frozenset[DeliveryState]] = {
    DeliveryState.READY: frozenset({DeliveryState.ASSIGNED}),
    DeliveryState.ASSIGNED: frozenset(
        {DeliveryState.DELIVERING, DeliveryState.UNDELIVERABLE, DeliveryState.READY}
    ),
    DeliveryState.DELIVERING: frozenset(
        {DeliveryState.DELIVERED, DeliveryState.UNDELIVERABLE}
    ),
    DeliveryState.DELIVERED: frozenset(),
    DeliveryState.UNDELIVERABLE: frozenset(),
}


def allowed_transitions(state: DeliveryState) -> frozenset[DeliveryState]:
    """Return the set of states a delivery in `state` may move to."""
    return _TRANSITIONS[state]


def validate_transition(current: DeliveryState, new: DeliveryState) -> bool:
    """True iff `current -> new` is an allowed edge."""
    return new in _TRANSITIONS[current]


TRACKING_CODE_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567"
TRACKING_CODE_LENGTH = 12
TRACKING_CODE_RE = re.compile(r"^[A-Z2-7]{12}$")

_system_random = random.SystemRandom()


def generate_tracking_code(rng: random.Random | None = None) -> str:
    """Generate a 12-character base32 tracking code (60 bits of entropy).

    Uniqueness is probabilistic; callers that persist codes must retry on
    a storage uniqueness conflict. Pass a seeded `random.Random` to get
    reproducible codes in tests; the default draws from the OS CSPRNG.
    """
    bits = (rng or _system_random).getrandbits(60)
    chars = []
    for _ in range(TRACKING_CODE_LENGTH):
        bits, idx = divmod(bits, 32)
        chars.append(TRACKING_CODE_ALPHABET[idx])
    return "".join(chars)


def is_tracking_code(value: str) -> bool:
    return bool(TRACKING_CODE_RE.match(value))


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.latitude <= 90.0):
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not (-180.0 <= self.longitude <= 180.0):
            raise ValueError(f"longitude out of range: {self.longitude}")


@dataclass(frozen=True)
class Place:
    address_text: str
    location: GeoPoint


@dataclass(frozen=True)
class Item:
    width_cm: float
    height_cm: float
    depth_cm: float
    weight_class: WeightClass
    fragile: bool = False
    description: Optional[str] = None
    picture_id: Optional[str] = None


@dataclass(frozen=True)
class Account:
    account_id: str
    email: str
    password_hash: str
    role: Role = Role.USER
    is_admin: bool = False
    is_active: bool = False

    def __post_init__(self) -> None:
        if self.is_admin and not self.is_active:
            raise ValueError("admin accounts must be active")


@dataclass(frozen=True)
class Person:
    person_id: str
    first_name: str
    last_name: str
    email: str
    phone: Optional[str] = None
    account_id: Optional[str] = None


@dataclass(frozen=True)
class Courier:
    courier_id: str
    account_id: str
    vehicle_class: VehicleClass
    registered_on: date
    is_available: bool = True
    last_location: Optional[GeoPoint] = None
    last_seen_at: Optional[datetime] = None


@dataclass(frozen=True)
class Delivery:
    delivery_id: str
    tracking_code: str
    sender_person_id: str
    receiver_person_id: str
    item: Item
    source: Place
    destination: Place
    state: DeliveryState
    route_distance_m: float
    expected_delivery_time: datetime
    created_at: datetime
    courier_id: Optional[str] = None
    note: Optional[str] = None

    def __post_init__(self) -> None:
        if self.route_distance_m < 0:
            raise ValueError("route_distance_m must be non-negative")
        # ready <=> unassigned; every other state carries the courier.
        if (self.state == DeliveryState.READY) != (self.courier_id is None):
            raise ValueError(
                f"state {self.state.value} inconsistent with courier_id={self.courier_id!r}"
            )


@dataclass(frozen=True)
class RoutePoint:
    location: GeoPoint
    at: datetime


@dataclass(frozen=True)
class Route:
    delivery_id: str
    points: tuple[RoutePoint, ...] = ()

    def __post_init__(self) -> None:
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.at <= prev.at:
                raise ValueError("route timestamps must be strictly increasing")


@dataclass
class ValidationResult:
    """Per-field validation outcome; never raises."""

    errors: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors

    def add(self, field_name: str, message: str) -> None:
        self.errors[field_name] = message


_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")


def is_email(value: str) -> bool:
    return bool(_EMAIL_RE.match(value))


def validate_item(
    width_cm: object,
    height_cm: object,
    depth_cm: object,
    weight_class: object,
) -> ValidationResult:
    """Check raw parcel input. Dimensions must be strictly positive numbers
    and the weight class one of the known values."""
    result = ValidationResult()
    for name, value in (
        ("width_cm", width_cm),
        ("height_cm", height_cm),
        ("depth_cm", depth_cm),
    ):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            result.add(name, "must be a number")
        elif not value > 0:
            result.add(name, "must be strictly positive")
    if weight_class is None:
        result.add("weight_class", "is required")
    else:
        try:
            WeightClass(weight_class)
        except ValueError:
            result.add(
                "weight_class",
                f"must be one of {', '.join(w.value for w in WeightClass)}",
            )
    return result


def validate_geo(latitude: object, longitude: object, prefix: str = "") -> ValidationResult:
    result = ValidationResult()
    if not isinstance(latitude, (int, float)) or isinstance(latitude, bool):
        result.add(prefix + "latitude", "must be a number")
    elif not -90.0 <= latitude <= 90.0:
        result.add(prefix + "latitude", "must be within [-90, 90]")
    if not isinstance(longitude, (int, float)) or isinstance(longitude, bool):
        result.add(prefix + "longitude", "must be a number")
    elif not -180.0 <= longitude <= 180.0:
        result.add(prefix + "longitude", "must be within [-180, 180]")
    return result
