"""Injectable time source plus RFC 3339 helpers.

Services never call datetime.now directly; they take a Clock so tests can
script token expiry, statistics windows and staleness sweeps.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone


class Clock:
    def now(self) -> datetime:
        raise NotImplementedError


class SystemClock(Clock):
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class ManualClock(Clock):
    """Test clock: starts at a fixed instant and only moves when told."""

    def __init__(self, start: datetime | None = None):
        self._now = start or datetime(2026, 1, 1, tzinfo=timezone.utc)

    def now(self) -> datetime:
        return self._now

    def set(self, value: datetime) -> None:
        self._now = value

    def advance(self, seconds: float = 0.0, **timedelta_kwargs) -> datetime:
        self._now = self._now + timedelta(seconds=seconds, **timedelta_kwargs)
        return self._now


def to_rfc3339(dt: datetime) -> str:
    """UTC RFC 3339 with fixed microsecond precision, so the string form
    sorts the same way the instants do."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    stamp = dt.astimezone(timezone.utc).isoformat(timespec="microseconds")
    return stamp.replace("+00:00", "Z")


def parse_rfc3339(value: str) -> datetime:
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)
