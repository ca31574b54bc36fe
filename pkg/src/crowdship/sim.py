"""Workload generator and latency auditor for a running service.

Drives synthetic senders and couriers against the public HTTP and
websocket interfaces only (never the store), so a run doubles as an
end-to-end conformance check. Per-endpoint latencies are compared to the
average-request-time budgets; couriers stream locations at the 4 s
cadence along a straight source-to-destination path.

The whole workload is derived up front from the RNG seed, so two runs
with the same seed generate identical inputs (the "workload" section of
the report is byte-diffable); only server-assigned values differ.
"""

from __future__ import annotations

import asyncio
import json
import logging
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Optional

import httpx
import websockets

log = logging.getLogger(__name__)

# Mean-latency budgets in seconds per exercised endpoint. Websocket
# publish latency is reported but carries no budget (not an HTTP request).
BUDGETS: dict[str, float] = {
    "registration": 0.7,
    "login": 0.5,
    "password_update": 0.2,
    "delivery_creation": 0.5,
    "tracking": 0.1,
    "history": 0.2,
    "courier_registration": 0.2,
    "closest_delivery": 0.6,
    "accept": 0.5,
    "state_change": 0.5,
    "routes": 0.7,
    "statistics": 0.1,
}

DEFAULT_BBOX = (48.10, 17.05, 48.20, 17.20)  # lat_min, lon_min, lat_max, lon_max
PUBLISH_CADENCE_S = 4.0
COURIER_TRIP_STEPS = 6  # frames per delivery; one trip = ~24 s of publishing

WEIGHT_CLASSES = ("light", "medium", "heavy")
VEHICLE_CLASSES = ("small", "medium", "large")


class SimError(Exception):
    pass


class ServiceUnreachable(SimError):
    pass


@dataclass
class Collector:
    latencies: dict[str, list[float]] = field(default_factory=dict)
    protocol_errors: list[dict] = field(default_factory=list)

    def record(self, label: str, seconds: float) -> None:
        self.latencies.setdefault(label, []).append(seconds)

    def protocol_error(self, label: str, status: int, detail: str) -> None:
        self.protocol_errors.append(
            {"endpoint": label, "status": status, "detail": detail[:300]}
        )


class Client:
    """Thin measured wrapper over httpx with per-call expected statuses."""

    def __init__(self, base_url: str, collector: Collector):
        self.base_url = base_url.rstrip("/")
        self.collector = collector
        self._http = httpx.AsyncClient(base_url=self.base_url, timeout=15.0)

    async def close(self) -> None:
        await self._http.aclose()

    async def call(
        self,
        label: Optional[str],
        method: str,
        path: str,
        expect: tuple[int, ...],
        **kwargs,
    ) -> httpx.Response:
        started = time.perf_counter()
        try:
            response = await self._http.request(method, path, **kwargs)
        except httpx.TransportError as exc:
            raise ServiceUnreachable(f"{method} {path}: {exc}") from exc
        elapsed = time.perf_counter() - started
        if label is not None:
            self.collector.record(label, elapsed)
        if response.status_code not in expect:
            self.collector.protocol_error(
                label or path, response.status_code, response.text
            )
        return response


# -- workload plans -----------------------------------------------------------


def _mk_person(rng: random.Random, prefix: str, i: int, seed: int) -> dict:
    tag = f"{seed:x}{rng.randrange(16**6):06x}"
    return {
        "email": f"{prefix}{i:03d}.{tag}@sim.crowdship.local",
        "password": f"pw-{tag}-{i:03d}",
        "first_name": f"{prefix.capitalize()}{i:03d}",
        "last_name": "Sim",
    }


def _mk_point(rng: random.Random, bbox) -> dict:
    lat_min, lon_min, lat_max, lon_max = bbox
    return {
        "lat": round(rng.uniform(lat_min, lat_max), 6),
        "lon": round(rng.uniform(lon_min, lon_max), 6),
    }


def _mk_delivery(rng: random.Random, bbox, sender_idx: int, seed: int, n: int) -> dict:
    src = _mk_point(rng, bbox)
    dst = _mk_point(rng, bbox)
    return {
        "sender_idx": sender_idx,
        "item": {
            "width_cm": round(rng.uniform(5, 80), 1),
            "height_cm": round(rng.uniform(5, 80), 1),
            "depth_cm": round(rng.uniform(5, 80), 1),
            "weight_class": rng.choice(WEIGHT_CLASSES),
            "fragile": rng.random() < 0.25,
            "description": f"sim parcel {n}",
        },
        "source": {"address_text": f"Source St {n}", **src},
        "destination": {"address_text": f"Destination Ave {n}", **dst},
        "receiver": {
            "name": f"Receiver {n} Sim",
            "email": f"receiver{n:04d}.{seed:x}@sim.crowdship.local",
        },
    }


def build_seed_plan(seed: int, senders: int, couriers: int, deliveries: int, bbox) -> dict:
    rng = random.Random(seed)
    plan = {
        "seed": seed,
        "senders": [_mk_person(rng, "sender", i, seed) for i in range(senders)],
        "couriers": [
            {**_mk_person(rng, "courier", i, seed),
             "vehicle_class": rng.choice(VEHICLE_CLASSES),
             "location": _mk_point(rng, bbox)}
            for i in range(couriers)
        ],
        "deliveries": [
            _mk_delivery(rng, bbox, i % max(senders, 1), seed, i)
            for i in range(deliveries)
        ],
    }
    return plan


def build_run_plan(
    seed: int, senders: int, couriers: int, rate_per_min: float, duration_s: float, bbox
) -> dict:
    rng = random.Random(seed)
    plan = build_seed_plan(seed, senders, couriers, deliveries=0, bbox=bbox)
    interval = 60.0 / rate_per_min if rate_per_min > 0 else float("inf")
    n, schedule = 0, []
    while n * interval < duration_s:
        schedule.append(
            {"at_s": round(n * interval, 3),
             **_mk_delivery(rng, bbox, n % max(senders, 1), seed, n)}
        )
        n += 1
    plan["deliveries"] = schedule
    plan["rate_per_min"] = rate_per_min
    plan["duration_s"] = duration_s
    return plan


# -- actors ---------------------------------------------------------------------


async def _register_and_login(client: Client, person: dict, label_prefix: str = "") -> Optional[str]:
    """Register + login one actor; returns the access token."""
    r = await client.call(
        "registration", "POST", "/api/accounts/", expect=(201, 409), json=person
    )
    if r.status_code not in (201, 409):
        return None
    basic = httpx.BasicAuth(person["email"], person["password"])
    r = await client.call("login", "GET", "/api/accounts/token/", expect=(200,), auth=basic)
    if r.status_code != 200:
        body = r.text
        if "account_inactive" in body:
            raise SimError(
                "login failed: account not verified. Run the service with "
                "auto_activate_accounts=true (CROWDSHIP_AUTO_ACTIVATE_ACCOUNTS=true) "
                "for simulation."
            )
        return None
    return r.json()["access_token"]


def _bearer(token: str) -> dict:
    return {"Authorization": f"Bearer {token}"}


async def run_seed(base_url: str, plan: dict) -> dict:
    collector = Collector()
    client = Client(base_url, collector)
    report: dict = {"workload": plan, "created": {"senders": [], "couriers": [], "deliveries": []},
                    "failures": []}
    try:
        sender_tokens: list[Optional[str]] = []
        for person in plan["senders"]:
            token = await _register_and_login(client, person)
            sender_tokens.append(token)
            if token:
                report["created"]["senders"].append(person["email"])
            else:
                report["failures"].append({"entity": "sender", "email": person["email"]})
        for courier in plan["couriers"]:
            token = await _register_and_login(client, courier)
            if token is None:
                report["failures"].append({"entity": "courier", "email": courier["email"]})
                continue
            r = await client.call(
                "courier_registration", "POST", "/api/couriers/", expect=(201, 409),
                json={"vehicle_class": courier["vehicle_class"]}, headers=_bearer(token),
            )
            if r.status_code in (201, 409):
                report["created"]["couriers"].append(courier["email"])
            else:
                report["failures"].append({"entity": "courier", "email": courier["email"]})
        for spec in plan["deliveries"]:
            token = sender_tokens[spec["sender_idx"]] if sender_tokens else None
            if token is None:
                report["failures"].append({"entity": "delivery", "n": spec["item"]["description"]})
                continue
            r = await client.call(
                "delivery_creation", "POST", "/api/deliveries/", expect=(201,),
                data={"payload": json.dumps({k: spec[k] for k in ("item", "source", "destination", "receiver")})},
                headers=_bearer(token),
            )
            if r.status_code == 201:
                report["created"]["deliveries"].append(r.json()["tracking_code"])
            else:
                report["failures"].append(
                    {"entity": "delivery", "detail": r.text[:200]}
                )
    finally:
        await client.close()
    report["protocol_errors"] = collector.protocol_errors
    return report


class _RunState:
    def __init__(self):
        self.created_codes: list[str] = []
        self.stop = False


async def _sender_setup(client: Client, plan: dict) -> list[tuple[dict, str]]:
    actors = []
    for person in plan["senders"]:
        token = await _register_and_login(client, person)
        if token is None:
            raise SimError(f"could not set up sender {person['email']}")
        # Exercise the password-update budget once per sender; re-setting
        # the same password keeps later logins working.
        await client.call(
            "password_update", "PATCH", "/api/accounts/me/", expect=(200,),
            json={"password": person["password"]}, headers=_bearer(token),
        )
        actors.append((person, token))
    return actors


async def _courier_setup(client: Client, plan: dict) -> list[dict]:
    actors = []
    for courier in plan["couriers"]:
        token = await _register_and_login(client, courier)
        if token is None:
            raise SimError(f"could not set up courier {courier['email']}")
        await client.call(
            "courier_registration", "POST", "/api/couriers/", expect=(201,),
            json={"vehicle_class": courier["vehicle_class"]}, headers=_bearer(token),
        )
        actors.append({"plan": courier, "token": token, "location": dict(courier["location"])})
    return actors


async def _creator_task(client: Client, plan: dict, senders, state: _RunState, started: float):
    for spec in plan["deliveries"]:
        delay = started + spec["at_s"] - time.perf_counter()
        if delay > 0:
            await asyncio.sleep(delay)
        if state.stop:
            return
        _, token = senders[spec["sender_idx"]]
        r = await client.call(
            "delivery_creation", "POST", "/api/deliveries/", expect=(201,),
            data={"payload": json.dumps({k: spec[k] for k in ("item", "source", "destination", "receiver")})},
            headers=_bearer(token),
        )
        if r.status_code == 201:
            state.created_codes.append(r.json()["tracking_code"])


async def _observer_task(client: Client, senders, state: _RunState, rng: random.Random):
    """Periodically polls the read-side endpoints so every budget row has
    samples: tracking, history, routes, statistics."""
    if not senders:
        return
    while not state.stop:
        await asyncio.sleep(2.0)
        if state.stop:
            return
        _, token = senders[rng.randrange(len(senders))]
        if state.created_codes:
            code = rng.choice(state.created_codes)
            await client.call(
                "tracking", "GET", f"/api/deliveries/{code}/", expect=(200,)
            )
        await client.call(
            "history", "GET", "/api/deliveries/", expect=(200,), headers=_bearer(token)
        )
        await client.call(
            "statistics", "GET", "/api/deliveries/statistics/", expect=(200,),
            headers=_bearer(token),
        )
        await client.call("routes", "GET", "/api/routes/", expect=(200,))


async def _courier_task(
    client: Client, actor: dict, state: _RunState, collector: Collector, ws_base: str
):
    token = actor["token"]
    while not state.stop:
        loc = actor["location"]
        r = await client.call(
            "closest_delivery", "GET", "/api/couriers/closest_delivery/",
            expect=(200,), params={"lat": loc["lat"], "lon": loc["lon"], "limit": 3},
            headers=_bearer(token),
        )
        if r.status_code != 200 or not r.json():
            await asyncio.sleep(1.5)
            continue
        candidate = r.json()[0]
        code = candidate["tracking_code"]
        r = await client.call(
            "accept", "POST", f"/api/deliveries/{code}/state/",
            expect=(200, 409), json={"state": "assigned"}, headers=_bearer(token),
        )
        if r.status_code != 200:
            continue  # lost the race; poll again
        await _deliver_one(client, actor, candidate, state, collector, ws_base)


async def _deliver_one(client, actor, delivery, state, collector, ws_base):
    """Publish a straight-line trip over the websocket, then complete."""
    token = actor["token"]
    code = delivery["tracking_code"]
    src, dst = delivery["source"], delivery["destination"]
    url = f"{ws_base}/ws/deliveries/{code}/?token={token}"
    try:
        async with websockets.connect(url, open_timeout=10) as ws:
            r = await client.call(
                "state_change", "POST", f"/api/deliveries/{code}/state/",
                expect=(200,), json={"state": "delivering"}, headers=_bearer(token),
            )
            if r.status_code != 200:
                return
            for step in range(COURIER_TRIP_STEPS + 1):
                if state.stop:
                    return
                k = step / COURIER_TRIP_STEPS
                lat = src["lat"] + (dst["lat"] - src["lat"]) * k
                lon = src["lon"] + (dst["lon"] - src["lon"]) * k
                started = time.perf_counter()
                await ws.send(json.dumps({"lat": lat, "lon": lon}))
                echo = json.loads(await asyncio.wait_for(ws.recv(), timeout=10))
                collector.record("ws_publish", time.perf_counter() - started)
                if "error" in echo:
                    collector.protocol_error("ws_publish", 0, json.dumps(echo))
                actor["location"] = {"lat": lat, "lon": lon}
                if step < COURIER_TRIP_STEPS:
                    await asyncio.sleep(PUBLISH_CADENCE_S)
    except (OSError, websockets.WebSocketException) as exc:
        collector.protocol_error("ws_publish", 0, str(exc))
        return
    await client.call(
        "state_change", "POST", f"/api/deliveries/{code}/state/",
        expect=(200,), json={"state": "delivered"}, headers=_bearer(token),
    )


async def _conservation(client: Client, senders, state: _RunState) -> dict:
    """Every delivery created by this run must appear in the senders'
    history in exactly one state: created = sum over states."""
    created = set(state.created_codes)
    counts: dict[str, int] = {}
    seen: set[str] = set()
    for _, token in senders:
        r = await client.call(None, "GET", "/api/deliveries/", expect=(200,),
                              headers=_bearer(token))
        if r.status_code != 200:
            continue
        for entry in r.json():
            code = entry["tracking_code"]
            if code not in created or code in seen:
                continue
            seen.add(code)
            counts[entry["state"]] = counts.get(entry["state"], 0) + 1
    return {
        "created": len(created),
        "by_state": counts,
        "accounted": sum(counts.values()),
        "holds": sum(counts.values()) == len(created),
    }


async def run_workload(base_url: str, plan: dict, slack: float = 1.0) -> dict:
    collector = Collector()
    client = Client(base_url, collector)
    ws_base = base_url.rstrip("/").replace("http://", "ws://").replace("https://", "ws://")
    state = _RunState()
    rng = random.Random(plan["seed"] ^ 0x5EED)
    try:
        senders = await _sender_setup(client, plan)
        couriers = await _courier_setup(client, plan)
        started = time.perf_counter()
        tasks = [
            asyncio.create_task(_creator_task(client, plan, senders, state, started)),
            asyncio.create_task(_observer_task(client, senders, state, rng)),
        ]
        tasks += [
            asyncio.create_task(_courier_task(client, actor, state, collector, ws_base))
            for actor in couriers
        ]
        await asyncio.sleep(plan["duration_s"])
        state.stop = True
        await asyncio.gather(*tasks, return_exceptions=True)
        conservation = await _conservation(client, senders, state)
    finally:
        await client.close()
    return build_report(plan, collector, conservation, slack)


def build_report(plan: dict, collector: Collector, conservation: dict, slack: float) -> dict:
    endpoints = {}
    all_pass = True
    for label, samples in sorted(collector.latencies.items()):
        budget = BUDGETS.get(label)
        mean = statistics.fmean(samples)
        row = {
            "count": len(samples),
            "mean_s": round(mean, 4),
            "median_s": round(statistics.median(samples), 4),
            "p95_s": round(_p95(samples), 4),
            "budget_s": budget,
        }
        if budget is not None:
            row["verdict"] = "PASS" if mean <= budget * slack else "FAIL"
            all_pass = all_pass and row["verdict"] == "PASS"
        endpoints[label] = row
    missing = [l for l in BUDGETS if l not in endpoints]
    ok = all_pass and not collector.protocol_errors and conservation.get("holds", True)
    return {
        "workload": plan,
        "slack": slack,
        "endpoints": endpoints,
        "budgets_not_exercised": missing,
        "protocol_errors": collector.protocol_errors,
        "conservation": conservation,
        "pass": ok,
    }


def _p95(samples: list[float]) -> float:
    ordered = sorted(samples)
    idx = max(0, int(round(0.95 * (len(ordered) - 1))))
    return ordered[idx]


def format_report(report: dict) -> str:
    lines = [
        f"{'endpoint':<22}{'n':>5}{'mean_s':>9}{'median_s':>10}{'p95_s':>8}{'budget':>8}  verdict"
    ]
    for label, row in report["endpoints"].items():
        budget = f"{row['budget_s']:.2f}" if row["budget_s"] is not None else "-"
        verdict = row.get("verdict", "-")
        lines.append(
            f"{label:<22}{row['count']:>5}{row['mean_s']:>9.4f}"
            f"{row['median_s']:>10.4f}{row['p95_s']:>8.4f}{budget:>8}  {verdict}"
        )
    cons = report.get("conservation")
    if cons:
        lines.append(
            f"conservation: created={cons['created']} accounted={cons['accounted']} "
            f"by_state={cons['by_state']} -> {'OK' if cons['holds'] else 'VIOLATED'}"
        )
    if report["protocol_errors"]:
        lines.append(f"protocol errors: {len(report['protocol_errors'])}")
        for err in report["protocol_errors"][:10]:
            lines.append(f"  {err['endpoint']}: status={err['status']} {err['detail'][:120]}")
    lines.append(f"overall: {'PASS' if report['pass'] else 'FAIL'}")
    return "\n".join(lines)
