import socket
import threading
import time

import pytest
import uvicorn

from crowdship.api import build_services, create_app
from crowdship.clock import ManualClock
from crowdship.config import AppConfig


def fast_config(**overrides) -> AppConfig:
    """Test config: in-memory store, weak (fast) Argon2 parameters."""
    defaults = dict(
        db_path=":memory:",
        signing_key="test-signing-key",
        field_key="test-field-key",
        argon2_time_cost=1,
        argon2_memory_kib=8,
        argon2_parallelism=1,
        auto_activate_accounts=True,
    )
    defaults.update(overrides)
    return AppConfig(**defaults)


@pytest.fixture
def clock():
    return ManualClock()


@pytest.fixture
def svc(clock):
    services = build_services(fast_config(), clock=clock)
    yield services
    services.store.close()


@pytest.fixture
def app(clock):
    return create_app(fast_config(), clock=clock)


@pytest.fixture
def client(app):
    from fastapi.testclient import TestClient

    with TestClient(app) as c:
        yield c


class LiveServer:
    """Real uvicorn server on an ephemeral loopback port, in a thread.

    The app object stays reachable in-process, so tests can still poke
    app.state.services while talking real HTTP/websockets to it.
    """

    def __init__(self, app):
        self.app = app
        self._server = None
        self._thread = None
        self.port = None

    def __enter__(self):
        config = uvicorn.Config(
            self.app, host="127.0.0.1", port=0, log_level="warning", lifespan="on"
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._thread.start()
        deadline = time.time() + 10
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("uvicorn did not start in time")
            time.sleep(0.01)
        self.port = self._server.servers[0].sockets[0].getsockname()[1]
        return self

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=10)

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    @property
    def ws_url(self) -> str:
        return f"ws://127.0.0.1:{self.port}"


@pytest.fixture
def live_server():
    app = create_app(fast_config())
    with LiveServer(app) as server:
        yield server


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def make_services(clock=None, **config_overrides):
    return build_services(fast_config(**config_overrides), clock=clock or ManualClock())


# -- common fixture helpers ----------------------------------------------------


def register_user(svc, email, first="Test", last="User", password="password123"):
    return svc.accounts.register(email, password, first, last)


def make_delivery_payload(src=(48.1486, 17.1077), dst=(48.1550, 17.1650), receiver_email="rcv@example.org"):
    return dict(
        item={"width_cm": 30, "height_cm": 20, "depth_cm": 10, "weight_class": "medium", "fragile": False},
        source={"address_text": "Obchodna 1", "lat": src[0], "lon": src[1]},
        destination={"address_text": "Mlynska 7", "lat": dst[0], "lon": dst[1]},
        receiver={"name": "Rado Receiver", "email": receiver_email},
    )
