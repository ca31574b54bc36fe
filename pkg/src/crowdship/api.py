"""HTTP facade: route table, wire formats, error envelope, auth, admin.

Every non-2xx response carries the JSON error envelope
{"error": {"code", "message", "fields"?}}. The only non-JSON request in
the whole interface is delivery creation, which is multipart form data so
a parcel picture can ride along. The OpenAPI document FastAPI generates
from these routes is the service's interface contract; the test suite
diffs it against the expected route table.
"""

from __future__ import annotations

import asyncio
import base64
import binascii
import json
import logging
import time
from contextlib import asynccontextmanager
from types import SimpleNamespace
from typing import Optional

from fastapi import Depends, FastAPI, File, Form, Request, UploadFile, WebSocket
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict
from starlette.exceptions import HTTPException as StarletteHTTPException
from starlette.websockets import WebSocketDisconnect

from .accounts import AccountService
from .auth import (
    Argon2Params,
    AuthError,
    ActionTokenError,
    InactiveAccount,
    PasswordHasher,
    TokenExpired,
    TokenService,
)
from .clock import Clock, SystemClock, parse_rfc3339, to_rfc3339
from .config import AppConfig
from .dispatch import DispatchService
from .domain import GeoPoint
from .errors import ServiceError, Unauthenticated, Forbidden, NotFound, ValidationFailed
from .fieldcrypto import FieldCipher
from .outbox import Outbox, transport_from_spec
from .realtime import Mode, RealtimeHub, _CLOSE
from .routesvc import RouteService
from .store import RecordStore, SqliteStore
from datetime import timedelta

log = logging.getLogger(__name__)
request_log = logging.getLogger("crowdship.request")

ADMIN_ENTITIES = {
    "accounts": "accounts",
    "persons": "persons",
    "couriers": "couriers",
    "deliveries": "deliveries",
    "routes": "route_points",
    "outbox": "outbox",
}

# Doc fields that never leave the service, regardless of caller.
_PROTECTED_FIELDS = {"password_hash"}
_ENCRYPTED_FIELD_SUFFIX = "_enc"


def envelope(code: str, message: str, fields: Optional[dict] = None) -> dict:
    err: dict = {"code": code, "message": message}
    if fields:
        err["fields"] = fields
    return {"error": err}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, fields: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.fields = fields


# -- request bodies ----------------------------------------------------------


class RegisterIn(BaseModel):
    email: str
    password: str
    first_name: str
    last_name: str
    phone: Optional[str] = None


class VerificationEmailIn(BaseModel):
    # Either shape: {"email": ...} re-sends the verification mail,
    # {"token": ...} consumes an emailed token and activates the account.
    email: Optional[str] = None
    token: Optional[str] = None


class RenewIn(BaseModel):
    renew_token: str


class PatchMeIn(BaseModel):
    model_config = ConfigDict(extra="forbid")
    first_name: Optional[str] = None
    last_name: Optional[str] = None
    phone: Optional[str] = None
    password: Optional[str] = None


class ResetIn(BaseModel):
    email: str


class ResetConfirmIn(BaseModel):
    token: str
    new_password: str


class CourierIn(BaseModel):
    vehicle_class: str


class CourierPatchIn(BaseModel):
    model_config = ConfigDict(extra="forbid")
    is_available: bool


class StateIn(BaseModel):
    state: str
    note: Optional[str] = None


# -- app factory ---------------------------------------------------------------


def build_services(config: AppConfig, clock: Optional[Clock] = None,
                   store: Optional[RecordStore] = None) -> SimpleNamespace:
    clock = clock or SystemClock()
    store = store or SqliteStore(config.db_path)
    cipher = FieldCipher(config.field_key)
    hasher = PasswordHasher(
        Argon2Params(
            time_cost=config.argon2_time_cost,
            memory_kib=config.argon2_memory_kib,
            parallelism=config.argon2_parallelism,
        )
    )
    tokens = TokenService(
        config.signing_key,
        store,
        clock,
        access_ttl=timedelta(minutes=config.access_ttl_minutes),
        renew_ttl=timedelta(days=config.renew_ttl_days),
        action_ttl=timedelta(hours=config.action_token_ttl_hours),
    )
    outbox = Outbox(store, clock, cipher, sender=config.email_from)
    accounts = AccountService(
        store,
        cipher,
        hasher,
        tokens,
        outbox,
        clock,
        public_base_url=config.public_base_url,
        auto_activate=config.auto_activate_accounts,
    )
    dispatch = DispatchService(
        store,
        cipher,
        outbox,
        clock,
        eta_speed_m_per_s=config.eta_speed_m_per_s,
        eta_handling_s=config.eta_handling_s,
        max_picture_bytes=config.max_picture_bytes,
    )
    routes = RouteService(store, clock)
    hub = RealtimeHub(store, routes, tokens, clock, staleness_seconds=config.staleness_seconds)
    transport = transport_from_spec(config.email_transport)
    return SimpleNamespace(
        config=config,
        clock=clock,
        store=store,
        cipher=cipher,
        hasher=hasher,
        tokens=tokens,
        outbox=outbox,
        accounts=accounts,
        dispatch=dispatch,
        routes=routes,
        hub=hub,
        transport=transport,
    )


def create_app(
    config: Optional[AppConfig] = None,
    clock: Optional[Clock] = None,
    store: Optional[RecordStore] = None,
) -> FastAPI:
    config = config or AppConfig()
    svc = build_services(config, clock=clock, store=store)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if config.admin_email and config.admin_password:
            svc.accounts.ensure_admin(config.admin_email, config.admin_password)
        tasks = [asyncio.create_task(_sweep_loop(svc))]
        if svc.transport is not None:
            tasks.append(asyncio.create_task(_drain_loop(svc)))
        try:
            yield
        finally:
            for t in tasks:
                t.cancel()
            for t in tasks:
                try:
                    await t
                except (asyncio.CancelledError, Exception):
                    pass
            svc.store.close()

    app = FastAPI(title="crowdship", version="0.1.0", lifespan=lifespan)
    app.state.services = svc
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.middleware("http")
    async def access_log(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        request_log.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "latency_ms": round(elapsed_ms, 2),
                }
            )
        )
        return response

    _register_error_handlers(app)
    _register_routes(app, svc)
    if config.console_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=config.console_dir, html=True))
    return app


async def _sweep_loop(svc) -> None:
    while True:
        await asyncio.sleep(svc.config.sweep_interval_seconds)
        try:
            for conn in svc.hub.staleness_sweep():
                if conn.transport_close is not None:
                    await conn.transport_close()
        except Exception:
            log.exception("staleness sweep failed")


async def _drain_loop(svc) -> None:
    while True:
        await asyncio.sleep(svc.config.outbox_drain_interval_seconds)
        try:
            await asyncio.to_thread(svc.outbox.drain, svc.transport)
        except Exception:
            log.exception("outbox drain failed")


# -- error handling -------------------------------------------------------------


_STATUS_CODES = {
    401: "auth_required",
    403: "forbidden",
    404: "not_found",
    405: "method_not_allowed",
    409: "conflict",
}


def _register_error_handlers(app: FastAPI) -> None:
    @app.exception_handler(ApiError)
    async def on_api_error(request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content=envelope(exc.code, exc.message, exc.fields)
        )

    @app.exception_handler(ServiceError)
    async def on_service_error(request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.http_status, content=envelope(exc.code, exc.message, exc.fields)
        )

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request, exc: StarletteHTTPException):
        code = _STATUS_CODES.get(exc.status_code, "error")
        return JSONResponse(
            status_code=exc.status_code, content=envelope(code, str(exc.detail))
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request, exc: RequestValidationError):
        fields = {}
        for err in exc.errors():
            loc = [str(part) for part in err["loc"] if part not in ("body", "query")]
            fields[".".join(loc) or "body"] = err["msg"]
        return JSONResponse(
            status_code=400, content=envelope("validation_error", "invalid input", fields)
        )


def _auth_error(exc: AuthError) -> ApiError:
    if isinstance(exc, TokenExpired):
        return ApiError(401, "token_expired", "access token expired")
    if isinstance(exc, InactiveAccount):
        return ApiError(403, "account_inactive", "account is not active")
    return ApiError(401, "token_invalid", str(exc) or "token rejected")


# -- routes -----------------------------------------------------------------------


def _register_routes(app: FastAPI, svc) -> None:
    def bearer_token(request: Request) -> Optional[str]:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return None

    def optional_account(request: Request) -> Optional[dict]:
        token = bearer_token(request)
        if token is None:
            return None
        try:
            claims = svc.tokens.verify_access(token)
        except AuthError as exc:
            raise _auth_error(exc)
        account = svc.store.get("accounts", claims.account_id)
        if account is None:
            raise ApiError(401, "token_invalid", "account no longer exists")
        return account

    def required_account(request: Request) -> dict:
        account = optional_account(request)
        if account is None:
            raise Unauthenticated("this route requires a Bearer access token")
        if not account["is_active"]:
            raise Forbidden("account is not active", code="account_inactive")
        return account

    def admin_account(request: Request) -> dict:
        account = required_account(request)
        if not account.get("is_admin"):
            raise Forbidden("administrator access required", code="forbidden")
        return account

    # -- accounts ------------------------------------------------------------

    @app.post("/api/accounts/", status_code=201)
    def register_account(body: RegisterIn):
        return svc.accounts.register(
            email=body.email,
            password=body.password,
            first_name=body.first_name,
            last_name=body.last_name,
            phone=body.phone,
        )

    @app.post("/api/accounts/verification_email/", status_code=202)
    def verification_email(body: VerificationEmailIn):
        if body.token:
            try:
                svc.accounts.verify_email(body.token)
            except ActionTokenError as exc:
                raise ApiError(400, "token_invalid", f"verification token {exc.reason}")
            return {"verified": True}
        if body.email:
            svc.accounts.resend_verification(body.email)
            return {"queued": True}
        raise ValidationFailed({"email": "either email or token is required"})

    @app.get("/api/accounts/token/")
    def login(request: Request):
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("basic "):
            raise ApiError(401, "auth_required", "send credentials in a Basic authorization header")
        try:
            decoded = base64.b64decode(header[6:].strip()).decode()
            email, _, password = decoded.partition(":")
        except (binascii.Error, UnicodeDecodeError):
            raise ApiError(401, "invalid_credentials", "malformed Basic credentials")
        pair = svc.accounts.login(email, password)
        return _token_body(pair)

    @app.post("/api/accounts/token/renew/")
    def renew_tokens(body: RenewIn):
        try:
            pair = svc.tokens.renew(body.renew_token)
        except AuthError:
            # Whatever the defect (expired, consumed, forged), the client
            # must log in again.
            raise ApiError(401, "token_invalid", "renew token rejected; log in again")
        return _token_body(pair)

    @app.get("/api/accounts/me/")
    def get_me(account=Depends(required_account)):
        return svc.accounts.describe(account["id"])

    @app.patch("/api/accounts/me/")
    def patch_me(body: PatchMeIn, account=Depends(required_account)):
        changes = body.model_dump(exclude_unset=True)
        return svc.accounts.update_profile(account["id"], changes)

    @app.post("/api/accounts/reset_password/", status_code=202)
    def reset_password(body: ResetIn):
        svc.accounts.request_password_reset(body.email)
        return {"queued": True}

    @app.post("/api/accounts/reset_password/confirm/")
    def reset_password_confirm(body: ResetConfirmIn):
        svc.accounts.confirm_password_reset(body.token, body.new_password)
        return {"updated": True}

    # -- deliveries ------------------------------------------------------------

    @app.get("/api/deliveries/statistics/")
    def statistics(months: int = 5, account=Depends(required_account)):
        return svc.dispatch.statistics(account["id"], months=months)

    @app.post("/api/deliveries/", status_code=201)
    def create_delivery(
        payload: str = Form(...),
        picture: Optional[UploadFile] = File(None),
        account=Depends(required_account),
    ):
        try:
            data = json.loads(payload)
        except json.JSONDecodeError:
            raise ValidationFailed({"payload": "must be a valid JSON document"})
        if not isinstance(data, dict):
            raise ValidationFailed({"payload": "must be a JSON object"})
        picture_tuple = None
        if picture is not None:
            raw = picture.file.read()
            picture_tuple = (picture.content_type or "", raw)
        delivery = svc.dispatch.create_delivery(
            sender_account_id=account["id"],
            item=data.get("item"),
            source=data.get("source"),
            destination=data.get("destination"),
            receiver=data.get("receiver"),
            picture=picture_tuple,
        )
        return svc.dispatch.describe(delivery, include_receiver=True)

    @app.get("/api/deliveries/")
    def delivery_history(direction: str = "sent", account=Depends(required_account)):
        return svc.dispatch.list_history(account["id"], direction=direction)

    @app.get("/api/deliveries/{code}/")
    def track_delivery(code: str, account=Depends(optional_account)):
        return svc.dispatch.tracking_view(code, account["id"] if account else None)

    @app.post("/api/deliveries/{code}/state/")
    def change_delivery_state(code: str, body: StateIn, account=Depends(required_account)):
        if body.state == "assigned":
            delivery = svc.dispatch.accept_delivery(account["id"], code)
        else:
            delivery = svc.dispatch.change_state(
                account["id"], code, body.state, note=body.note
            )
        return svc.dispatch.describe(delivery)

    # -- couriers ------------------------------------------------------------

    @app.post("/api/couriers/", status_code=201)
    def register_courier(body: CourierIn, account=Depends(required_account)):
        courier = svc.accounts.register_courier(account["id"], body.vehicle_class)
        return _courier_body(courier)

    @app.patch("/api/couriers/me/")
    def patch_courier(body: CourierPatchIn, account=Depends(required_account)):
        courier = svc.accounts.set_courier_availability(account["id"], body.is_available)
        return _courier_body(courier)

    @app.get("/api/couriers/closest_delivery/")
    def closest_delivery(
        lat: float, lon: float, limit: int = 10, account=Depends(required_account)
    ):
        try:
            origin = GeoPoint(lat, lon)
        except ValueError as exc:
            raise ValidationFailed({"lat/lon": str(exc)})
        return svc.dispatch.closest_deliveries(account["id"], origin, limit=limit)

    # -- routes ------------------------------------------------------------

    @app.get("/api/routes/")
    def query_routes(
        courier_id: Optional[str] = None,
        delivery: Optional[str] = None,
        time_from: Optional[str] = None,
        time_to: Optional[str] = None,
    ):
        def parse_ts(name: str, value: Optional[str]):
            if value is None:
                return None
            try:
                return parse_rfc3339(value)
            except ValueError:
                raise ValidationFailed({name: "must be an RFC 3339 timestamp"})

        return svc.routes.query(
            courier_id=courier_id,
            tracking_code=delivery,
            t_from=parse_ts("time_from", time_from),
            t_to=parse_ts("time_to", time_to),
        )

    # -- admin ------------------------------------------------------------

    @app.get("/api/admin/{entity}/")
    def admin_list(entity: str, account=Depends(admin_account)):
        kind = _admin_kind(entity)
        return [_admin_decode(svc, kind, doc) for doc in svc.store.list(kind)]

    @app.post("/api/admin/{entity}/", status_code=201)
    async def admin_create(entity: str, request: Request, account=Depends(admin_account)):
        kind = _admin_kind(entity)
        doc = _admin_encode(svc, kind, await _json_body(request), base=None)
        entity_id = svc.store.put(kind, doc)
        return _admin_decode(svc, kind, svc.store.get(kind, entity_id))

    @app.get("/api/admin/{entity}/{item_id}/")
    def admin_get(entity: str, item_id: str, account=Depends(admin_account)):
        kind = _admin_kind(entity)
        doc = svc.store.get(kind, item_id)
        if doc is None:
            raise NotFound(f"no {entity} with id {item_id}")
        return _admin_decode(svc, kind, doc)

    @app.patch("/api/admin/{entity}/{item_id}/")
    async def admin_patch(entity: str, item_id: str, request: Request, account=Depends(admin_account)):
        kind = _admin_kind(entity)
        doc = svc.store.get(kind, item_id)
        if doc is None:
            raise NotFound(f"no {entity} with id {item_id}")
        merged = _admin_encode(svc, kind, await _json_body(request), base=doc)
        svc.store.put(kind, merged, entity_id=item_id)
        return _admin_decode(svc, kind, svc.store.get(kind, item_id))

    @app.delete("/api/admin/{entity}/{item_id}/")
    def admin_delete(entity: str, item_id: str, account=Depends(admin_account)):
        kind = _admin_kind(entity)
        if not svc.store.delete(kind, item_id):
            raise NotFound(f"no {entity} with id {item_id}")
        return {"deleted": True}

    # -- websockets ------------------------------------------------------------

    @app.websocket("/ws/deliveries/{code}/")
    async def ws_delivery(websocket: WebSocket, code: str):
        token = websocket.query_params.get("token")
        if token is None:
            header = websocket.headers.get("authorization", "")
            if header.lower().startswith("bearer "):
                token = header[7:].strip()
        await websocket.accept()
        try:
            conn = svc.hub.open_delivery_channel(code, token)
        except NotFound:
            await websocket.send_text(json.dumps(envelope("unknown_delivery", "no such delivery")))
            await websocket.close(code=4404)
            return
        if conn.mode == Mode.PUBLISHER:
            await _run_publisher(websocket, conn, svc)
        else:
            await _run_subscriber(websocket, conn, svc)

    @app.websocket("/ws/couriers/")
    async def ws_global(websocket: WebSocket):
        await websocket.accept()
        conn = svc.hub.open_global_channel()
        await _run_subscriber(websocket, conn, svc)


def _token_body(pair) -> dict:
    return {
        "access_token": pair.access_token,
        "renew_token": pair.renew_token,
        "access_expires_at": to_rfc3339(pair.access_expires_at),
        "renew_expires_at": to_rfc3339(pair.renew_expires_at),
        "token_type": "Bearer",
    }


def _courier_body(courier: dict) -> dict:
    return {
        "courier_id": courier["id"],
        "vehicle_class": courier["vehicle_class"],
        "registered_on": courier["registered_on"],
        "is_available": courier["is_available"],
    }


async def _json_body(request: Request) -> dict:
    try:
        data = json.loads(await request.body() or b"{}")
    except json.JSONDecodeError:
        raise ValidationFailed({"body": "must be valid JSON"})
    if not isinstance(data, dict):
        raise ValidationFailed({"body": "must be a JSON object"})
    return data


def _admin_kind(entity: str) -> str:
    kind = ADMIN_ENTITIES.get(entity)
    if kind is None:
        raise NotFound(f"unknown admin entity {entity!r}")
    return kind


# Plaintext admin aliases for encrypted doc fields, per store kind. Values
# are (encrypted field, is_json) pairs.
_ADMIN_CRYPTO_FIELDS = {
    "accounts": {"email": ("email_enc", False)},
    "persons": {
        "first_name": ("first_name_enc", False),
        "last_name": ("last_name_enc", False),
        "email": ("email_enc", False),
        "phone": ("phone_enc", False),
    },
    "outbox": {
        "recipient": ("recipient_enc", False),
        "payload": ("payload_enc", True),
    },
}


def _admin_decode(svc, kind: str, doc: dict) -> dict:
    """Admin display form: encrypted fields decrypted, secrets dropped."""
    out = {}
    crypto = _ADMIN_CRYPTO_FIELDS.get(kind, {})
    reverse = {enc: (plain, is_json) for plain, (enc, is_json) in crypto.items()}
    for key, value in doc.items():
        if key in _PROTECTED_FIELDS or key == "email_bidx":
            continue
        if key in reverse:
            plain_key, is_json = reverse[key]
            if value is None:
                out[plain_key] = None
            else:
                text = svc.cipher.decrypt_str(value)
                out[plain_key] = json.loads(text) if is_json else text
        else:
            out[key] = value
    return out


def _admin_encode(svc, kind: str, changes: dict, base: Optional[dict]) -> dict:
    """Merge admin-supplied plaintext changes into the stored doc form."""
    crypto = _ADMIN_CRYPTO_FIELDS.get(kind, {})
    doc = dict(base) if base else {}
    for key, value in changes.items():
        if key in _PROTECTED_FIELDS or key.endswith(_ENCRYPTED_FIELD_SUFFIX) or key == "email_bidx":
            raise ValidationFailed({key: "cannot be set directly"})
        if key == "id":
            continue
        if key in crypto:
            enc_key, is_json = crypto[key]
            if value is None:
                doc[enc_key] = None
            else:
                text = json.dumps(value) if is_json else value
                doc[enc_key] = svc.cipher.encrypt_str(text)
            if key == "email" and value is not None:
                doc["email_bidx"] = svc.cipher.blind_index(value)
        else:
            doc[key] = value
    return doc


# -- websocket pumps ---------------------------------------------------------


def _make_closer(websocket: WebSocket, code: int):
    async def closer():
        try:
            await websocket.close(code=code)
        except RuntimeError:
            pass  # already closed

    return closer


async def _run_publisher(websocket: WebSocket, conn, svc) -> None:
    from .realtime import PublishRejected

    conn.transport_close = _make_closer(websocket, 4408)
    try:
        while True:
            text = await websocket.receive_text()
            try:
                frame = json.loads(text)
                lat, lon = frame["lat"], frame["lon"]
            except (json.JSONDecodeError, TypeError, KeyError):
                await websocket.send_text(json.dumps(envelope("invalid_frame", "expected {\"lat\", \"lon\"}")))
                continue
            try:
                message = svc.hub.publish(conn, lat, lon)
            except PublishRejected as exc:
                await websocket.send_text(json.dumps(envelope(exc.code, "publish rejected")))
                continue
            # Echo the enriched frame back so the publisher sees the
            # courier id the server attached.
            await websocket.send_text(json.dumps(message))
    except WebSocketDisconnect:
        pass
    finally:
        svc.hub.close(conn)


async def _run_subscriber(websocket: WebSocket, conn, svc) -> None:
    async def pump():
        while True:
            item = await conn.queue.get()
            if item is _CLOSE:
                try:
                    await websocket.close(code=conn.close_code)
                except RuntimeError:
                    pass
                return
            await websocket.send_text(json.dumps(item))

    writer = asyncio.create_task(pump())
    try:
        while True:
            await websocket.receive_text()
            # Subscribers may not publish; tell them so but keep the
            # connection open for broadcasts.
            conn.enqueue(envelope("not_publisher", "this connection is read-only"))
    except WebSocketDisconnect:
        pass
    finally:
        svc.hub.close(conn)
        conn.enqueue_close()
        try:
            await asyncio.wait_for(writer, timeout=2.0)
        except (asyncio.TimeoutError, Exception):
            writer.cancel()
