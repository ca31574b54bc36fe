"""Service-level errors with stable machine codes.

The REST gateway maps these onto the JSON error envelope; the codes here
are the ones that appear on the wire.
"""

from __future__ import annotations

from typing import Optional


class ServiceError(Exception):
    code = "error"
    http_status = 500

    def __init__(self, message: str, fields: Optional[dict] = None, code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.fields = fields
        if code is not None:
            self.code = code


class ValidationFailed(ServiceError):
    code = "validation_error"
    http_status = 400

    def __init__(self, fields: dict, message: str = "invalid input"):
        super().__init__(message, fields=fields)


class Unauthenticated(ServiceError):
    code = "auth_required"
    http_status = 401


class Forbidden(ServiceError):
    code = "forbidden"
    http_status = 403


class NotFound(ServiceError):
    code = "not_found"
    http_status = 404


class Conflict(ServiceError):
    code = "conflict"
    http_status = 409
