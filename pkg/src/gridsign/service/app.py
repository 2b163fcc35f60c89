"""HTTP layer over SigningService.

Thin translation only: Base64 firmware in JSON bodies, toolkit errors
to status codes, a static two-token auth scheme (uploader and admin
roles via the X-Auth-Token header).  TLS termination is left to a
fronting proxy.
"""
from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI, Header, HTTPException, Response
from pydantic import BaseModel

from ..errors import (
    InvalidState,
    NotFound,
    PayloadTooLarge,
    PreconditionViolated,
    StorageFailure,
    ToolkitError,
    UnknownKeyRef,
)
from .store import SigningService, SubmissionRecord

__all__ = ["create_app"]


class SubmitRequest(BaseModel):
    firmware_b64: str
    version: str
    product: str


class SignRequest(BaseModel):
    key_ref: str = "default"


class AuditEntryModel(BaseModel):
    actor: str
    action: str
    timestamp: int


class ReviewModel(BaseModel):
    verdict: str
    checks: list[list[str]]


class RecordResponse(BaseModel):
    id: str
    digest: str
    size: int
    version: str
    product: str
    state: str
    review: ReviewModel | None
    package_available: bool
    created: int
    audit: list[AuditEntryModel]


def _as_response(record: SubmissionRecord) -> RecordResponse:
    return RecordResponse(**record.to_dict())


def _http_error(exc: ToolkitError) -> HTTPException:
    if isinstance(exc, NotFound):
        return HTTPException(404, str(exc))
    if isinstance(exc, InvalidState):
        return HTTPException(409, str(exc))
    if isinstance(exc, PayloadTooLarge):
        return HTTPException(413, str(exc))
    if isinstance(exc, (UnknownKeyRef, PreconditionViolated)):
        return HTTPException(400, str(exc))
    if isinstance(exc, StorageFailure):
        return HTTPException(500, "storage failure")
    return HTTPException(500, "internal error")


def create_app(service: SigningService, uploader_token: str, admin_token: str) -> FastAPI:
    if not uploader_token or not admin_token or uploader_token == admin_token:
        raise ValueError("uploader and admin tokens must be non-empty and distinct")

    app = FastAPI(title="firmware signing service", version="0.1.0")

    def require(token: str | None, *roles: str) -> str:
        if token == admin_token:
            role = "admin"
        elif token == uploader_token:
            role = "uploader"
        else:
            raise HTTPException(401, "missing or invalid X-Auth-Token")
        # Admin may do anything an uploader may.
        if role not in roles and role != "admin":
            raise HTTPException(403, f"role {role} may not perform this action")
        return role

    @app.post("/firmware", status_code=201, response_model=RecordResponse)
    def submit(body: SubmitRequest, x_auth_token: str | None = Header(None)):
        actor = require(x_auth_token, "uploader")
        try:
            firmware = base64.b64decode(body.firmware_b64, validate=True)
        except binascii.Error:
            raise HTTPException(400, "firmware_b64 is not valid Base64") from None
        try:
            record = service.submit(firmware, body.version, body.product, actor=actor)
        except ToolkitError as exc:
            raise _http_error(exc) from exc
        return _as_response(record)

    @app.get("/firmware/{submission_id}", response_model=RecordResponse)
    def get_record(submission_id: str, x_auth_token: str | None = Header(None)):
        require(x_auth_token, "uploader")
        try:
            return _as_response(service.get(submission_id))
        except ToolkitError as exc:
            raise _http_error(exc) from exc

    @app.post("/firmware/{submission_id}/review", response_model=RecordResponse)
    def review(submission_id: str, x_auth_token: str | None = Header(None)):
        actor = require(x_auth_token, "admin")
        try:
            return _as_response(service.review(submission_id, actor=actor))
        except ToolkitError as exc:
            raise _http_error(exc) from exc

    @app.post("/firmware/{submission_id}/sign", response_model=RecordResponse)
    def sign(
        submission_id: str,
        body: SignRequest | None = None,
        x_auth_token: str | None = Header(None),
    ):
        actor = require(x_auth_token, "admin")
        key_ref = body.key_ref if body is not None else "default"
        try:
            return _as_response(
                service.sign_submission(submission_id, key_ref=key_ref, actor=actor)
            )
        except ToolkitError as exc:
            raise _http_error(exc) from exc

    @app.get("/firmware/{submission_id}/package")
    def download(submission_id: str, x_auth_token: str | None = Header(None)):
        actor = require(x_auth_token, "uploader")
        try:
            blob = service.download(submission_id, actor=actor)
        except ToolkitError as exc:
            raise _http_error(exc) from exc
        return Response(content=blob, media_type="application/octet-stream")

    return app
