"""Upload, review, sign, download workflow with persistent state."""
from .store import (
    PENDING,
    REVIEWED_APPROVED,
    REVIEWED_REJECTED,
    SIGNED,
    AuditEntry,
    SigningKey,
    SigningService,
    SubmissionRecord,
    load_service_config,
)
from .app import create_app

__all__ = [
    "PENDING",
    "REVIEWED_APPROVED",
    "REVIEWED_REJECTED",
    "SIGNED",
    "AuditEntry",
    "SigningKey",
    "SigningService",
    "SubmissionRecord",
    "load_service_config",
    "create_app",
]
