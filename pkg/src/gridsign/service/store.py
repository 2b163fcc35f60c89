"""Persistent submission store and the signing workflow state machine.

One directory per submission holds the firmware, an atomically
replaced record file, the append-only audit log, and the signed
package once it exists.  State lives on disk only, so a process
restart loses nothing; records are re-read on each access.

Allowed transitions: pending -> reviewed_approved | reviewed_rejected,
reviewed_approved -> signed.  Nothing else.
"""
from __future__ import annotations

import json
import os
import re
import secrets
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from ..certs import CertificateChain, load_certificate
from ..crypto import ECDSA_P256_SHA256, KeyPair, SigningAlgorithm, load_private_key_pem
from ..errors import (
    InvalidState,
    NotFound,
    PayloadTooLarge,
    PreconditionViolated,
    StorageFailure,
    UnknownKeyRef,
)
from ..packager import FirmwarePackage, package_firmware
from ..review import ReviewPolicy, ReviewReport, compare_versions, load_policy, run_review

__all__ = [
    "PENDING",
    "REVIEWED_APPROVED",
    "REVIEWED_REJECTED",
    "SIGNED",
    "AuditEntry",
    "SigningKey",
    "SubmissionRecord",
    "SigningService",
    "load_service_config",
]

PENDING = "pending"
REVIEWED_APPROVED = "reviewed_approved"
REVIEWED_REJECTED = "reviewed_rejected"
SIGNED = "signed"

DEFAULT_MAX_FIRMWARE_BYTES = 64 * 1024 * 1024

_PRODUCT_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$")
_ID_RE = re.compile(r"^[0-9a-f]{16}$")

_RECORD_FILE = "record.json"
_FIRMWARE_FILE = "firmware.bin"
_PACKAGE_FILE = "package.cose"
_AUDIT_FILE = "audit.log"
_PRODUCTS_DIR = "_products"


@dataclass(frozen=True)
class AuditEntry:
    actor: str
    action: str
    timestamp: int


@dataclass(frozen=True)
class SigningKey:
    """A configured signing identity: key pair plus its chain."""

    ref: str
    key: KeyPair
    chain: CertificateChain
    alg: SigningAlgorithm = ECDSA_P256_SHA256


@dataclass(frozen=True)
class SubmissionRecord:
    id: str
    digest: str
    size: int
    version: str
    product: str
    state: str
    review: ReviewReport | None
    package_path: Path | None
    created: int
    audit: tuple[AuditEntry, ...] = ()

    def to_dict(self) -> dict:
        review = None
        if self.review is not None:
            review = {
                "verdict": self.review.verdict,
                "checks": [list(check) for check in self.review.checks],
            }
        return {
            "id": self.id,
            "digest": self.digest,
            "size": self.size,
            "version": self.version,
            "product": self.product,
            "state": self.state,
            "review": review,
            "package_available": self.package_path is not None,
            "created": self.created,
            "audit": [
                {"actor": e.actor, "action": e.action, "timestamp": e.timestamp}
                for e in self.audit
            ],
        }


def _write_json_atomic(path: Path, obj: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


class SigningService:
    """Core workflow operations over a store directory.

    Safe for concurrent use: per-submission actions serialize on a
    submission lock, product history updates on a product lock.
    """

    def __init__(
        self,
        root: str | Path,
        keys: dict[str, SigningKey],
        policy: ReviewPolicy | None = None,
        max_firmware_bytes: int = DEFAULT_MAX_FIRMWARE_BYTES,
        clock: Callable[[], float] = time.time,
    ):
        self.root = Path(root)
        self.keys = dict(keys)
        self.policy = policy if policy is not None else ReviewPolicy()
        self.max_firmware_bytes = max_firmware_bytes
        self.clock = clock
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / _PRODUCTS_DIR).mkdir(exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # --- locking ------------------------------------------------------------

    def _lock(self, name: str) -> threading.Lock:
        with self._locks_guard:
            if name not in self._locks:
                self._locks[name] = threading.Lock()
            return self._locks[name]

    # --- record persistence -------------------------------------------------

    def _dir(self, submission_id: str) -> Path:
        if not _ID_RE.match(submission_id):
            raise NotFound(f"no submission {submission_id!r}")
        return self.root / submission_id

    def _load(self, submission_id: str) -> SubmissionRecord:
        record_path = self._dir(submission_id) / _RECORD_FILE
        try:
            raw = json.loads(record_path.read_text())
        except FileNotFoundError:
            raise NotFound(f"no submission {submission_id!r}") from None
        review = None
        if raw["review"] is not None:
            review = ReviewReport(
                checks=tuple(tuple(check) for check in raw["review"]["checks"]),
                verdict=raw["review"]["verdict"],
            )
        package_path = None
        if raw["state"] == SIGNED:
            package_path = self._dir(submission_id) / _PACKAGE_FILE
        return SubmissionRecord(
            id=raw["id"],
            digest=raw["digest"],
            size=raw["size"],
            version=raw["version"],
            product=raw["product"],
            state=raw["state"],
            review=review,
            package_path=package_path,
            created=raw["created"],
            audit=self._read_audit(submission_id),
        )

    def _store(self, record: SubmissionRecord) -> None:
        raw = {
            "id": record.id,
            "digest": record.digest,
            "size": record.size,
            "version": record.version,
            "product": record.product,
            "state": record.state,
            "review": None
            if record.review is None
            else {
                "verdict": record.review.verdict,
                "checks": [list(check) for check in record.review.checks],
            },
            "created": record.created,
        }
        _write_json_atomic(self._dir(record.id) / _RECORD_FILE, raw)

    def _read_audit(self, submission_id: str) -> tuple[AuditEntry, ...]:
        path = self._dir(submission_id) / _AUDIT_FILE
        if not path.exists():
            return ()
        entries = []
        for line in path.read_text().splitlines():
            raw = json.loads(line)
            entries.append(AuditEntry(raw["actor"], raw["action"], raw["timestamp"]))
        return tuple(entries)

    def _append_audit(self, submission_id: str, actor: str, action: str) -> None:
        entry = {"actor": actor, "action": action, "timestamp": int(self.clock())}
        with open(self._dir(submission_id) / _AUDIT_FILE, "a") as handle:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")

    # --- product history ----------------------------------------------------

    def _product_file(self, product: str) -> Path:
        return self.root / _PRODUCTS_DIR / f"{product}.json"

    def last_signed_version(self, product: str) -> str | None:
        try:
            return json.loads(self._product_file(product).read_text())["version"]
        except FileNotFoundError:
            return None

    def _record_signed_version(self, product: str, version: str) -> None:
        with self._lock(f"product:{product}"):
            current = self.last_signed_version(product)
            if current is None or compare_versions(version, current) > 0:
                _write_json_atomic(self._product_file(product), {"version": version})

    # --- operations ---------------------------------------------------------

    def submit(
        self, firmware: bytes, version: str, product: str, actor: str = "uploader"
    ) -> SubmissionRecord:
        if not firmware:
            raise PreconditionViolated("firmware must be non-empty")
        if len(firmware) > self.max_firmware_bytes:
            raise PayloadTooLarge(
                f"{len(firmware)} bytes exceeds the {self.max_firmware_bytes} byte cap"
            )
        if not version:
            raise PreconditionViolated("version must be non-empty")
        if not _PRODUCT_RE.match(product):
            raise PreconditionViolated(f"invalid product name {product!r}")
        package = FirmwarePackage.build(firmware, version)
        while True:
            submission_id = secrets.token_hex(8)
            directory = self.root / submission_id
            try:
                directory.mkdir()
                break
            except FileExistsError:
                continue
        try:
            (directory / _FIRMWARE_FILE).write_bytes(firmware)
            record = SubmissionRecord(
                id=submission_id,
                digest=package.digest.hex(),
                size=len(firmware),
                version=version,
                product=product,
                state=PENDING,
                review=None,
                package_path=None,
                created=int(self.clock()),
            )
            self._store(record)
            self._append_audit(submission_id, actor, "submit")
        except OSError as exc:
            raise StorageFailure(f"cannot persist submission: {exc}") from exc
        return self._load(submission_id)

    def get(self, submission_id: str) -> SubmissionRecord:
        return self._load(submission_id)

    def list_submissions(self) -> list[SubmissionRecord]:
        records = []
        for path in sorted(self.root.iterdir()):
            if path.name.startswith("_") or not (path / _RECORD_FILE).exists():
                continue
            records.append(self._load(path.name))
        return records

    def review(
        self, submission_id: str, policy: ReviewPolicy | None = None, actor: str = "admin"
    ) -> SubmissionRecord:
        with self._lock(f"submission:{submission_id}"):
            record = self._load(submission_id)
            if record.state != PENDING:
                raise InvalidState(f"cannot review a submission in state {record.state}")
            firmware = (self._dir(submission_id) / _FIRMWARE_FILE).read_bytes()
            report = run_review(
                firmware,
                record.version,
                policy if policy is not None else self.policy,
                history=self.last_signed_version(record.product),
            )
            state = REVIEWED_APPROVED if report.approved else REVIEWED_REJECTED
            self._store(
                SubmissionRecord(
                    id=record.id,
                    digest=record.digest,
                    size=record.size,
                    version=record.version,
                    product=record.product,
                    state=state,
                    review=report,
                    package_path=None,
                    created=record.created,
                )
            )
            self._append_audit(submission_id, actor, f"review:{state}")
            return self._load(submission_id)

    def sign_submission(
        self,
        submission_id: str,
        key_ref: str = "default",
        alg: SigningAlgorithm | None = None,
        actor: str = "admin",
        now: int | None = None,
    ) -> SubmissionRecord:
        with self._lock(f"submission:{submission_id}"):
            record = self._load(submission_id)
            if record.state != REVIEWED_APPROVED:
                raise InvalidState(
                    f"cannot sign a submission in state {record.state}; approval required"
                )
            try:
                signer = self.keys[key_ref]
            except KeyError:
                raise UnknownKeyRef(f"no signing key configured under {key_ref!r}") from None
            firmware = (self._dir(submission_id) / _FIRMWARE_FILE).read_bytes()
            package = FirmwarePackage.build(firmware, record.version)
            if package.digest.hex() != record.digest:
                raise StorageFailure("stored firmware no longer matches its recorded digest")
            blob = package_firmware(
                package,
                signer.key,
                signer.chain,
                alg if alg is not None else signer.alg,
                int(self.clock()) if now is None else now,
            )
            directory = self._dir(submission_id)
            tmp = directory / (_PACKAGE_FILE + ".tmp")
            tmp.write_bytes(blob)
            os.replace(tmp, directory / _PACKAGE_FILE)
            self._store(
                SubmissionRecord(
                    id=record.id,
                    digest=record.digest,
                    size=record.size,
                    version=record.version,
                    product=record.product,
                    state=SIGNED,
                    review=record.review,
                    package_path=directory / _PACKAGE_FILE,
                    created=record.created,
                )
            )
            self._append_audit(submission_id, actor, "sign")
            self._record_signed_version(record.product, record.version)
            return self._load(submission_id)

    def download(self, submission_id: str, actor: str = "uploader") -> bytes:
        with self._lock(f"submission:{submission_id}"):
            record = self._load(submission_id)
            if record.state != SIGNED:
                raise InvalidState(f"no package for a submission in state {record.state}")
            blob = record.package_path.read_bytes()
            self._append_audit(submission_id, actor, "download")
            return blob


def load_service_config(path: str | Path) -> dict:
    """Read service assembly configuration from a JSON file.

    Schema: root (store directory), keys (map of ref -> {key_pem,
    chain: [cert files, leaf first]}), policy (optional path to a
    review policy file), uploader_token, admin_token, listen host and
    port, max_firmware_bytes.  Relative paths resolve against the
    config file's directory.
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    keys = {}
    for ref, entry in raw.get("keys", {}).items():
        pair = load_private_key_pem(resolve(entry["key_pem"]).read_bytes())
        chain = CertificateChain(
            tuple(load_certificate(resolve(c)) for c in entry["chain"])
        )
        keys[ref] = SigningKey(ref=ref, key=pair, chain=chain)
    policy = ReviewPolicy()
    if raw.get("policy"):
        policy = load_policy(resolve(raw["policy"]))
    return {
        "root": resolve(raw.get("root", "store")),
        "keys": keys,
        "policy": policy,
        "uploader_token": raw.get("uploader_token", ""),
        "admin_token": raw.get("admin_token", ""),
        "host": raw.get("host", "127.0.0.1"),
        "port": int(raw.get("port", 8442)),
        "max_firmware_bytes": int(
            raw.get("max_firmware_bytes", DEFAULT_MAX_FIRMWARE_BYTES)
        ),
    }
