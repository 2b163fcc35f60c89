"""Device-side verification of a signed firmware packet.

verify_update walks a fixed sequence of checks over the received bytes
and a pre-stored trust directory; every input, including hostile ones,
produces a report rather than an exception.  The flow is strictly
sequential with one fallback edge: when the chain does not anchor at
the pre-stored issuer, the default certificate set is consulted before
giving up.  No step performs network access; the function depends only
on its arguments.
"""
from __future__ import annotations

import json
import os
import secrets
import shutil
from dataclasses import dataclass
from pathlib import Path

from .certs import (
    AnchorResult,
    TrustStore,
    anchor_check,
    validate_chain,
)
from .envelope import decode_message, verify_signature
from .errors import (
    EmptyChain,
    MalformedCertificate,
    MissingX5Chain,
    PreconditionViolated,
    SignatureInvalid,
    StorageFailure,
    UntrustedIssuer,
)
from .packager import FirmwarePackage, decode_payload

__all__ = [
    "VerificationReport",
    "verify_update",
    "store_payload",
    "format_report",
    "STEP_DECODE",
    "STEP_X5CHAIN",
    "STEP_CHAIN_VALIDATE",
    "STEP_ANCHOR_PRIMARY",
    "STEP_ANCHOR_DEFAULT",
    "STEP_SIGNATURE",
    "STEP_PAYLOAD_DIGEST",
]

STEP_DECODE = "decode"
STEP_X5CHAIN = "x5chain-extract"
STEP_CHAIN_VALIDATE = "chain-validate"
STEP_ANCHOR_PRIMARY = "anchor-primary"
STEP_ANCHOR_DEFAULT = "anchor-default"
STEP_SIGNATURE = "signature-verify"
STEP_PAYLOAD_DIGEST = "payload-digest"


@dataclass(frozen=True)
class VerificationReport:
    """Ordered step results plus the final outcome.

    steps holds (step-name, passed) pairs for exactly the steps that
    ran.  A rejected report has one failing step, always last.  An
    accepted report may contain ("anchor-primary", False) when trust
    came from the default set; that is the fallback edge, not an error.
    """

    steps: tuple[tuple[str, bool], ...]
    accepted: bool
    reason: str | None
    anchored_by: AnchorResult
    package: FirmwarePackage | None
    timestamp: int | None

    @property
    def outcome(self) -> str:
        return "Accepted" if self.accepted else "Rejected"


def verify_update(packet: bytes, trust: TrustStore, now: int) -> VerificationReport:
    """Run the verification sequence; errors come back in the report."""
    steps: list[tuple[str, bool]] = []
    anchored = AnchorResult.NONE
    timestamp: int | None = None

    def reject(step: str, reason: BaseException | str) -> VerificationReport:
        steps.append((step, False))
        name = reason if isinstance(reason, str) else type(reason).__name__
        return VerificationReport(
            steps=tuple(steps),
            accepted=False,
            reason=name,
            anchored_by=anchored,
            package=None,
            timestamp=timestamp,
        )

    try:
        message = decode_message(packet)
    except (MalformedCertificate, EmptyChain) as exc:
        # The envelope itself parsed; the embedded chain did not.
        steps.append((STEP_DECODE, True))
        return reject(STEP_X5CHAIN, exc)
    except Exception as exc:
        return reject(STEP_DECODE, exc)
    steps.append((STEP_DECODE, True))
    timestamp = message.unprotected.timestamp

    chain = message.unprotected.x5chain
    if chain is None:
        return reject(STEP_X5CHAIN, MissingX5Chain("no certificate chain in header"))
    steps.append((STEP_X5CHAIN, True))

    if len(chain) > 1:
        try:
            validate_chain(chain, now=now)
        except Exception as exc:
            return reject(STEP_CHAIN_VALIDATE, exc)
        steps.append((STEP_CHAIN_VALIDATE, True))

    anchored = anchor_check(chain.top, trust)
    if anchored is AnchorResult.PRIMARY:
        steps.append((STEP_ANCHOR_PRIMARY, True))
    elif anchored is AnchorResult.DEFAULT_SET:
        steps.append((STEP_ANCHOR_PRIMARY, False))
        steps.append((STEP_ANCHOR_DEFAULT, True))
    else:
        steps.append((STEP_ANCHOR_PRIMARY, False))
        return reject(STEP_ANCHOR_DEFAULT, UntrustedIssuer("chain does not anchor"))

    try:
        signature_ok = verify_signature(message, chain.leaf.handle.public_key())
    except Exception as exc:
        # UnsupportedAlgorithm, or a leaf key our suite cannot consume.
        return reject(STEP_SIGNATURE, exc)
    if not signature_ok:
        return reject(STEP_SIGNATURE, SignatureInvalid("signature does not verify"))
    steps.append((STEP_SIGNATURE, True))

    try:
        package = decode_payload(message.payload)
    except Exception as exc:
        return reject(STEP_PAYLOAD_DIGEST, exc)
    steps.append((STEP_PAYLOAD_DIGEST, True))

    return VerificationReport(
        steps=tuple(steps),
        accepted=True,
        reason=None,
        anchored_by=anchored,
        package=package,
        timestamp=timestamp,
    )


def store_payload(report: VerificationReport, destination: str | os.PathLike) -> Path:
    """Write firmware plus a metadata record, atomically.

    The pair lands under a staging name first and is renamed into
    place, so a crash leaves either both files or nothing.
    """
    if not report.accepted or report.package is None:
        raise PreconditionViolated("only an accepted report may be stored")
    dest = Path(destination)
    if dest.exists():
        raise StorageFailure(f"destination already exists: {dest}")
    staging = dest.with_name(f".{dest.name}.staging-{secrets.token_hex(4)}")
    try:
        staging.mkdir(parents=True)
        (staging / "firmware.bin").write_bytes(report.package.firmware)
        record = {
            "version": report.package.version,
            "digest": report.package.digest.hex(),
            "anchored_by": report.anchored_by.value,
            "timestamp": report.timestamp,
        }
        (staging / "metadata.json").write_text(json.dumps(record, indent=2) + "\n")
        os.rename(staging, dest)
    except OSError as exc:
        shutil.rmtree(staging, ignore_errors=True)
        raise StorageFailure(f"cannot store firmware at {dest}: {exc}") from exc
    return dest / "firmware.bin"


def format_report(report: VerificationReport) -> str:
    """Plain-text rendering for the device simulation CLI."""
    lines = []
    for name, passed in report.steps:
        lines.append(f"{name:<18} {'ok' if passed else 'FAIL'}")
    if report.accepted:
        lines.append(f"outcome: Accepted (anchored by {report.anchored_by.value})")
    else:
        lines.append(f"outcome: Rejected ({report.reason})")
    return "\n".join(lines)
