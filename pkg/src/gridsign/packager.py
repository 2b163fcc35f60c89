"""Firmware payload layout and the end-to-end signing pipeline.

The payload is a deterministic CBOR map {"fw", "version", "digest"}
whose digest field repeats SHA-256 of the firmware; redundant with the
signature, but it lets a device re-check stored firmware without
re-running signature verification.  Policy (version monotonicity and
friends) lives in the review gate, not here.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import cbor
from .certs import CertificateChain
from .crypto import KeyPair, SigningAlgorithm, digest
from .envelope import (
    ProtectedHeader,
    UnprotectedHeader,
    encode_message,
    sign_message,
)
from .errors import DigestMismatch, MalformedPayload

__all__ = [
    "FirmwarePackage",
    "encode_payload",
    "decode_payload",
    "package_firmware",
    "FW_KEY",
    "VERSION_KEY",
    "DIGEST_KEY",
]

FW_KEY = "fw"
VERSION_KEY = "version"
DIGEST_KEY = "digest"


@dataclass(frozen=True)
class FirmwarePackage:
    """Firmware bytes, version text, and the firmware's SHA-256."""

    firmware: bytes
    version: str
    digest: bytes

    def __post_init__(self):
        if not self.version:
            raise MalformedPayload("version must be non-empty")
        if self.digest != digest(self.firmware):
            raise DigestMismatch("digest does not match the firmware bytes")

    @classmethod
    def build(cls, firmware: bytes, version: str) -> "FirmwarePackage":
        return cls(firmware=bytes(firmware), version=version, digest=digest(firmware))


def encode_payload(package: FirmwarePackage) -> bytes:
    return cbor.encode(
        cbor.from_plain(
            {
                FW_KEY: package.firmware,
                VERSION_KEY: package.version,
                DIGEST_KEY: package.digest,
            }
        )
    )


def decode_payload(data: bytes) -> FirmwarePackage:
    """Parse payload bytes and re-verify the embedded digest."""
    try:
        item = cbor.decode(data)
    except cbor.CborError as exc:
        raise MalformedPayload(f"payload is not decodable CBOR: {exc}") from exc
    if not isinstance(item, cbor.Map):
        raise MalformedPayload("payload is not a CBOR map")
    fields: dict[str, cbor.CborValue] = {}
    for key, value in item.entries:
        if not isinstance(key, cbor.TextString):
            raise MalformedPayload("payload map keys must be text")
        fields[key.value] = value
    if set(fields) != {FW_KEY, VERSION_KEY, DIGEST_KEY}:
        raise MalformedPayload(
            f"payload map must have exactly fw/version/digest, got {sorted(fields)}"
        )
    fw = fields[FW_KEY]
    version = fields[VERSION_KEY]
    digest_field = fields[DIGEST_KEY]
    if not isinstance(fw, cbor.ByteString):
        raise MalformedPayload("fw must be a byte string")
    if not isinstance(version, cbor.TextString):
        raise MalformedPayload("version must be a text string")
    if not isinstance(digest_field, cbor.ByteString) or len(digest_field.value) != 32:
        raise MalformedPayload("digest must be a 32-octet byte string")
    if digest_field.value != digest(fw.value):
        raise DigestMismatch("embedded digest does not match the firmware bytes")
    return FirmwarePackage(
        firmware=fw.value, version=version.value, digest=digest_field.value
    )


def package_firmware(
    package: FirmwarePackage,
    key: KeyPair,
    chain: CertificateChain,
    alg: SigningAlgorithm,
    now: int,
) -> bytes:
    """Produce the .cose file bytes: signed envelope over the payload."""
    message = sign_message(
        ProtectedHeader.for_algorithm(alg),
        UnprotectedHeader(timestamp=now, x5chain=chain),
        encode_payload(package),
        key,
    )
    return encode_message(message)
