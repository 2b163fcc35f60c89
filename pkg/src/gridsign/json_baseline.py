"""JSON encapsulation of a signed message, for size comparison only.

Same octets, text packaging: certificates, payload, and signature are
Base64 wrapped, the algorithm becomes its registry name, the timestamp
becomes ISO-8601 text.  Output is compact, which is the framing most
favorable to JSON; measured ratios are therefore conservative.  There
is deliberately no JSON verification path.
"""
from __future__ import annotations

import base64
import datetime
import json
import random

from .crypto import ECDSA_P256_SHA256, SigningAlgorithm
from .envelope import CoseSign1Message, decode_message
from .packager import FirmwarePackage, package_firmware
from .testpki import DEFAULT_NOW, make_test_pki

__all__ = ["encapsulate_json", "size_compare", "iso_timestamp"]


def iso_timestamp(seconds: int) -> str:
    moment = datetime.datetime.fromtimestamp(seconds, datetime.timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def encapsulate_json(message: CoseSign1Message) -> bytes:
    chain = message.unprotected.x5chain
    certs = [] if chain is None else [_b64(cert.der_bytes) for cert in chain.certs]
    ts = message.unprotected.timestamp
    document = {
        "protected_header": {"algorithm": message.protected.algorithm.name},
        "unprotected_header": {
            "timestamp": iso_timestamp(ts) if ts is not None else None,
            "cert_chain": certs,
        },
        "payload": _b64(message.payload),
        "signature": _b64(message.signature),
    }
    return json.dumps(document, separators=(",", ":")).encode("ascii")


def size_compare(
    payload_size: int,
    cert_count: int,
    alg: SigningAlgorithm = ECDSA_P256_SHA256,
    *,
    seed: int = 0,
    timestamp: int = DEFAULT_NOW,
) -> tuple[int, int, float]:
    """Package identical seeded content both ways; ratio = cose/json."""
    if payload_size < 0:
        raise ValueError("payload_size must be non-negative")
    if cert_count < 1:
        raise ValueError("cert_count must be at least 1")
    rng = random.Random(f"size-compare:{seed}:{payload_size}:{cert_count}")
    pki = make_test_pki(cert_count=cert_count, seed=seed)
    package = FirmwarePackage.build(rng.randbytes(payload_size), "1.0.0")
    cose_bytes = package_firmware(package, pki.leaf_key, pki.chain, alg, timestamp)
    json_bytes = encapsulate_json(decode_message(cose_bytes))
    return len(cose_bytes), len(json_bytes), len(cose_bytes) / len(json_bytes)
