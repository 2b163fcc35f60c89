"""Firmware signing and verification toolkit.

Packages firmware updates as signed COSE_Sign1 messages with embedded
X.509 certificate chains, verifies them offline against a device trust
store, and measures the size of the binary encapsulation against a
JSON/Base64 baseline.
"""
from __future__ import annotations

from .bench import BenchConfig, BenchReport, run_bench
from .certs import (
    AnchorResult,
    Certificate,
    CertificateChain,
    TrustStore,
    anchor_check,
    load_certificate,
    validate_chain,
)
from .crypto import (
    ECDSA_P256_SHA256,
    KeyPair,
    SigningAlgorithm,
    digest,
    load_private_key_pem,
    register_algorithm,
)
from .envelope import (
    CoseSign1Message,
    ProtectedHeader,
    UnprotectedHeader,
    decode_message,
    encode_message,
    sign_message,
    verify_signature,
)
from .errors import ToolkitError
from .json_baseline import encapsulate_json, size_compare
from .packager import (
    FirmwarePackage,
    decode_payload,
    encode_payload,
    package_firmware,
)
from .review import ReviewPolicy, ReviewReport, load_policy, run_review
from .testpki import DEFAULT_NOW, TestPki, make_test_pki, write_test_pki
from .verifier import VerificationReport, store_payload, verify_update

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ToolkitError",
    "ECDSA_P256_SHA256",
    "KeyPair",
    "SigningAlgorithm",
    "digest",
    "load_private_key_pem",
    "register_algorithm",
    "AnchorResult",
    "Certificate",
    "CertificateChain",
    "TrustStore",
    "anchor_check",
    "load_certificate",
    "validate_chain",
    "CoseSign1Message",
    "ProtectedHeader",
    "UnprotectedHeader",
    "sign_message",
    "encode_message",
    "decode_message",
    "verify_signature",
    "FirmwarePackage",
    "package_firmware",
    "encode_payload",
    "decode_payload",
    "VerificationReport",
    "verify_update",
    "store_payload",
    "DEFAULT_NOW",
    "TestPki",
    "make_test_pki",
    "write_test_pki",
    "ReviewPolicy",
    "ReviewReport",
    "run_review",
    "load_policy",
    "encapsulate_json",
    "size_compare",
    "BenchConfig",
    "BenchReport",
    "run_bench",
]
