"""Signing algorithm registry and digest/sign/verify primitives.

The registry is closed: an algorithm label that is not registered is
rejected, never defaulted.  ECDSA signatures travel in the raw 64-octet
r||s form used by COSE, not ASN.1/DER.
"""
from __future__ import annotations

import hashlib
import logging
import threading
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidSignature, UnsupportedAlgorithm as _LibUnsupported
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)

from .errors import UnsupportedAlgorithm

__all__ = [
    "SigningAlgorithm",
    "ECDSA_P256_SHA256",
    "KeyPair",
    "algorithm_for_label",
    "algorithm_for_name",
    "register_algorithm",
    "registered_algorithms",
    "digest",
    "sign",
    "verify",
    "load_private_key_pem",
    "private_key_to_pem",
    "public_key_bytes",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SigningAlgorithm:
    """One entry of the closed signing algorithm registry."""

    name: str
    cose_alg_label: int
    digest_name: str
    signature_size: int


ECDSA_P256_SHA256 = SigningAlgorithm(
    name="ECDSA_P256_SHA256",
    cose_alg_label=-7,
    digest_name="sha256",
    signature_size=64,
)

_registry_lock = threading.Lock()
_registry: dict[int, SigningAlgorithm] = {
    ECDSA_P256_SHA256.cose_alg_label: ECDSA_P256_SHA256
}


def register_algorithm(alg: SigningAlgorithm) -> None:
    """Add an algorithm to the registry; labels must stay unique."""
    with _registry_lock:
        existing = _registry.get(alg.cose_alg_label)
        if existing is not None and existing != alg:
            raise ValueError(f"label {alg.cose_alg_label} already registered")
        _registry[alg.cose_alg_label] = alg


def registered_algorithms() -> tuple[SigningAlgorithm, ...]:
    with _registry_lock:
        return tuple(_registry.values())


def algorithm_for_label(label: int) -> SigningAlgorithm:
    with _registry_lock:
        alg = _registry.get(label)
    if alg is None:
        raise UnsupportedAlgorithm(f"unknown algorithm label {label}")
    return alg


def algorithm_for_name(name: str) -> SigningAlgorithm:
    with _registry_lock:
        for alg in _registry.values():
            if alg.name == name:
                return alg
    raise UnsupportedAlgorithm(f"unknown algorithm name {name!r}")


def digest(data: bytes, algorithm: str = "sha256") -> bytes:
    """Fixed-length digest of data; 32 octets for sha256."""
    try:
        h = hashlib.new(algorithm)
    except ValueError as exc:
        raise UnsupportedAlgorithm(f"unknown digest {algorithm!r}") from exc
    h.update(data)
    return h.digest()


@dataclass(frozen=True)
class KeyPair:
    """A private signing key bound to exactly one algorithm."""

    private_key: ec.EllipticCurvePrivateKey
    algorithm: SigningAlgorithm = ECDSA_P256_SHA256

    @property
    def public_key(self) -> ec.EllipticCurvePublicKey:
        return self.private_key.public_key()

    @classmethod
    def generate(cls, algorithm: SigningAlgorithm = ECDSA_P256_SHA256) -> "KeyPair":
        _require_ecdsa_p256(algorithm)
        return cls(ec.generate_private_key(ec.SECP256R1()), algorithm)


def _require_ecdsa_p256(algorithm: SigningAlgorithm) -> None:
    # the only implemented suite; registry entries added by callers
    # without an implementation are rejected here, not defaulted
    if algorithm != ECDSA_P256_SHA256:
        raise UnsupportedAlgorithm(f"no implementation for {algorithm.name}")


def sign(to_be_signed: bytes, key: KeyPair) -> bytes:
    """Raw r||s signature over to_be_signed (64 octets for P-256)."""
    _require_ecdsa_p256(key.algorithm)
    der = key.private_key.sign(to_be_signed, ec.ECDSA(hashes.SHA256()))
    r, s = decode_dss_signature(der)
    return r.to_bytes(32, "big") + s.to_bytes(32, "big")


def verify(
    to_be_signed: bytes,
    signature: bytes,
    public_key: ec.EllipticCurvePublicKey,
    algorithm: SigningAlgorithm = ECDSA_P256_SHA256,
) -> bool:
    """True iff signature is valid; malformed signatures return False."""
    _require_ecdsa_p256(algorithm)
    if len(signature) != algorithm.signature_size:
        return False
    r = int.from_bytes(signature[:32], "big")
    s = int.from_bytes(signature[32:], "big")
    try:
        der = encode_dss_signature(r, s)
        public_key.verify(der, to_be_signed, ec.ECDSA(hashes.SHA256()))
    except (InvalidSignature, ValueError):
        return False
    return True


def load_private_key_pem(
    source: bytes | str | Path, algorithm: SigningAlgorithm = ECDSA_P256_SHA256
) -> KeyPair:
    """Load an unencrypted PEM private key (PKCS#8 or SEC1 EC form)."""
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source
    try:
        key = serialization.load_pem_private_key(data, password=None)
    except (ValueError, TypeError, _LibUnsupported) as exc:
        # deliberately detail-free: no key material in logs or messages
        raise UnsupportedAlgorithm("could not load PEM private key") from exc
    if not isinstance(key, ec.EllipticCurvePrivateKey) or not isinstance(
        key.curve, ec.SECP256R1
    ):
        raise UnsupportedAlgorithm("private key is not a P-256 EC key")
    _require_ecdsa_p256(algorithm)
    return KeyPair(key, algorithm)


def private_key_to_pem(key: KeyPair) -> bytes:
    """Serialize the private key as unencrypted PKCS#8 PEM."""
    return key.private_key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )


def public_key_bytes(public_key: ec.EllipticCurvePublicKey) -> bytes:
    """DER SubjectPublicKeyInfo bytes; used for key identity comparison."""
    return public_key.public_bytes(
        serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
    )
