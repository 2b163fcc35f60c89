"""COSE_Sign1 envelope: build, sign, encode, decode.

Wire form is the 4-element array [protected bstr, unprotected map,
payload bstr, signature bstr], emitted under CBOR tag 18.  The
signature covers the Sig_structure only; the unprotected header
(timestamp, certificate chain) stays outside signature coverage.
Decoding preserves the received protected-header bytes verbatim, and
verification always signs/verifies over those received bytes: foreign
encoders may be non-canonical, and re-encoding would break their
signatures.
"""
from __future__ import annotations

from dataclasses import dataclass

from cryptography.hazmat.primitives.asymmetric import ec

from . import cbor
from .certs import CertificateChain, chain_to_x5chain, x5chain_to_chain, X5CHAIN_LABEL
from .crypto import (
    KeyPair,
    SigningAlgorithm,
    algorithm_for_label,
    public_key_bytes,
    sign,
    verify,
)
from .errors import (
    AlgorithmMismatch,
    KeyCertificateMismatch,
    MissingRequiredHeader,
    MissingX5Chain,
    NotCoseSign1,
)

__all__ = [
    "ProtectedHeader",
    "UnprotectedHeader",
    "CoseSign1Message",
    "build_sig_structure",
    "sign_message",
    "encode_message",
    "decode_message",
    "verify_signature",
    "COSE_SIGN1_TAG",
    "ALG_LABEL",
    "TIMESTAMP_KEY",
]

COSE_SIGN1_TAG = 18
ALG_LABEL = 1
TIMESTAMP_KEY = "timestamp"

_SIG_CONTEXT = "Signature1"


def _sorted_pairs(
    pairs: tuple[tuple[cbor.CborValue, cbor.CborValue], ...]
) -> tuple[tuple[cbor.CborValue, cbor.CborValue], ...]:
    return tuple(sorted(pairs, key=lambda kv: cbor.encode(kv[0])))


@dataclass(frozen=True)
class ProtectedHeader:
    """Signature-covered parameters; always carries the algorithm."""

    alg_label: int
    extra: tuple[tuple[cbor.CborValue, cbor.CborValue], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "extra", _sorted_pairs(tuple(self.extra)))

    @classmethod
    def for_algorithm(cls, alg: SigningAlgorithm) -> "ProtectedHeader":
        return cls(alg_label=alg.cose_alg_label)

    @property
    def algorithm(self) -> SigningAlgorithm:
        """Resolve the label in the registry; unknown labels are errors."""
        return algorithm_for_label(self.alg_label)

    def to_map(self) -> cbor.Map:
        entries = ((cbor.from_plain(ALG_LABEL), cbor.from_plain(self.alg_label)),)
        return cbor.Map(entries + self.extra)

    def encode(self) -> bytes:
        """Deterministic CBOR bytes of the header map (bstr content)."""
        return cbor.encode(self.to_map())

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ProtectedHeader":
        if not raw:
            raise MissingRequiredHeader("protected header is empty, no algorithm")
        header = cbor.decode(raw)
        if not isinstance(header, cbor.Map):
            raise NotCoseSign1("protected header is not a CBOR map")
        alg_label: int | None = None
        extra = []
        for key, value in header.entries:
            if key == cbor.UnsignedInt(ALG_LABEL):
                if not isinstance(value, (cbor.UnsignedInt, cbor.NegativeInt)):
                    raise MissingRequiredHeader("algorithm parameter is not an integer")
                alg_label = value.value
            else:
                extra.append((key, value))
        if alg_label is None:
            raise MissingRequiredHeader("protected header lacks the algorithm parameter")
        return cls(alg_label=alg_label, extra=tuple(extra))


@dataclass(frozen=True)
class UnprotectedHeader:
    """Parameters outside signature coverage."""

    timestamp: int | None = None
    x5chain: CertificateChain | None = None
    extra: tuple[tuple[cbor.CborValue, cbor.CborValue], ...] = ()

    def __post_init__(self):
        if self.timestamp is not None and self.timestamp < 0:
            raise ValueError("timestamp must be unsigned")
        object.__setattr__(self, "extra", _sorted_pairs(tuple(self.extra)))

    def to_map(self) -> cbor.Map:
        entries: list[tuple[cbor.CborValue, cbor.CborValue]] = []
        if self.x5chain is not None:
            entries.append(
                (cbor.UnsignedInt(X5CHAIN_LABEL), chain_to_x5chain(self.x5chain))
            )
        if self.timestamp is not None:
            entries.append(
                (cbor.TextString(TIMESTAMP_KEY), cbor.UnsignedInt(self.timestamp))
            )
        return cbor.Map(tuple(entries) + self.extra)

    @classmethod
    def from_map(cls, header: cbor.Map) -> "UnprotectedHeader":
        timestamp: int | None = None
        chain: CertificateChain | None = None
        extra = []
        for key, value in header.entries:
            if key == cbor.UnsignedInt(X5CHAIN_LABEL):
                chain = x5chain_to_chain(value)
            elif key == cbor.TextString(TIMESTAMP_KEY) and isinstance(
                value, cbor.UnsignedInt
            ):
                timestamp = value.value
            else:
                extra.append((key, value))
        return cls(timestamp=timestamp, x5chain=chain, extra=tuple(extra))


@dataclass(frozen=True)
class CoseSign1Message:
    """The four blocks plus the exact protected bytes off the wire."""

    protected: ProtectedHeader
    unprotected: UnprotectedHeader
    payload: bytes
    signature: bytes
    protected_bytes: bytes


def build_sig_structure(
    protected_bstr: bytes, external_aad: bytes, payload: bytes
) -> bytes:
    """Deterministic CBOR of ["Signature1", protected, aad, payload]."""
    return cbor.encode(
        cbor.Array(
            (
                cbor.TextString(_SIG_CONTEXT),
                cbor.ByteString(protected_bstr),
                cbor.ByteString(external_aad),
                cbor.ByteString(payload),
            )
        )
    )


def sign_message(
    protected: ProtectedHeader,
    unprotected: UnprotectedHeader,
    payload: bytes,
    key: KeyPair,
) -> CoseSign1Message:
    """Sign payload under the protected header; binds key to the leaf cert."""
    if key.algorithm.cose_alg_label != protected.alg_label:
        raise AlgorithmMismatch(
            f"key algorithm {key.algorithm.name} does not match "
            f"protected header label {protected.alg_label}"
        )
    if unprotected.x5chain is None:
        raise MissingX5Chain("firmware packages must embed their certificate chain")
    leaf_key = unprotected.x5chain.leaf.public_key
    if public_key_bytes(leaf_key) != public_key_bytes(key.public_key):
        raise KeyCertificateMismatch(
            "signing key does not match the leaf certificate's public key"
        )
    protected_bytes = protected.encode()
    signature = sign(build_sig_structure(protected_bytes, b"", payload), key)
    return CoseSign1Message(
        protected=protected,
        unprotected=unprotected,
        payload=payload,
        signature=signature,
        protected_bytes=protected_bytes,
    )


def encode_message(message: CoseSign1Message) -> bytes:
    """Tag-18-wrapped deterministic encoding of the 4-element array."""
    body = cbor.Array(
        (
            cbor.ByteString(message.protected_bytes),
            message.unprotected.to_map(),
            cbor.ByteString(message.payload),
            cbor.ByteString(message.signature),
        )
    )
    return cbor.encode(cbor.Tag(COSE_SIGN1_TAG, body))


def decode_message(data: bytes) -> CoseSign1Message:
    """Decode tagged or untagged COSE_Sign1, keeping protected bytes.

    Raises MalformedCbor for wire-level damage, NotCoseSign1 for shape
    violations, MissingRequiredHeader when no algorithm is present, and
    certificate errors when the embedded x5chain does not parse.
    """
    item = cbor.decode(data)
    if isinstance(item, cbor.Tag):
        if item.number != COSE_SIGN1_TAG:
            raise NotCoseSign1(f"unexpected tag {item.number}")
        item = item.inner
    if not isinstance(item, cbor.Array) or len(item.items) != 4:
        raise NotCoseSign1("COSE_Sign1 must be a 4-element array")
    protected_item, unprotected_item, payload_item, signature_item = item.items
    if not isinstance(protected_item, cbor.ByteString):
        raise NotCoseSign1("protected header must be a byte string")
    if not isinstance(unprotected_item, cbor.Map):
        raise NotCoseSign1("unprotected header must be a map")
    if not isinstance(payload_item, cbor.ByteString):
        raise NotCoseSign1("payload must be a byte string (detached unsupported)")
    if not isinstance(signature_item, cbor.ByteString):
        raise NotCoseSign1("signature must be a byte string")
    return CoseSign1Message(
        protected=ProtectedHeader.from_bytes(protected_item.value),
        unprotected=UnprotectedHeader.from_map(unprotected_item),
        payload=payload_item.value,
        signature=signature_item.value,
        protected_bytes=protected_item.value,
    )


def verify_signature(
    message: CoseSign1Message, public_key: ec.EllipticCurvePublicKey
) -> bool:
    """Check the signature over the received protected bytes."""
    algorithm = message.protected.algorithm  # UnsupportedAlgorithm if unknown
    to_be_signed = build_sig_structure(message.protected_bytes, b"", message.payload)
    return verify(to_be_signed, message.signature, public_key, algorithm)
