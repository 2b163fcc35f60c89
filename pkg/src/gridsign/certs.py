"""X.509 certificate handling.

Parsing, leaf-first chain validation, trust anchoring against the
device's pre-stored issuer certificate with a default-set fallback, and
the CBOR x5chain representation.  Distinguished names are compared by
byte equality of their DER encodings.  No network access anywhere:
revocation is out of scope for the offline verifier.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

from cryptography import x509
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ec

from . import cbor
from .crypto import public_key_bytes
from .errors import (
    CertificateExpired,
    CertificateNotYetValid,
    ChainLinkageError,
    ChainSignatureError,
    EmptyChain,
    MalformedCertificate,
)

__all__ = [
    "Certificate",
    "CertificateChain",
    "TrustStore",
    "AnchorResult",
    "parse_der",
    "load_certificate",
    "validate_chain",
    "anchor_check",
    "issued_by",
    "chain_to_x5chain",
    "x5chain_to_chain",
    "X5CHAIN_LABEL",
]

logger = logging.getLogger(__name__)

# registered COSE header parameter label for an ordered certificate chain
X5CHAIN_LABEL = 33


@dataclass(frozen=True)
class Certificate:
    """A parsed X.509 certificate; identity is its DER bytes."""

    der_bytes: bytes
    subject: str = field(compare=False)
    issuer: str = field(compare=False)
    not_before: int = field(compare=False)
    not_after: int = field(compare=False)
    is_self_signed: bool = field(compare=False)
    handle: x509.Certificate = field(compare=False, repr=False)
    subject_der: bytes = field(compare=False, repr=False)
    issuer_der: bytes = field(compare=False, repr=False)

    @property
    def public_key(self) -> ec.EllipticCurvePublicKey:
        return self.handle.public_key()


def parse_der(der: bytes) -> Certificate:
    """Parse DER bytes, retaining them verbatim."""
    try:
        handle = x509.load_der_x509_certificate(bytes(der))
    except ValueError as exc:
        raise MalformedCertificate(f"certificate does not parse: {exc}") from exc
    subject_der = handle.subject.public_bytes()
    issuer_der = handle.issuer.public_bytes()
    return Certificate(
        der_bytes=bytes(der),
        subject=handle.subject.rfc4514_string(),
        issuer=handle.issuer.rfc4514_string(),
        not_before=int(handle.not_valid_before_utc.timestamp()),
        not_after=int(handle.not_valid_after_utc.timestamp()),
        is_self_signed=subject_der == issuer_der,
        handle=handle,
        subject_der=subject_der,
        issuer_der=issuer_der,
    )


def load_certificate(source: bytes | str | Path) -> Certificate:
    """Load one certificate from DER or PEM bytes or a file."""
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = bytes(source)
    if data.lstrip().startswith(b"-----BEGIN"):
        try:
            handle = x509.load_pem_x509_certificate(data)
        except ValueError as exc:
            raise MalformedCertificate(f"certificate does not parse: {exc}") from exc
        return parse_der(handle.public_bytes(serialization.Encoding.DER))
    return parse_der(data)


@dataclass(frozen=True)
class CertificateChain:
    """Ordered certificates, leaf (signer) first."""

    certs: tuple[Certificate, ...]

    def __post_init__(self):
        object.__setattr__(self, "certs", tuple(self.certs))
        if not self.certs:
            raise EmptyChain("a certificate chain needs at least one certificate")

    def __len__(self) -> int:
        return len(self.certs)

    @property
    def leaf(self) -> Certificate:
        return self.certs[0]

    @property
    def top(self) -> Certificate:
        """The certificate closest to the trust anchor."""
        return self.certs[-1]


def _signature_checks_out(cert: Certificate, issuer: Certificate) -> bool:
    issuer_key = issuer.handle.public_key()
    if not isinstance(issuer_key, ec.EllipticCurvePublicKey):
        return False
    hash_alg = cert.handle.signature_hash_algorithm
    if hash_alg is None:
        return False
    try:
        issuer_key.verify(
            cert.handle.signature,
            cert.handle.tbs_certificate_bytes,
            ec.ECDSA(hash_alg),
        )
    except InvalidSignature:
        return False
    return True


def validate_chain(chain: CertificateChain, now: int) -> None:
    """Check linkage, cert-on-cert signatures, and validity windows.

    A single-certificate chain passes linkage vacuously; its validity
    window is still checked.  Raises a ChainError subclass on failure.
    """
    for cert, issuer in zip(chain.certs, chain.certs[1:]):
        if cert.issuer_der != issuer.subject_der:
            raise ChainLinkageError(
                f"issuer {cert.issuer!r} does not match subject {issuer.subject!r}"
            )
        if not _signature_checks_out(cert, issuer):
            raise ChainSignatureError(
                f"signature on {cert.subject!r} fails under {issuer.subject!r}"
            )
    for cert in chain.certs:
        if now < cert.not_before:
            raise CertificateNotYetValid(f"{cert.subject!r} not valid before {cert.not_before}")
        if now > cert.not_after:
            raise CertificateExpired(f"{cert.subject!r} expired at {cert.not_after}")


@dataclass(frozen=True)
class TrustStore:
    """Pre-stored issuer certificate plus the default certificate set."""

    issuer_certificate: Certificate
    default_certificate_set: tuple[Certificate, ...] = ()

    @classmethod
    def load(cls, directory: str | Path) -> "TrustStore":
        """Read a trust directory: issuer.der plus optional default/*.der."""
        root = Path(directory)
        issuer = load_certificate(root / "issuer.der")
        defaults = tuple(
            load_certificate(path) for path in sorted((root / "default").glob("*.der"))
        )
        return cls(issuer, defaults)


class AnchorResult(str, enum.Enum):
    PRIMARY = "primary"
    DEFAULT_SET = "default_set"
    NONE = "none"

    def __str__(self) -> str:  # pragma: no cover - display convenience
        return self.value


def issued_by(cert: Certificate, anchor: Certificate) -> bool:
    """True if anchor is the certificate itself or directly issued it."""
    if cert.der_bytes == anchor.der_bytes:
        return True
    if cert.issuer_der != anchor.subject_der:
        return False
    return _signature_checks_out(cert, anchor)


def anchor_check(candidate: Certificate, trust: TrustStore) -> AnchorResult:
    """Anchor the chain's top certificate: primary first, then defaults."""
    if issued_by(candidate, trust.issuer_certificate):
        return AnchorResult.PRIMARY
    for member in trust.default_certificate_set:
        if issued_by(candidate, member):
            return AnchorResult.DEFAULT_SET
    return AnchorResult.NONE


def chain_to_x5chain(chain: CertificateChain) -> cbor.CborValue:
    """One certificate is a bare byte string; more become an array."""
    if len(chain.certs) == 1:
        return cbor.ByteString(chain.leaf.der_bytes)
    return cbor.Array(tuple(cbor.ByteString(c.der_bytes) for c in chain.certs))


def x5chain_to_chain(value: cbor.CborValue) -> CertificateChain:
    if isinstance(value, cbor.ByteString):
        return CertificateChain((parse_der(value.value),))
    if isinstance(value, cbor.Array):
        if not value.items:
            raise EmptyChain("x5chain array is empty")
        certs = []
        for item in value.items:
            if not isinstance(item, cbor.ByteString):
                raise MalformedCertificate("x5chain element is not a byte string")
            certs.append(parse_der(item.value))
        return CertificateChain(tuple(certs))
    raise MalformedCertificate("x5chain is neither a byte string nor an array")
