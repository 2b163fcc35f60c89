"""Deterministic test PKI generator.

Builds a self-signed issuer plus a leaf-first chain whose private keys
are derived from an integer seed, so repeated runs produce identical
key material.  Certificate DER sizes are held constant across runs by
re-signing until the embedded ECDSA signature takes its maximal DER
form; without that, signature length jitter of a byte or two would make
size measurements unrepeatable.

Certificates target roughly 450 bytes of DER each, a representative
size for compact P-256 device certificates.  For real deployments use a
real CA; nothing here manages key ceremonies.
"""
from __future__ import annotations

import datetime
import hashlib
from dataclasses import dataclass
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import NameOID

from .certs import Certificate, CertificateChain, TrustStore, parse_der
from .crypto import ECDSA_P256_SHA256, KeyPair, private_key_to_pem

__all__ = ["TestPki", "derive_private_key", "make_test_pki", "write_test_pki"]

# fixed validity window keeps the DER byte-stable across runs
NOT_BEFORE = datetime.datetime(2024, 1, 1, tzinfo=datetime.timezone.utc)
NOT_AFTER = datetime.datetime(2044, 1, 1, tzinfo=datetime.timezone.utc)

# a moment inside the window, handy as the default "now" in tests and benches
DEFAULT_NOW = int(
    datetime.datetime(2025, 1, 1, tzinfo=datetime.timezone.utc).timestamp()
)

_P256_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551

_ORG = "Grid Firmware Signing Test PKI"
_MAX_SIGN_ATTEMPTS = 128


@dataclass(frozen=True)
class TestPki:
    """Issuer anchor plus one leaf-first chain and its signing key."""

    issuer_key: KeyPair
    issuer_certificate: Certificate
    chain: CertificateChain
    leaf_key: KeyPair
    seed: int

    @property
    def trust_store(self) -> TrustStore:
        return TrustStore(self.issuer_certificate)


def derive_private_key(seed: int, index: int) -> KeyPair:
    """Private key with a scalar derived from (seed, index)."""
    material = hashlib.sha256(f"gridsign-test-pki:{seed}:{index}".encode()).digest()
    scalar = int.from_bytes(material, "big") % (_P256_ORDER - 1) + 1
    return KeyPair(ec.derive_private_key(scalar, ec.SECP256R1()), ECDSA_P256_SHA256)


def _name(common_name: str) -> x509.Name:
    # the OU filler pads DER size to the ~450-byte target
    return x509.Name(
        [
            x509.NameAttribute(NameOID.ORGANIZATION_NAME, _ORG),
            x509.NameAttribute(NameOID.ORGANIZATIONAL_UNIT_NAME, "Unit 001"),
            x509.NameAttribute(NameOID.COMMON_NAME, common_name),
        ]
    )


def _issue(
    subject: x509.Name,
    issuer: x509.Name,
    subject_key: KeyPair,
    signer: KeyPair,
    serial: int,
    is_ca: bool,
) -> Certificate:
    builder = (
        x509.CertificateBuilder()
        .subject_name(subject)
        .issuer_name(issuer)
        .public_key(subject_key.public_key)
        .serial_number(serial)
        .not_valid_before(NOT_BEFORE)
        .not_valid_after(NOT_AFTER)
        .add_extension(x509.BasicConstraints(ca=is_ca, path_length=None), critical=True)
    )
    # ECDSA DER signatures vary between 70 and 72 bytes; re-sign until
    # the 72-byte maximal form comes up so certificate sizes are stable
    for _ in range(_MAX_SIGN_ATTEMPTS):
        cert = builder.sign(signer.private_key, hashes.SHA256())
        if len(cert.signature) == 72:
            return parse_der(cert.public_bytes(serialization.Encoding.DER))
    raise RuntimeError("could not produce a size-stable certificate signature")


def make_test_pki(cert_count: int = 2, seed: int = 0) -> TestPki:
    """Issuer plus a chain of cert_count certificates, leaf first.

    The chain's top certificate is issued by the self-signed issuer;
    each other certificate is issued by its successor in the list.
    """
    if cert_count < 1:
        raise ValueError("cert_count must be at least 1")
    issuer_key = derive_private_key(seed, 0)
    issuer_name = _name(f"Test Issuer {seed:04d}")
    issuer_cert = _issue(
        issuer_name, issuer_name, issuer_key, issuer_key, serial=1, is_ca=True
    )

    keys = [derive_private_key(seed, index + 1) for index in range(cert_count)]
    certs: list[Certificate] = []
    # build from the top (closest to the issuer) down to the leaf
    for position in range(cert_count - 1, -1, -1):
        is_leaf = position == 0
        subject = _name(
            f"Test Device Signer {seed:04d}"
            if is_leaf
            else f"Test Intermediate {seed:04d}-{position:02d}"
        )
        above_name = (
            issuer_name
            if position == cert_count - 1
            else _name(f"Test Intermediate {seed:04d}-{position + 1:02d}")
        )
        signer = issuer_key if position == cert_count - 1 else keys[position + 1]
        certs.insert(
            0,
            _issue(
                subject,
                above_name,
                keys[position],
                signer,
                serial=position + 2,
                is_ca=not is_leaf,
            ),
        )
    return TestPki(
        issuer_key=issuer_key,
        issuer_certificate=issuer_cert,
        chain=CertificateChain(tuple(certs)),
        leaf_key=keys[0],
        seed=seed,
    )


def write_test_pki(pki: TestPki, out_dir: str | Path) -> dict[str, Path]:
    """Write keys, chain, and a ready-to-use trust directory.

    Layout: trust/issuer.der (+ empty trust/default/), chain/cert-NN.der
    leaf first, leaf.key.pem, issuer.key.pem.
    """
    root = Path(out_dir)
    trust_dir = root / "trust"
    (trust_dir / "default").mkdir(parents=True, exist_ok=True)
    chain_dir = root / "chain"
    chain_dir.mkdir(parents=True, exist_ok=True)

    paths: dict[str, Path] = {}
    issuer_path = trust_dir / "issuer.der"
    issuer_path.write_bytes(pki.issuer_certificate.der_bytes)
    paths["trust"] = trust_dir
    paths["issuer_certificate"] = issuer_path

    for index, cert in enumerate(pki.chain.certs):
        cert_path = chain_dir / f"cert-{index:02d}.der"
        cert_path.write_bytes(cert.der_bytes)
        paths[f"chain_cert_{index:02d}"] = cert_path

    leaf_key_path = root / "leaf.key.pem"
    leaf_key_path.write_bytes(private_key_to_pem(pki.leaf_key))
    paths["leaf_key"] = leaf_key_path

    issuer_key_path = root / "issuer.key.pem"
    issuer_key_path.write_bytes(private_key_to_pem(pki.issuer_key))
    paths["issuer_key"] = issuer_key_path
    return paths
