"""Shared exception taxonomy for the firmware signing toolkit.

CBOR-level errors live in :mod:`gridsign.cbor`; everything above the
serialization substrate raises from this hierarchy so callers can catch
one base class.
"""
from __future__ import annotations

__all__ = [
    "ToolkitError",
    "UnsupportedAlgorithm",
    "MalformedCertificate",
    "EmptyChain",
    "ChainError",
    "ChainLinkageError",
    "ChainSignatureError",
    "CertificateExpired",
    "CertificateNotYetValid",
    "NotCoseSign1",
    "MissingRequiredHeader",
    "MissingX5Chain",
    "AlgorithmMismatch",
    "KeyCertificateMismatch",
    "MalformedPayload",
    "DigestMismatch",
    "StorageFailure",
    "PreconditionViolated",
    "PluginFailure",
    "InvalidState",
    "NotFound",
    "UnknownKeyRef",
    "PayloadTooLarge",
]


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedAlgorithm(ToolkitError):
    """Algorithm label or name is not in the closed registry."""


# --- certificate handling ---------------------------------------------------

class MalformedCertificate(ToolkitError):
    """DER or PEM input did not parse as an X.509 certificate."""


class EmptyChain(ToolkitError):
    """A certificate chain must contain at least one certificate."""


class ChainError(ToolkitError):
    """Base class for certificate chain validation failures."""


class ChainLinkageError(ChainError):
    """Consecutive certificates do not link by issuer/subject name."""


class ChainSignatureError(ChainError):
    """A certificate's signature does not verify under its issuer's key."""


class CertificateExpired(ChainError):
    """The supplied time is after a certificate's not_after bound."""


class CertificateNotYetValid(ChainError):
    """The supplied time is before a certificate's not_before bound."""


# --- COSE envelope ----------------------------------------------------------

class NotCoseSign1(ToolkitError):
    """Input is not a 4-element COSE_Sign1 structure."""


class MissingRequiredHeader(ToolkitError):
    """The protected header lacks the algorithm parameter."""


class MissingX5Chain(ToolkitError):
    """The unprotected header carries no certificate chain."""


class AlgorithmMismatch(ToolkitError):
    """Signing key algorithm differs from the protected header algorithm."""


class KeyCertificateMismatch(ToolkitError):
    """Signing key does not match the leaf certificate's public key."""


# --- firmware payload -------------------------------------------------------

class MalformedPayload(ToolkitError):
    """Payload bytes do not decode to the firmware package map."""


class DigestMismatch(ToolkitError):
    """Embedded digest does not equal the hash of the firmware bytes."""


# --- verification outcomes --------------------------------------------------

class UntrustedIssuer(ToolkitError):
    """Chain does not anchor in the issuer or the default set."""


class SignatureInvalid(ToolkitError):
    """COSE signature does not verify under the leaf public key."""


# --- verifier-side storage --------------------------------------------------

class StorageFailure(ToolkitError):
    """Payload or record could not be written to the destination."""


class PreconditionViolated(ToolkitError):
    """Operation invoked in a state its contract forbids."""


# --- review gate ------------------------------------------------------------

class PluginFailure(ToolkitError):
    """An external review plugin crashed or returned garbage."""


# --- benchmarking -----------------------------------------------------------

class ResourceExceeded(ToolkitError):
    """A benchmark row ran out of memory or another hard resource."""


# --- signing service --------------------------------------------------------

class InvalidState(ToolkitError):
    """Submission is not in a state that permits the requested action."""


class NotFound(ToolkitError):
    """No submission exists under the given id."""


class UnknownKeyRef(ToolkitError):
    """The requested signing key identifier is not configured."""


class PayloadTooLarge(ToolkitError):
    """Uploaded firmware exceeds the configured service limit."""
