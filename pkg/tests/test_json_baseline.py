import base64
import json
import math

import pytest

from gridsign.crypto import ECDSA_P256_SHA256
from gridsign.envelope import decode_message
from gridsign.json_baseline import encapsulate_json, iso_timestamp, size_compare
from gridsign.packager import FirmwarePackage, package_firmware
from gridsign.testpki import DEFAULT_NOW, make_test_pki


@pytest.fixture(scope="module")
def message():
    pki = make_test_pki(cert_count=2, seed=71)
    pkg = FirmwarePackage.build(b"baseline content" * 64, "5.0.0")
    blob = package_firmware(pkg, pki.leaf_key, pki.chain, ECDSA_P256_SHA256, DEFAULT_NOW)
    return pki, decode_message(blob)


def test_iso_timestamp():
    assert iso_timestamp(DEFAULT_NOW) == "2025-01-01T00:00:00Z"
    assert iso_timestamp(0) == "1970-01-01T00:00:00Z"


def test_document_shape(message):
    _, msg = message
    doc = json.loads(encapsulate_json(msg))
    assert set(doc) == {"protected_header", "unprotected_header", "payload", "signature"}
    assert doc["protected_header"] == {"algorithm": "ECDSA_P256_SHA256"}
    assert set(doc["unprotected_header"]) == {"timestamp", "cert_chain"}
    assert doc["unprotected_header"]["timestamp"] == "2025-01-01T00:00:00Z"
    assert len(doc["unprotected_header"]["cert_chain"]) == 2


def test_output_is_compact(message):
    _, msg = message
    raw = encapsulate_json(msg)
    assert b"\n" not in raw
    assert b": " not in raw
    assert b", " not in raw


def test_binary_fields_decode_to_identical_octets(message):
    pki, msg = message
    doc = json.loads(encapsulate_json(msg))
    assert base64.b64decode(doc["payload"]) == msg.payload
    assert base64.b64decode(doc["signature"]) == msg.signature
    decoded_chain = [base64.b64decode(c) for c in doc["unprotected_header"]["cert_chain"]]
    assert decoded_chain == [cert.der_bytes for cert in pki.chain.certs]


def test_base64_floor(message):
    _, msg = message
    raw = encapsulate_json(msg)
    assert len(raw) >= 4 * math.ceil(len(msg.payload) / 3)


def test_empty_payload_single_cert_size():
    cose, js, ratio = size_compare(0, 1, seed=0)
    # Text-format counterpart of the minimal signed message.
    assert js == pytest.approx(882, rel=0.10)
    assert ratio < 0.75


def test_size_compare_deterministic():
    assert size_compare(1024, 2, seed=5) == size_compare(1024, 2, seed=5)


def test_size_compare_validation():
    with pytest.raises(ValueError):
        size_compare(-1, 2)
    with pytest.raises(ValueError):
        size_compare(0, 0)


def test_ratio_monotone_toward_three_quarters():
    ratios = [size_compare(n, 2)[2] for n in (1, 1024, 100 * 1024, 1024 * 1024)]
    assert ratios == sorted(ratios)
    assert ratios[-1] == pytest.approx(0.750, abs=0.005)
    assert all(r < 0.755 for r in ratios)


def test_cert_sweep_ratios():
    expected = {1: 0.663, 2: 0.695, 3: 0.707}
    for count, target in expected.items():
        _, _, ratio = size_compare(0, count)
        assert ratio == pytest.approx(target, abs=0.05)
        assert ratio < 0.75


def test_json_inflation_for_large_payload():
    size = 1024 * 1024
    cose, js, ratio = size_compare(size, 2)
    assert 1.333 <= js / size <= 1.35
    assert 0.745 <= ratio <= 0.755
    assert js >= (4 / 3) * size
