"""End-to-end acceptance checks.

Each test measures one release criterion at its stated tolerance and
records a one-line verdict that the terminal summary echoes after the
run.  The decoder fuzz duration honors GRIDSIGN_FUZZ_SECONDS
(default 600).
"""
import itertools
import os
import random
import socket
import time

import pytest

from gridsign import cbor
from gridsign.bench import BenchConfig, run_bench
from gridsign.cbor import CborError
from gridsign.certs import AnchorResult, TrustStore
from gridsign.crypto import ECDSA_P256_SHA256
from gridsign.envelope import (
    ProtectedHeader,
    UnprotectedHeader,
    decode_message,
    encode_message,
    sign_message,
    verify_signature,
)
from gridsign.errors import InvalidState, NotFound
from gridsign.json_baseline import size_compare
from gridsign.packager import FirmwarePackage, package_firmware
from gridsign.review import ReviewPolicy
from gridsign.service import (
    PENDING,
    REVIEWED_APPROVED,
    REVIEWED_REJECTED,
    SIGNED,
    SigningKey,
    SigningService,
)
from gridsign.testpki import DEFAULT_NOW, make_test_pki
from gridsign.verifier import store_payload, verify_update

from oracles import RefTag, ref_encode, ref_sign1, ref_verify1
from test_cbor_vectors import VECTORS, as_cbor

TABLE1_SIZES = (1, 1024, 100 * 1024, 1024 * 1024, 100 * 1024 * 1024)
TABLE1_TARGETS = (0.693, 0.721, 0.749, 0.750, 0.750)
TABLE2_TARGETS = (0.663, 0.695, 0.707)


@pytest.fixture(scope="module")
def payload_sweep():
    started = time.perf_counter()
    small = run_bench(
        BenchConfig(payload_sizes=TABLE1_SIZES[:4], cert_sweep=False, seed=0)
    )
    small_elapsed = time.perf_counter() - started
    started = time.perf_counter()
    large = run_bench(
        BenchConfig(payload_sizes=TABLE1_SIZES[4:], cert_sweep=False, seed=0)
    )
    large_elapsed = time.perf_counter() - started
    return small.payload_rows() + large.payload_rows(), small_elapsed, large_elapsed


def test_c01_payload_sweep_ratios(criterion, payload_sweep):
    rows, small_elapsed, large_elapsed = payload_sweep
    ratios = [row.ratio for row in rows]
    in_tolerance = len(ratios) == 5 and all(
        abs(measured - target) <= 0.03
        for measured, target in zip(ratios, TABLE1_TARGETS)
    )
    ok = in_tolerance and small_elapsed < 10 and large_elapsed < 120
    criterion(
        f"[C1] {'PASS' if ok else 'FAIL'} payload sweep ratios "
        + "/".join(f"{r:.3f}" for r in ratios)
        + " vs targets 0.693/0.721/0.749/0.750/0.750 (tol 0.03); "
        + f"rows up to 1MB in {small_elapsed:.1f}s, 100MB row in {large_elapsed:.1f}s"
    )
    assert ok, (ratios, small_elapsed, large_elapsed)


def test_c02_cert_sweep_ratios(criterion):
    report = run_bench(BenchConfig(payload_sweep=False, seed=0))
    ratios = [row.ratio for row in report.cert_rows()]
    ok = len(ratios) == 3 and all(
        abs(measured - target) <= 0.05
        for measured, target in zip(ratios, TABLE2_TARGETS)
    )
    criterion(
        f"[C2] {'PASS' if ok else 'FAIL'} cert sweep ratios "
        + "/".join(f"{r:.3f}" for r in ratios)
        + " vs targets 0.663/0.695/0.707 (tol 0.05)"
    )
    assert ok, ratios


def test_c03_base64_inflation_law(criterion):
    measurements = []
    ok = True
    for size in (1024 * 1024, 4 * 1024 * 1024):
        _, json_size, ratio = size_compare(size, 2)
        inflation = json_size / size
        measurements.append(f"{size >> 20}MB:{inflation:.4f}/{ratio:.3f}")
        ok = ok and 1.333 <= inflation <= 1.35 and 0.745 <= ratio <= 0.755
    criterion(
        f"[C3] {'PASS' if ok else 'FAIL'} json/payload and cose/json per size "
        + " ".join(measurements)
        + " (bounds [1.333,1.35] and [0.745,0.755])"
    )
    assert ok, measurements


def test_c04_constant_signing_overhead(criterion, payload_sweep):
    rows, _, _ = payload_sweep
    overheads = [row.cose_size - row.payload_size for row in rows]
    spread = max(overheads) - min(overheads)
    ok = spread < 64
    criterion(
        f"[C4] {'PASS' if ok else 'FAIL'} cose overhead spread {spread} bytes "
        f"across payload sweep (limit 64); overheads {overheads}"
    )
    assert ok, overheads


def _locate(blob: bytes, needle: bytes) -> tuple[int, int]:
    at = blob.find(needle)
    assert at >= 0
    return at, at + len(needle)


def test_c05_soundness_and_tamper_evidence(criterion):
    started = time.perf_counter()
    accepted = total = 0
    for seed in (100, 101, 102):
        for count in (1, 2, 3):
            pki = make_test_pki(cert_count=count, seed=seed)
            for size in (0, 1, 1024):
                content = random.Random(seed * 31 + size).randbytes(size)
                package = FirmwarePackage.build(content, "1.0.0")
                blob = package_firmware(
                    package, pki.leaf_key, pki.chain, ECDSA_P256_SHA256, DEFAULT_NOW
                )
                total += 1
                accepted += verify_update(blob, pki.trust_store, DEFAULT_NOW).accepted

    pki = make_test_pki(cert_count=2, seed=100)
    package = FirmwarePackage.build(random.Random(5).randbytes(4096), "2.0.0")
    blob = package_firmware(
        package, pki.leaf_key, pki.chain, ECDSA_P256_SHA256, DEFAULT_NOW
    )
    message = decode_message(blob)
    regions = {
        "protected": _locate(blob, b"\x43" + message.protected_bytes),
        "payload": _locate(blob, message.payload),
        "signature": (len(blob) - 64, len(blob)),
        "leaf-cert": _locate(blob, pki.chain.leaf.der_bytes),
    }
    rng = random.Random(42)
    flips = 0
    false_accepts = 0
    plan = [("protected", None), ("payload", 350), ("signature", 300), ("leaf-cert", 400)]
    for region, count in plan:
        start, end = regions[region]
        if count is None:
            # Small region: flip every bit once.
            positions = [(o, b) for o in range(start, end) for b in range(8)]
        else:
            positions = [
                (rng.randrange(start, end), rng.randrange(8)) for _ in range(count)
            ]
        for offset, bit in positions:
            mutated = bytearray(blob)
            mutated[offset] ^= 1 << bit
            flips += 1
            if verify_update(bytes(mutated), pki.trust_store, DEFAULT_NOW).accepted:
                false_accepts += 1
    elapsed = time.perf_counter() - started
    ok = accepted == total and flips >= 1000 and false_accepts == 0 and elapsed < 60
    criterion(
        f"[C5] {'PASS' if ok else 'FAIL'} {accepted}/{total} good packages accepted; "
        f"{flips} single-bit flips, {false_accepts} false accepts; {elapsed:.1f}s"
    )
    assert ok, (accepted, total, flips, false_accepts, elapsed)


def test_c06_default_set_fallback(criterion):
    pki = make_test_pki(cert_count=2, seed=110)
    other = make_test_pki(cert_count=2, seed=111)
    package = FirmwarePackage.build(b"fallback image", "1.0.0")
    blob = package_firmware(
        package, pki.leaf_key, pki.chain, ECDSA_P256_SHA256, DEFAULT_NOW
    )
    with_default = TrustStore(
        issuer_certificate=other.issuer_certificate,
        default_certificate_set=(pki.issuer_certificate,),
    )
    fallback = verify_update(blob, with_default, DEFAULT_NOW)
    without_default = TrustStore(
        issuer_certificate=other.issuer_certificate, default_certificate_set=()
    )
    rejected = verify_update(blob, without_default, DEFAULT_NOW)
    ok = (
        fallback.accepted
        and fallback.anchored_by is AnchorResult.DEFAULT_SET
        and not rejected.accepted
        and rejected.reason == "UntrustedIssuer"
    )
    criterion(
        f"[C6] {'PASS' if ok else 'FAIL'} default-set anchor: "
        f"fallback={fallback.outcome}/{fallback.anchored_by.value}, "
        f"empty set={rejected.outcome}/{rejected.reason}"
    )
    assert ok


def test_c07_offline_verification(criterion, monkeypatch, tmp_path):
    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted during verification")

    monkeypatch.setattr(socket, "socket", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(socket, "getaddrinfo", refuse)

    pki = make_test_pki(cert_count=2, seed=115)
    stranger = make_test_pki(cert_count=2, seed=116)
    package = FirmwarePackage.build(b"offline image", "1.0.0")
    blob = package_firmware(
        package, pki.leaf_key, pki.chain, ECDSA_P256_SHA256, DEFAULT_NOW
    )
    tampered = bytearray(blob)
    tampered[-1] ^= 0x01

    results = [
        verify_update(blob, pki.trust_store, DEFAULT_NOW).accepted,
        not verify_update(bytes(tampered), pki.trust_store, DEFAULT_NOW).accepted,
        not verify_update(blob, stranger.trust_store, DEFAULT_NOW).accepted,
        verify_update(b"\xffjunk", pki.trust_store, DEFAULT_NOW).steps
        == (("decode", False),),
    ]
    store_payload(verify_update(blob, pki.trust_store, DEFAULT_NOW), tmp_path / "slot")
    results.append((tmp_path / "slot" / "firmware.bin").read_bytes() == b"offline image")
    ok = all(results)
    criterion(
        f"[C7] {'PASS' if ok else 'FAIL'} verification pipeline ran with sockets "
        f"disabled: {sum(results)}/5 checks held"
    )
    assert ok, results


def _random_plain(rng: random.Random, depth: int = 0):
    kinds = ["uint", "nint", "bytes", "text", "bool", "null"]
    if depth < 3:
        kinds += ["list", "map", "tag"]
    kind = rng.choice(kinds)
    if kind == "uint":
        return rng.randrange(
            rng.choice([24, 2**8, 2**16, 2**32, 2**64])
        )
    if kind == "nint":
        return -rng.randrange(1, rng.choice([2**8, 2**32, 2**64]) + 1)
    if kind == "bytes":
        return rng.randbytes(rng.randrange(0, 33))
    if kind == "text":
        return "".join(
            chr(rng.choice([rng.randrange(0xD800), rng.randrange(0xE000, 0x110000)]))
            for _ in range(rng.randrange(0, 17))
        )
    if kind == "bool":
        return rng.random() < 0.5
    if kind == "null":
        return None
    if kind == "list":
        return [_random_plain(rng, depth + 1) for _ in range(rng.randrange(0, 5))]
    if kind == "map":
        entries = {}
        for _ in range(rng.randrange(0, 5)):
            key_kind = rng.randrange(3)
            if key_kind == 0:
                key = rng.randrange(2**32)
            elif key_kind == 1:
                key = "".join(
                    chr(rng.randrange(0x20, 0x7F)) for _ in range(rng.randrange(0, 9))
                )
            else:
                key = rng.randbytes(rng.randrange(0, 9))
            entries[key] = _random_plain(rng, depth + 1)
        return entries
    return RefTag(rng.randrange(0, 2**32), _random_plain(rng, depth + 1))


def test_c08_cbor_oracle_equivalence_and_fuzz(criterion):
    rng = random.Random(8008)
    mismatches = 0
    corpus: list[bytes] = []
    for _ in range(500):
        value = _random_plain(rng)
        reference = ref_encode(value)
        mine = cbor.encode(as_cbor(value))
        if mine != reference:
            mismatches += 1
        decoded = cbor.decode_flagged(reference)
        if not decoded.canonical:
            mismatches += 1
        corpus.append(reference)
    corpus.extend(bytes.fromhex(encoded) for _, encoded in VECTORS)

    seconds = float(os.environ.get("GRIDSIGN_FUZZ_SECONDS", "600"))
    deadline = time.monotonic() + seconds
    iterations = 0
    failures: list[tuple[str, str]] = []
    while time.monotonic() < deadline and not failures:
        strategy = rng.randrange(5)
        if strategy == 0:
            data = rng.randbytes(rng.randrange(0, 64))
        elif strategy == 1:
            data = rng.randbytes(rng.randrange(0, 4096))
        elif strategy == 2:
            base = bytearray(rng.choice(corpus))
            for _ in range(rng.randrange(1, 9)):
                if base:
                    base[rng.randrange(len(base))] ^= 1 << rng.randrange(8)
            data = bytes(base)
        elif strategy == 3:
            base = rng.choice(corpus)
            data = base[: rng.randrange(len(base) + 1)]
        else:
            first, second = rng.choice(corpus), rng.choice(corpus)
            data = (
                first[: rng.randrange(len(first) + 1)]
                + second[rng.randrange(len(second) + 1) :]
            )
        try:
            cbor.decode_flagged(data)
        except CborError:
            pass
        except Exception as exc:
            failures.append((data.hex(), repr(exc)))
        iterations += 1
    ok = mismatches == 0 and not failures
    criterion(
        f"[C8] {'PASS' if ok else 'FAIL'} 500-value corpus byte-identical to the "
        f"reference encoder; fuzz ran {iterations} inputs over {seconds:.0f}s with "
        f"{len(failures)} crashes"
    )
    assert ok, (mismatches, failures[:3])


def test_c09_cose_interop_oracle(criterion):
    rng = random.Random(909)
    pkis = {count: make_test_pki(cert_count=count, seed=120 + count) for count in (1, 2, 3)}
    ours_verified = theirs_verified = 0
    for index in range(60):
        pki = pkis[rng.choice([1, 2, 3])]
        payload = rng.randbytes(rng.randrange(0, 2048))
        message = sign_message(
            ProtectedHeader.for_algorithm(ECDSA_P256_SHA256),
            UnprotectedHeader(timestamp=DEFAULT_NOW + index, x5chain=pki.chain),
            payload,
            pki.leaf_key,
        )
        ours_verified += ref_verify1(encode_message(message), pki.leaf_key.public_key)
    for index in range(60):
        count = rng.choice([1, 2, 3])
        pki = pkis[count]
        payload = rng.randbytes(rng.randrange(0, 2048))
        ders = [cert.der_bytes for cert in pki.chain.certs]
        x5chain = ders[0] if count == 1 else ders
        foreign = ref_sign1(
            pki.leaf_key.private_key,
            payload,
            {33: x5chain, "timestamp": DEFAULT_NOW + index},
        )
        message = decode_message(foreign)
        theirs_verified += verify_signature(message, pki.leaf_key.public_key)
    ok = ours_verified == 60 and theirs_verified == 60
    criterion(
        f"[C9] {'PASS' if ok else 'FAIL'} interop: {ours_verified}/60 of ours verified "
        f"by the reference, {theirs_verified}/60 reference messages verified by us"
    )
    assert ok


def test_c10_service_state_machine_exhaustive(criterion, tmp_path):
    pki = make_test_pki(cert_count=2, seed=130)
    service = SigningService(
        root=tmp_path / "store",
        keys={"default": SigningKey("default", pki.leaf_key, pki.chain)},
        clock=lambda: DEFAULT_NOW,
    )
    permissive = ReviewPolicy()
    rejecting = ReviewPolicy(max_size_bytes=1)
    actions = ("submit", "review_ok", "review_bad", "sign", "download")
    missing_id = "0" * 16
    sequences = 0
    signed_count = 0
    violations: list[tuple] = []

    for length in range(1, 6):
        for sequence in itertools.product(actions, repeat=length):
            sequences += 1
            product = f"p{sequences}"
            submission_id = None
            model = "absent"
            approved_before_sign = False
            submit_counter = 0
            for action in sequence:
                if action == "submit":
                    submit_counter += 1
                    record = service.submit(
                        b"state machine fw", f"1.0.{submit_counter}", product
                    )
                    submission_id = record.id
                    model = PENDING
                    approved_before_sign = False
                    continue
                target = submission_id if submission_id is not None else missing_id
                try:
                    if action == "review_ok":
                        outcome = service.review(target, policy=permissive).state
                    elif action == "review_bad":
                        outcome = service.review(target, policy=rejecting).state
                    elif action == "sign":
                        outcome = service.sign_submission(target, now=DEFAULT_NOW).state
                    else:
                        service.download(target)
                        outcome = "downloaded"
                except (NotFound, InvalidState) as exc:
                    outcome = type(exc).__name__

                if model == "absent":
                    expected = "NotFound"
                elif action == "review_ok":
                    expected = REVIEWED_APPROVED if model == PENDING else "InvalidState"
                elif action == "review_bad":
                    expected = REVIEWED_REJECTED if model == PENDING else "InvalidState"
                elif action == "sign":
                    expected = SIGNED if model == REVIEWED_APPROVED else "InvalidState"
                else:
                    expected = "downloaded" if model == SIGNED else "InvalidState"

                if outcome != expected:
                    violations.append((sequence, action, model, outcome, expected))
                    break
                if outcome == REVIEWED_APPROVED:
                    approved_before_sign = True
                    model = outcome
                elif outcome == REVIEWED_REJECTED:
                    model = outcome
                elif outcome == SIGNED:
                    signed_count += 1
                    if not approved_before_sign:
                        violations.append((sequence, "signed without approval"))
                        break
                    model = outcome
            else:
                if submission_id is not None and model != "absent":
                    final = service.get(submission_id).state
                    if final != model:
                        violations.append((sequence, "final state", final, model))

    ok = not violations and signed_count > 0
    criterion(
        f"[C10] {'PASS' if ok else 'FAIL'} {sequences} action sequences (length <= 5) "
        f"replayed against the model: {signed_count} reached signed, all via approval; "
        f"{len(violations)} violations"
    )
    assert ok, violations[:5]
