"""Command-line entry point.

Thin layer over the library: each command maps to one operation.
Exit codes: 0 success or Accepted, 1 content rejected (verification
or review), 2 usage, 3 input/output problems, 4 internal fault.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import cbor
from .bench import BenchConfig, run_bench
from .cbor import CborError
from .certs import CertificateChain, TrustStore, load_certificate
from .crypto import algorithm_for_label, algorithm_for_name, load_private_key_pem, registered_algorithms
from .envelope import decode_message
from .errors import ToolkitError, UnsupportedAlgorithm
from .packager import FirmwarePackage, decode_payload, package_firmware
from .review import ReviewPolicy, load_policy, run_review
from .testpki import make_test_pki, write_test_pki
from .verifier import format_report, verify_update

__all__ = ["main", "build_parser"]


def _add_output_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--output-format",
        choices=["human", "machine"],
        default="human",
        help="machine emits line-delimited JSON for CI",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridsign",
        description="Sign, verify, inspect, review, and benchmark firmware update packages.",
    )
    sub = parser.add_subparsers(dest="command")

    keygen = sub.add_parser(
        "keygen-test-pki",
        help="emit a deterministic test issuer, chain, and trust directory",
    )
    keygen.add_argument("--out", required=True, help="output directory")
    keygen.add_argument("--cert-count", type=int, default=2)
    keygen.add_argument("--seed", type=int, default=0)
    _add_output_format(keygen)
    keygen.set_defaults(func=cmd_keygen)

    sign = sub.add_parser("sign", help="package and sign a firmware image")
    sign.add_argument("--firmware", required=True, help="firmware image file")
    sign.add_argument("--version", required=True, help="firmware version text")
    sign.add_argument("--key", required=True, help="signing key PEM file")
    sign.add_argument(
        "--chain", required=True, nargs="+", help="certificate files, leaf first"
    )
    sign.add_argument("--out", required=True, help="output package file")
    sign.add_argument(
        "--alg",
        choices=sorted(alg.name for alg in registered_algorithms()),
        default="ECDSA_P256_SHA256",
    )
    sign.add_argument("--timestamp", type=int, default=None, help="override signing time")
    _add_output_format(sign)
    sign.set_defaults(func=cmd_sign)

    verify = sub.add_parser("verify", help="verify a package against a trust directory")
    verify.add_argument("cose_file", help="package file to verify")
    verify.add_argument("--trust", required=True, help="trust directory")
    verify.add_argument("--now", type=int, default=None, help="verification time override")
    _add_output_format(verify)
    verify.set_defaults(func=cmd_verify)

    inspect = sub.add_parser("inspect", help="decode and print a package without verifying")
    inspect.add_argument("cose_file", help="package file to inspect")
    _add_output_format(inspect)
    inspect.set_defaults(func=cmd_inspect)

    review = sub.add_parser("review", help="run the pre-signature review checks")
    review.add_argument("--firmware", required=True, help="firmware image file")
    review.add_argument("--version", required=True, help="firmware version text")
    review.add_argument("--policy", default=None, help="policy configuration file")
    review.add_argument("--history", default=None, help="last signed version, if any")
    _add_output_format(review)
    review.set_defaults(func=cmd_review)

    bench = sub.add_parser("bench", help="reproduce the size comparison tables")
    bench.add_argument("--payload-sweep", action="store_true")
    bench.add_argument("--cert-sweep", action="store_true")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--skip-large", action="store_true")
    bench.add_argument("--out", default=None, help="report base path")
    _add_output_format(bench)
    bench.set_defaults(func=cmd_bench)

    serve = sub.add_parser("serve", help="run the signing service")
    serve.add_argument("--config", required=True, help="service configuration file")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.set_defaults(func=cmd_serve)

    return parser


def _machine(args) -> bool:
    return getattr(args, "output_format", "human") == "machine"


def cmd_keygen(args) -> int:
    pki = make_test_pki(cert_count=args.cert_count, seed=args.seed)
    paths = write_test_pki(pki, args.out)
    if _machine(args):
        print(json.dumps({name: str(path) for name, path in paths.items()}, sort_keys=True))
    else:
        for name, path in sorted(paths.items()):
            print(f"{name}: {path}")
    return 0


def cmd_sign(args) -> int:
    firmware = Path(args.firmware).read_bytes()
    key = load_private_key_pem(Path(args.key).read_bytes())
    chain = CertificateChain(tuple(load_certificate(p) for p in args.chain))
    alg = algorithm_for_name(args.alg)
    now = args.timestamp if args.timestamp is not None else int(time.time())
    package = FirmwarePackage.build(firmware, args.version)
    blob = package_firmware(package, key, chain, alg, now)
    Path(args.out).write_bytes(blob)
    if _machine(args):
        print(
            json.dumps(
                {
                    "out": args.out,
                    "size": len(blob),
                    "digest": package.digest.hex(),
                    "timestamp": now,
                },
                sort_keys=True,
            )
        )
    else:
        print(f"wrote {args.out} ({len(blob)} bytes, firmware digest {package.digest.hex()})")
    return 0


def cmd_verify(args) -> int:
    packet = Path(args.cose_file).read_bytes()
    trust = TrustStore.load(args.trust)
    now = args.now if args.now is not None else int(time.time())
    report = verify_update(packet, trust, now)
    if _machine(args):
        for name, passed in report.steps:
            print(json.dumps({"step": name, "passed": passed}))
        print(
            json.dumps(
                {
                    "outcome": report.outcome,
                    "reason": report.reason,
                    "anchored_by": report.anchored_by.value,
                    "timestamp": report.timestamp,
                },
                sort_keys=True,
            )
        )
    else:
        print(format_report(report))
    return 0 if report.accepted else 1


def cmd_inspect(args) -> int:
    packet = Path(args.cose_file).read_bytes()
    try:
        message = decode_message(packet)
    except (CborError, ToolkitError) as exc:
        print(f"error: not a readable signed package: {exc}", file=sys.stderr)
        return 3
    try:
        algorithm = algorithm_for_label(message.protected.alg_label).name
    except UnsupportedAlgorithm:
        algorithm = None
    chain = message.unprotected.x5chain
    info = {
        "alg_label": message.protected.alg_label,
        "algorithm": algorithm,
        "timestamp": message.unprotected.timestamp,
        "certificates": [] if chain is None else [c.subject for c in chain.certs],
        "payload_bytes": len(message.payload),
        "canonical": cbor.decode_flagged(packet).canonical,
    }
    try:
        package = decode_payload(message.payload)
        info["version"] = package.version
        info["firmware_bytes"] = len(package.firmware)
        info["firmware_digest"] = package.digest.hex()
    except (CborError, ToolkitError):
        info["version"] = None
    if _machine(args):
        print(json.dumps(info, sort_keys=True))
    else:
        print(f"algorithm: {algorithm or info['alg_label']}")
        print(f"timestamp: {info['timestamp']}")
        for subject in info["certificates"]:
            print(f"certificate: {subject}")
        if info.get("version") is not None:
            print(f"payload: version {info['version']}, "
                  f"{info['firmware_bytes']} firmware bytes, "
                  f"digest {info['firmware_digest']}")
        else:
            print(f"payload: {info['payload_bytes']} bytes (not a firmware map)")
    return 0


def cmd_review(args) -> int:
    firmware = Path(args.firmware).read_bytes()
    policy = load_policy(args.policy) if args.policy else ReviewPolicy()
    report = run_review(firmware, args.version, policy, history=args.history)
    if _machine(args):
        for name, status, detail in report.checks:
            print(json.dumps({"check": name, "status": status, "detail": detail}))
        print(json.dumps({"verdict": report.verdict}))
    else:
        for name, status, detail in report.checks:
            print(f"{name:<18} {status:<5} {detail}")
        print(f"verdict: {report.verdict}")
    return 0 if report.approved else 1


def cmd_bench(args) -> int:
    both = not args.payload_sweep and not args.cert_sweep
    config = BenchConfig(
        seed=args.seed,
        payload_sweep=both or args.payload_sweep,
        cert_sweep=both or args.cert_sweep,
        skip_large=args.skip_large,
        output=Path(args.out) if args.out else None,
    )
    report = run_bench(config)
    if _machine(args):
        sys.stdout.write(report.to_jsonl())
    else:
        sys.stdout.write(report.render_table())
    return 0


def cmd_serve(args) -> int:
    from .service import SigningService, create_app

    config = load_service_config_checked(args.config)
    service = SigningService(
        root=config["root"],
        keys=config["keys"],
        policy=config["policy"],
        max_firmware_bytes=config["max_firmware_bytes"],
    )
    app = create_app(service, config["uploader_token"], config["admin_token"])
    host = args.host if args.host is not None else config["host"]
    port = args.port if args.port is not None else config["port"]
    import uvicorn

    uvicorn.run(app, host=host, port=port)
    return 0


def load_service_config_checked(path: str):
    from .service import load_service_config

    try:
        return load_service_config(path)
    except (KeyError, TypeError) as exc:
        raise ToolkitError(f"invalid service configuration: {exc!r}") from exc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
