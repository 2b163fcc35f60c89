"""Size and timing benchmark over both encapsulations.

Two sweeps: payload size at a fixed two-certificate chain, and chain
length at empty payload.  Sizes are deterministic for a given seed;
the sign and verify timings are wall-clock and informational only.
Rows above the large-row threshold can be skipped for constrained
machines, and a skipped row stays visible in the report.
"""
from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from .crypto import ECDSA_P256_SHA256, SigningAlgorithm
from .envelope import decode_message
from .errors import ResourceExceeded
from .json_baseline import encapsulate_json
from .packager import FirmwarePackage, package_firmware
from .testpki import DEFAULT_NOW, make_test_pki
from .verifier import verify_update

__all__ = ["BenchConfig", "BenchRow", "BenchReport", "run_bench"]

DEFAULT_PAYLOAD_SIZES = (1, 1024, 100 * 1024, 1024 * 1024, 100 * 1024 * 1024)
DEFAULT_CERT_COUNTS = (1, 2, 3)
LARGE_ROW_THRESHOLD = 10 * 1024 * 1024


@dataclass(frozen=True)
class BenchConfig:
    payload_sizes: tuple[int, ...] = DEFAULT_PAYLOAD_SIZES
    cert_counts: tuple[int, ...] = DEFAULT_CERT_COUNTS
    alg: SigningAlgorithm = ECDSA_P256_SHA256
    seed: int = 0
    output: Path | None = None
    payload_sweep: bool = True
    cert_sweep: bool = True
    payload_sweep_cert_count: int = 2
    skip_large: bool = False
    large_threshold: int = LARGE_ROW_THRESHOLD

    def __post_init__(self):
        if any(size < 0 for size in self.payload_sizes):
            raise ValueError("payload sizes must be non-negative")
        if any(count < 1 for count in self.cert_counts):
            raise ValueError("certificate counts must be at least 1")
        object.__setattr__(self, "payload_sizes", tuple(self.payload_sizes))
        object.__setattr__(self, "cert_counts", tuple(self.cert_counts))


@dataclass(frozen=True)
class BenchRow:
    sweep: str
    payload_size: int
    cert_count: int
    cose_size: int | None
    json_size: int | None
    ratio: float | None
    sign_time: float | None
    verify_time: float | None
    skipped: bool = False

    def as_record(self) -> dict:
        return {
            "sweep": self.sweep,
            "payload_size": self.payload_size,
            "cert_count": self.cert_count,
            "cose_size": self.cose_size,
            "json_size": self.json_size,
            "ratio": self.ratio,
            "sign_time": self.sign_time,
            "verify_time": self.verify_time,
            "skipped": self.skipped,
        }


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]
    environment: dict = field(compare=False)

    def payload_rows(self) -> list[BenchRow]:
        return [row for row in self.rows if row.sweep == "payload"]

    def cert_rows(self) -> list[BenchRow]:
        return [row for row in self.rows if row.sweep == "cert"]

    def to_jsonl(self) -> str:
        lines = [json.dumps({"environment": self.environment}, sort_keys=True)]
        lines.extend(json.dumps(row.as_record(), sort_keys=True) for row in self.rows)
        return "\n".join(lines) + "\n"

    def render_table(self) -> str:
        lines = []
        if self.payload_rows():
            lines.append(f"payload sweep (chain of {self.environment['payload_sweep_cert_count']})")
            lines.append(f"{'payload':>12} {'cose':>12} {'json':>12} {'ratio':>7} {'sign(s)':>9} {'verify(s)':>9}")
            for row in self.payload_rows():
                lines.append(_render_row(f"{row.payload_size:>12}", row))
        if self.cert_rows():
            if lines:
                lines.append("")
            lines.append("certificate sweep (empty payload)")
            lines.append(f"{'certs':>12} {'cose':>12} {'json':>12} {'ratio':>7} {'sign(s)':>9} {'verify(s)':>9}")
            for row in self.cert_rows():
                lines.append(_render_row(f"{row.cert_count:>12}", row))
        return "\n".join(lines) + "\n"


def _render_row(prefix: str, row: BenchRow) -> str:
    if row.skipped:
        return f"{prefix} {'skipped':>12} {'-':>12} {'-':>7} {'-':>9} {'-':>9}"
    return (
        f"{prefix} {row.cose_size:>12} {row.json_size:>12} {row.ratio:>7.3f} "
        f"{row.sign_time:>9.4f} {row.verify_time:>9.4f}"
    )


def _measure(sweep: str, payload_size: int, cert_count: int, config: BenchConfig) -> BenchRow:
    if config.skip_large and payload_size > config.large_threshold:
        return BenchRow(sweep, payload_size, cert_count, None, None, None, None, None, True)
    try:
        rng = random.Random(f"bench:{config.seed}:{payload_size}:{cert_count}")
        pki = make_test_pki(cert_count=cert_count, seed=config.seed)
        package = FirmwarePackage.build(rng.randbytes(payload_size), "1.0.0")
        started = time.perf_counter()
        blob = package_firmware(package, pki.leaf_key, pki.chain, config.alg, DEFAULT_NOW)
        sign_time = time.perf_counter() - started
        started = time.perf_counter()
        report = verify_update(blob, pki.trust_store, DEFAULT_NOW)
        verify_time = time.perf_counter() - started
        if not report.accepted:
            raise RuntimeError(f"benchmark verification rejected: {report.reason}")
        json_size = len(encapsulate_json(decode_message(blob)))
    except MemoryError as exc:
        raise ResourceExceeded(
            f"row payload={payload_size} cert_count={cert_count} exhausted memory"
        ) from exc
    return BenchRow(
        sweep=sweep,
        payload_size=payload_size,
        cert_count=cert_count,
        cose_size=len(blob),
        json_size=json_size,
        ratio=round(len(blob) / json_size, 3),
        sign_time=sign_time,
        verify_time=verify_time,
    )


def run_bench(config: BenchConfig) -> BenchReport:
    rows: list[BenchRow] = []
    if config.payload_sweep:
        for size in config.payload_sizes:
            rows.append(_measure("payload", size, config.payload_sweep_cert_count, config))
    if config.cert_sweep:
        for count in config.cert_counts:
            rows.append(_measure("cert", 0, count, config))
    cert_sizes = {
        count: [len(c.der_bytes) for c in make_test_pki(cert_count=count, seed=config.seed).chain.certs]
        for count in sorted({config.payload_sweep_cert_count, *config.cert_counts})
    }
    report = BenchReport(
        rows=tuple(rows),
        environment={
            "seed": config.seed,
            "alg": config.alg.name,
            "payload_sweep_cert_count": config.payload_sweep_cert_count,
            "cert_der_sizes": cert_sizes,
            "skip_large": config.skip_large,
        },
    )
    if config.output is not None:
        base = Path(config.output)
        base.parent.mkdir(parents=True, exist_ok=True)
        (base.parent / (base.name + ".jsonl")).write_text(report.to_jsonl())
        (base.parent / (base.name + ".txt")).write_text(report.render_table())
    return report
