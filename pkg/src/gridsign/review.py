"""Pre-signature review pipeline.

Built-in checks (size limit, digest denylist, version monotonicity,
entropy estimate) run in a fixed order, then any configured external
scanner plugins.  A failing check rejects; warnings never block.  The
entropy check in particular can only warn: high entropy hints at
packed or encrypted content but proves nothing by itself.
"""
from __future__ import annotations

import importlib
import io
import json
import math
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Callable

from .crypto import digest
from .errors import PluginFailure

__all__ = [
    "PASS",
    "FAIL",
    "WARN",
    "APPROVED",
    "REJECTED",
    "CHECK_SIZE",
    "CHECK_DENYLIST",
    "CHECK_MONOTONIC",
    "CHECK_ENTROPY",
    "CheckPlugin",
    "ReviewPolicy",
    "ReviewReport",
    "run_review",
    "compare_versions",
    "shannon_entropy",
    "load_policy",
]

PASS = "pass"
FAIL = "fail"
WARN = "warn"

APPROVED = "approved"
REJECTED = "rejected"

CHECK_SIZE = "size_limit"
CHECK_DENYLIST = "digest_denylist"
CHECK_MONOTONIC = "version_monotonic"
CHECK_ENTROPY = "entropy"

DEFAULT_MAX_SIZE_BYTES = 128 * 1024 * 1024
DEFAULT_ENTROPY_THRESHOLD = 7.5

PluginHook = Callable[[bytes, int, str, BinaryIO], "tuple[str, str]"]


@dataclass(frozen=True)
class CheckPlugin:
    """Named scanner hook: (digest, size, version, stream) -> (status, detail)."""

    name: str
    hook: PluginHook
    deterministic: bool = True


@dataclass(frozen=True)
class ReviewPolicy:
    max_size_bytes: int = DEFAULT_MAX_SIZE_BYTES
    digest_denylist: frozenset[bytes] = frozenset()
    require_version_monotonic: bool = True
    entropy_warning_threshold: float = DEFAULT_ENTROPY_THRESHOLD
    external_scanners: tuple[CheckPlugin, ...] = ()

    def __post_init__(self):
        if self.max_size_bytes <= 0:
            raise ValueError("max_size_bytes must be positive")
        if not 0 <= self.entropy_warning_threshold <= 8:
            raise ValueError("entropy threshold must lie in [0, 8] bits per byte")
        entries = frozenset(self.digest_denylist)
        for entry in entries:
            if not isinstance(entry, bytes) or len(entry) != 32:
                raise ValueError("denylist entries must be 32-octet digests")
        object.__setattr__(self, "digest_denylist", entries)
        object.__setattr__(self, "external_scanners", tuple(self.external_scanners))


@dataclass(frozen=True)
class ReviewReport:
    """Ordered check results; approved iff no check failed."""

    checks: tuple[tuple[str, str, str], ...]
    verdict: str

    def __post_init__(self):
        expected = REJECTED if any(s == FAIL for _, s, _ in self.checks) else APPROVED
        if self.verdict != expected:
            raise ValueError(f"verdict {self.verdict!r} contradicts the check results")

    @property
    def approved(self) -> bool:
        return self.verdict == APPROVED


def compare_versions(a: str, b: str) -> int:
    """Dotted version order: numeric segments by value, others by text."""
    left_parts, right_parts = a.split("."), b.split(".")
    for left, right in zip(left_parts, right_parts):
        if left == right:
            continue
        if left.isdigit() and right.isdigit():
            li, ri = int(left), int(right)
            if li == ri:
                continue
            return -1 if li < ri else 1
        return -1 if left < right else 1
    if len(left_parts) != len(right_parts):
        return -1 if len(left_parts) < len(right_parts) else 1
    return 0


def shannon_entropy(data: bytes) -> float:
    """Empirical byte entropy in bits per byte; 0.0 for empty input."""
    if not data:
        return 0.0
    n = len(data)
    return -sum((c / n) * math.log2(c / n) for c in Counter(data).values())


_nondet_cache: dict[tuple[str, bytes, int, str], tuple[str, str, str]] = {}
_nondet_lock = threading.Lock()


def _run_plugin(
    plugin: CheckPlugin, fw_digest: bytes, size: int, version: str, firmware: bytes
) -> tuple[str, str, str]:
    """A crashing or misbehaving plugin fails its check, nothing more."""
    key = (plugin.name, fw_digest, size, version)
    if not plugin.deterministic:
        with _nondet_lock:
            if key in _nondet_cache:
                return _nondet_cache[key]
    try:
        status, detail = plugin.hook(fw_digest, size, version, io.BytesIO(firmware))
    except Exception as exc:
        result = (plugin.name, FAIL, f"PluginFailure: {type(exc).__name__}: {exc}")
    else:
        if status not in (PASS, FAIL, WARN):
            result = (plugin.name, FAIL, f"PluginFailure: invalid status {status!r}")
        else:
            result = (plugin.name, status, str(detail))
    if not plugin.deterministic:
        with _nondet_lock:
            _nondet_cache[key] = result
    return result


def run_review(
    firmware: bytes,
    version: str,
    policy: ReviewPolicy,
    history: str | None = None,
) -> ReviewReport:
    checks: list[tuple[str, str, str]] = []
    size = len(firmware)

    if size <= policy.max_size_bytes:
        checks.append((CHECK_SIZE, PASS, f"{size} bytes within limit {policy.max_size_bytes}"))
    else:
        checks.append((CHECK_SIZE, FAIL, f"{size} bytes exceeds limit {policy.max_size_bytes}"))

    fw_digest = digest(firmware)
    if fw_digest in policy.digest_denylist:
        checks.append((CHECK_DENYLIST, FAIL, f"digest {fw_digest.hex()} is denylisted"))
    else:
        checks.append((CHECK_DENYLIST, PASS, "digest not on the denylist"))

    if policy.require_version_monotonic:
        if history is None:
            checks.append((CHECK_MONOTONIC, PASS, "no previously signed version"))
        elif compare_versions(version, history) > 0:
            checks.append((CHECK_MONOTONIC, PASS, f"{version} > {history}"))
        else:
            checks.append(
                (CHECK_MONOTONIC, FAIL, f"{version} does not exceed last signed {history}")
            )

    entropy = shannon_entropy(firmware)
    if entropy > policy.entropy_warning_threshold:
        checks.append(
            (
                CHECK_ENTROPY,
                WARN,
                f"{entropy:.2f} bits/byte above threshold "
                f"{policy.entropy_warning_threshold}; content may be packed",
            )
        )
    else:
        checks.append((CHECK_ENTROPY, PASS, f"{entropy:.2f} bits/byte"))

    for plugin in policy.external_scanners:
        checks.append(_run_plugin(plugin, fw_digest, size, version, firmware))

    verdict = REJECTED if any(s == FAIL for _, s, _ in checks) else APPROVED
    return ReviewReport(checks=tuple(checks), verdict=verdict)


def _load_plugin(ref: str) -> CheckPlugin:
    """Resolve a module:attribute reference to a CheckPlugin."""
    module_name, _, attr = ref.partition(":")
    if not module_name or not attr:
        raise PluginFailure(f"scanner reference must be module:attribute, got {ref!r}")
    try:
        module = importlib.import_module(module_name)
        target = getattr(module, attr)
    except Exception as exc:
        raise PluginFailure(f"cannot load scanner {ref!r}: {exc}") from exc
    if isinstance(target, CheckPlugin):
        return target
    if callable(target):
        return CheckPlugin(name=attr, hook=target)
    raise PluginFailure(f"scanner {ref!r} is not callable")


def load_policy(path: str | Path) -> ReviewPolicy:
    """Read policy configuration from a JSON file.

    Schema: max_size_bytes (int), digest_denylist_path (optional text,
    relative to the config file, one hex digest per line, # comments),
    require_version_monotonic (bool), entropy_warning_threshold
    (number), external_scanners (list of module:attribute texts).
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    denylist: set[bytes] = set()
    deny_ref = raw.get("digest_denylist_path")
    if deny_ref:
        for line in (path.parent / deny_ref).read_text().splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                denylist.add(bytes.fromhex(line))
    return ReviewPolicy(
        max_size_bytes=raw.get("max_size_bytes", DEFAULT_MAX_SIZE_BYTES),
        digest_denylist=frozenset(denylist),
        require_version_monotonic=raw.get("require_version_monotonic", True),
        entropy_warning_threshold=raw.get(
            "entropy_warning_threshold", DEFAULT_ENTROPY_THRESHOLD
        ),
        external_scanners=tuple(
            _load_plugin(ref) for ref in raw.get("external_scanners", [])
        ),
    )
