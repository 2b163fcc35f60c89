"""Deterministic CBOR encoder/decoder.

Covers the data model the firmware packages need: integers, byte
strings, text strings, arrays, maps, tags, and the simple values
false/true/null.  The encoder always emits the deterministic profile
(shortest-form heads, definite lengths, map keys in ascending
byte-lexicographic order of their encodings).  The decoder additionally
accepts well-formed non-canonical input, indefinite lengths included,
and reports through a flag whether the input was deterministic.

Floating-point items and integers beyond 64 bits are outside the model
and are rejected on both paths.

Format: RFC 8949.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

__all__ = [
    "CborError",
    "MalformedCbor",
    "TrailingBytes",
    "DepthExceeded",
    "DuplicateMapKey",
    "CborValue",
    "UnsignedInt",
    "NegativeInt",
    "ByteString",
    "TextString",
    "Array",
    "Map",
    "Tag",
    "Simple",
    "Decoded",
    "encode",
    "decode",
    "decode_flagged",
    "from_plain",
    "diagnostic",
    "DEFAULT_DEPTH_LIMIT",
]

DEFAULT_DEPTH_LIMIT = 32

_UINT64_MAX = 2**64 - 1
_NEG64_MIN = -(2**64)


class CborError(ValueError):
    """Base class for CBOR model and wire errors."""


class MalformedCbor(CborError):
    """Input is not well-formed CBOR within the supported model."""


class TrailingBytes(CborError):
    """Input continues past the end of the first data item."""


class DepthExceeded(CborError):
    """Nesting is deeper than the configured limit."""


class DuplicateMapKey(CborError):
    """Two map keys share one encoding."""


class CborValue:
    """Base class of the tagged-union data model."""

    __slots__ = ()


@dataclass(frozen=True)
class UnsignedInt(CborValue):
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= _UINT64_MAX:
            raise CborError(f"unsigned integer out of range: {self.value}")


@dataclass(frozen=True)
class NegativeInt(CborValue):
    value: int

    def __post_init__(self):
        if not _NEG64_MIN <= self.value <= -1:
            raise CborError(f"negative integer out of range: {self.value}")


@dataclass(frozen=True)
class ByteString(CborValue):
    value: bytes

    def __post_init__(self):
        if not isinstance(self.value, bytes):
            object.__setattr__(self, "value", bytes(self.value))


@dataclass(frozen=True)
class TextString(CborValue):
    value: str

    def __post_init__(self):
        try:
            self.value.encode("utf-8")
        except UnicodeEncodeError as exc:
            raise CborError(f"text not encodable as UTF-8: {exc}") from exc


@dataclass(frozen=True)
class Array(CborValue):
    items: tuple[CborValue, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))


@dataclass(frozen=True)
class Map(CborValue):
    """Map entries are normalized to canonical key order on construction."""

    entries: tuple[tuple[CborValue, CborValue], ...] = ()

    def __post_init__(self):
        keyed = [(encode(k), (k, v)) for k, v in self.entries]
        keyed.sort(key=lambda pair: pair[0])
        for (a, _), (b, _) in zip(keyed, keyed[1:]):
            if a == b:
                raise DuplicateMapKey(f"duplicate map key encoding {a.hex()}")
        object.__setattr__(self, "entries", tuple(entry for _, entry in keyed))

    def get(self, key: CborValue) -> CborValue | None:
        for k, v in self.entries:
            if k == key:
                return v
        return None


@dataclass(frozen=True)
class Tag(CborValue):
    number: int
    inner: CborValue

    def __post_init__(self):
        if not 0 <= self.number <= _UINT64_MAX:
            raise CborError(f"tag number out of range: {self.number}")


@dataclass(frozen=True)
class Simple(CborValue):
    """Exactly false, true, or null."""

    value: bool | None

    def __post_init__(self):
        if self.value is not None and not isinstance(self.value, bool):
            raise CborError(f"unsupported simple value: {self.value!r}")


@dataclass(frozen=True)
class Decoded:
    value: CborValue
    canonical: bool


# --- encoding ---------------------------------------------------------------

def _head(major: int, argument: int) -> bytes:
    base = major << 5
    if argument < 24:
        return bytes((base | argument,))
    if argument <= 0xFF:
        return bytes((base | 24, argument))
    if argument <= 0xFFFF:
        return struct.pack(">BH", base | 25, argument)
    if argument <= 0xFFFFFFFF:
        return struct.pack(">BI", base | 26, argument)
    return struct.pack(">BQ", base | 27, argument)


def _encode_into(value: CborValue, out: bytearray) -> None:
    if isinstance(value, UnsignedInt):
        out += _head(0, value.value)
    elif isinstance(value, NegativeInt):
        out += _head(1, -1 - value.value)
    elif isinstance(value, ByteString):
        out += _head(2, len(value.value))
        out += value.value
    elif isinstance(value, TextString):
        raw = value.value.encode("utf-8")
        out += _head(3, len(raw))
        out += raw
    elif isinstance(value, Array):
        out += _head(4, len(value.items))
        for item in value.items:
            _encode_into(item, out)
    elif isinstance(value, Map):
        out += _head(5, len(value.entries))
        for k, v in value.entries:
            _encode_into(k, out)
            _encode_into(v, out)
    elif isinstance(value, Tag):
        out += _head(6, value.number)
        _encode_into(value.inner, out)
    elif isinstance(value, Simple):
        out += b"\xf4" if value.value is False else b"\xf5" if value.value is True else b"\xf6"
    else:
        raise CborError(f"not a CborValue: {value!r}")


def encode(value: CborValue) -> bytes:
    """Deterministic encoding of a CborValue."""
    out = bytearray()
    _encode_into(value, out)
    return bytes(out)


# --- decoding ---------------------------------------------------------------

_BREAK = object()


class _Decoder:
    def __init__(self, data: bytes, depth_limit: int):
        self.data = data
        self.pos = 0
        self.depth_limit = depth_limit
        self.canonical = True

    def _need(self, n: int) -> None:
        if self.pos + n > len(self.data):
            raise MalformedCbor("truncated input")

    def _argument(self, info: int) -> int:
        if info < 24:
            return info
        if info == 24:
            self._need(1)
            value = self.data[self.pos]
            self.pos += 1
            if value < 24:
                self.canonical = False
            return value
        if info == 25:
            self._need(2)
            value = struct.unpack_from(">H", self.data, self.pos)[0]
            self.pos += 2
            if value <= 0xFF:
                self.canonical = False
            return value
        if info == 26:
            self._need(4)
            value = struct.unpack_from(">I", self.data, self.pos)[0]
            self.pos += 4
            if value <= 0xFFFF:
                self.canonical = False
            return value
        if info == 27:
            self._need(8)
            value = struct.unpack_from(">Q", self.data, self.pos)[0]
            self.pos += 8
            if value <= 0xFFFFFFFF:
                self.canonical = False
            return value
        raise MalformedCbor(f"reserved additional information {info}")

    def _bytes(self, n: int) -> bytes:
        self._need(n)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return bytes(out)

    def _text(self, raw: bytes) -> str:
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedCbor(f"invalid UTF-8 in text string: {exc}") from exc

    def _string_chunks(self, major: int) -> bytes:
        # indefinite-length string: definite chunks of the same major type
        self.canonical = False
        parts = bytearray()
        while True:
            self._need(1)
            first = self.data[self.pos]
            self.pos += 1
            if first == 0xFF:
                return bytes(parts)
            if first >> 5 != major:
                raise MalformedCbor("indefinite string chunk of wrong type")
            info = first & 0x1F
            if info == 31:
                raise MalformedCbor("nested indefinite string chunk")
            parts += self._bytes(self._argument(info))

    def item(self, depth: int, allow_break: bool = False):
        self._need(1)
        first = self.data[self.pos]
        self.pos += 1
        major, info = first >> 5, first & 0x1F

        if first == 0xFF:
            if allow_break:
                return _BREAK
            raise MalformedCbor("break outside indefinite-length item")

        if major == 0:
            if info == 31:
                raise MalformedCbor("indefinite length on integer")
            return UnsignedInt(self._argument(info))
        if major == 1:
            if info == 31:
                raise MalformedCbor("indefinite length on integer")
            return NegativeInt(-1 - self._argument(info))
        if major == 2:
            if info == 31:
                return ByteString(self._string_chunks(2))
            return ByteString(self._bytes(self._argument(info)))
        if major == 3:
            if info == 31:
                return TextString(self._text(self._string_chunks(3)))
            return TextString(self._text(self._bytes(self._argument(info))))
        if major in (4, 5, 6) and depth > self.depth_limit:
            raise DepthExceeded(f"nesting deeper than {self.depth_limit}")
        if major == 4:
            if info == 31:
                self.canonical = False
                items = []
                while (item := self.item(depth + 1, allow_break=True)) is not _BREAK:
                    items.append(item)
                return Array(tuple(items))
            count = self._argument(info)
            return Array(tuple(self.item(depth + 1) for _ in range(count)))
        if major == 5:
            if info == 31:
                self.canonical = False
                pairs = []
                while (key := self.item(depth + 1, allow_break=True)) is not _BREAK:
                    pairs.append((key, self.item(depth + 1)))
            else:
                count = self._argument(info)
                pairs = [
                    (self.item(depth + 1), self.item(depth + 1)) for _ in range(count)
                ]
            return self._map(pairs)
        if major == 6:
            if info == 31:
                raise MalformedCbor("indefinite length on tag")
            return Tag(self._argument(info), self.item(depth + 1))
        # major 7
        if first == 0xF4:
            return Simple(False)
        if first == 0xF5:
            return Simple(True)
        if first == 0xF6:
            return Simple(None)
        if first in (0xF9, 0xFA, 0xFB):
            raise MalformedCbor("floating-point items are outside the supported model")
        raise MalformedCbor(f"unsupported simple or reserved head 0x{first:02x}")

    def _map(self, pairs: list[tuple[CborValue, CborValue]]) -> Map:
        encoded_keys = [encode(k) for k, _ in pairs]
        if encoded_keys != sorted(encoded_keys):
            self.canonical = False
        try:
            return Map(tuple(pairs))
        except DuplicateMapKey as exc:
            raise MalformedCbor(str(exc)) from exc


def decode_flagged(data: bytes, *, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> Decoded:
    """Decode one complete data item, reporting canonicality."""
    if not data:
        raise MalformedCbor("empty input")
    decoder = _Decoder(bytes(data), depth_limit)
    value = decoder.item(1)
    if decoder.pos != len(decoder.data):
        raise TrailingBytes(
            f"{len(decoder.data) - decoder.pos} bytes after the data item"
        )
    return Decoded(value, decoder.canonical)


def decode(data: bytes, *, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> CborValue:
    """Decode one complete data item."""
    return decode_flagged(data, depth_limit=depth_limit).value


# --- conveniences -----------------------------------------------------------

def from_plain(obj) -> CborValue:
    """Build a CborValue from plain Python data (no tags, no floats)."""
    if isinstance(obj, CborValue):
        return obj
    if isinstance(obj, bool) or obj is None:
        return Simple(obj)
    if isinstance(obj, int):
        return UnsignedInt(obj) if obj >= 0 else NegativeInt(obj)
    if isinstance(obj, (bytes, bytearray)):
        return ByteString(bytes(obj))
    if isinstance(obj, str):
        return TextString(obj)
    if isinstance(obj, (list, tuple)):
        return Array(tuple(from_plain(item) for item in obj))
    if isinstance(obj, dict):
        return Map(tuple((from_plain(k), from_plain(v)) for k, v in obj.items()))
    raise CborError(f"cannot represent {type(obj).__name__} in the CBOR model")


def diagnostic(value: CborValue) -> str:
    """Render a CborValue in CBOR diagnostic notation."""
    if isinstance(value, (UnsignedInt, NegativeInt)):
        return str(value.value)
    if isinstance(value, ByteString):
        return f"h'{value.value.hex()}'"
    if isinstance(value, TextString):
        escaped = value.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, Array):
        return "[" + ", ".join(diagnostic(item) for item in value.items) + "]"
    if isinstance(value, Map):
        body = ", ".join(f"{diagnostic(k)}: {diagnostic(v)}" for k, v in value.entries)
        return "{" + body + "}"
    if isinstance(value, Tag):
        return f"{value.number}({diagnostic(value.inner)})"
    if isinstance(value, Simple):
        return {False: "false", True: "true", None: "null"}[value.value]
    raise CborError(f"not a CborValue: {value!r}")
