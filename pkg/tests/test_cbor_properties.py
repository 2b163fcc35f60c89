"""Property tests for the CBOR codec."""
from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsign import cbor
from oracles import RefTag, ref_encode

# Plain-value strategy mirrored into both encoders.  Text keeps to
# codepoints below the surrogate range; dict keys stay scalar so the
# reference encoder can hold them.
_scalars = st.one_of(
    st.integers(min_value=-(2**64), max_value=2**64 - 1),
    st.binary(max_size=48),
    st.text(
        alphabet=st.characters(max_codepoint=0x10FFFF, exclude_categories=["Cs"]),
        max_size=24,
    ),
    st.booleans(),
    st.none(),
)


def _extend(children):
    return st.one_of(
        st.lists(children, max_size=6),
        st.dictionaries(
            st.one_of(
                st.integers(min_value=-(2**32), max_value=2**32),
                st.text(max_size=8),
                st.binary(max_size=8),
            ),
            children,
            max_size=6,
        ),
        st.builds(
            RefTag,
            st.integers(min_value=0, max_value=2**32),
            children,
        ),
    )


plain_values = st.recursive(_scalars, _extend, max_leaves=24)


def as_cbor(plain) -> cbor.CborValue:
    if isinstance(plain, RefTag):
        return cbor.Tag(plain.number, as_cbor(plain.inner))
    if isinstance(plain, (list, tuple)):
        return cbor.Array(tuple(as_cbor(item) for item in plain))
    if isinstance(plain, dict):
        return cbor.Map(tuple((as_cbor(k), as_cbor(v)) for k, v in plain.items()))
    return cbor.from_plain(plain)


@given(plain_values)
def test_encoder_matches_reference_implementation(plain):
    assert cbor.encode(as_cbor(plain)) == ref_encode(plain)


@given(plain_values)
def test_roundtrip(plain):
    value = as_cbor(plain)
    assert cbor.decode(cbor.encode(value)) == value


@given(plain_values)
def test_deterministic_and_idempotent(plain):
    value = as_cbor(plain)
    wire = cbor.encode(value)
    assert cbor.encode(value) == wire
    assert cbor.encode(cbor.decode(wire)) == wire


@given(plain_values)
def test_canonical_flag_true_for_own_output(plain):
    wire = cbor.encode(as_cbor(plain))
    assert cbor.decode_flagged(wire).canonical


@settings(max_examples=300)
@given(st.binary(max_size=64))
def test_arbitrary_bytes_never_crash(data):
    try:
        cbor.decode(data)
    except cbor.CborError:
        pass


def test_mutated_valid_encodings_never_crash():
    rng = random.Random(0x5EED)
    seeds = [
        cbor.encode(as_cbor(obj))
        for obj in (
            {"fw": b"\x00" * 40, "version": "1.2.3", "digest": b"\xaa" * 32},
            [1, [2, [3, [4]]], {"a": [True, None, False]}],
            RefTag(18, [b"\xa1\x01\x26", {}, b"payload", b"\x00" * 64]),
            list(range(100)),
        )
    ]
    for _ in range(4000):
        base = bytearray(rng.choice(seeds))
        for _ in range(rng.randint(1, 5)):
            base[rng.randrange(len(base))] = rng.randrange(256)
        try:
            cbor.decode(bytes(base))
        except cbor.CborError:
            pass


def test_depth_limit_default():
    wire = b"\x81" * 32 + b"\x00"
    value = cbor.decode(wire)
    for _ in range(32):
        assert isinstance(value, cbor.Array)
        value = value.items[0]
    assert value == cbor.UnsignedInt(0)
    with pytest.raises(cbor.DepthExceeded):
        cbor.decode(b"\x81" * 33 + b"\x00")


def test_depth_limit_configurable():
    wire = b"\x81" * 5 + b"\x00"
    with pytest.raises(cbor.DepthExceeded):
        cbor.decode(wire, depth_limit=4)
    assert cbor.decode(wire, depth_limit=6)


def test_indefinite_depth_counts_toward_limit():
    wire = b"\x9f" * 33 + b"\x00" + b"\xff" * 33
    with pytest.raises(cbor.DepthExceeded):
        cbor.decode(wire)


def test_encode_rejects_out_of_range_integers():
    with pytest.raises(cbor.CborError):
        cbor.UnsignedInt(2**64)
    with pytest.raises(cbor.CborError):
        cbor.NegativeInt(-(2**64) - 1)
    with pytest.raises(cbor.CborError):
        cbor.NegativeInt(0)


def test_encode_rejects_floats():
    with pytest.raises(cbor.CborError):
        cbor.from_plain(1.5)


def test_duplicate_keys_rejected_at_construction():
    with pytest.raises(cbor.DuplicateMapKey):
        cbor.Map(
            (
                (cbor.UnsignedInt(1), cbor.UnsignedInt(2)),
                (cbor.UnsignedInt(1), cbor.UnsignedInt(3)),
            )
        )


def test_map_normalizes_key_order():
    entries = (
        (cbor.TextString("b"), cbor.UnsignedInt(2)),
        (cbor.TextString("a"), cbor.UnsignedInt(1)),
    )
    ordered = cbor.Map(entries)
    assert [k.value for k, _ in ordered.entries] == ["a", "b"]
    assert ordered.get(cbor.TextString("b")) == cbor.UnsignedInt(2)
    assert ordered.get(cbor.TextString("zz")) is None


def test_huge_length_head_does_not_allocate():
    # 8-byte head promising 2^60 bytes must fail fast as truncated
    with pytest.raises(cbor.MalformedCbor):
        cbor.decode(b"\x5b\x10\x00\x00\x00\x00\x00\x00\x00")


def test_diagnostic_rendering():
    value = cbor.from_plain({"a": [1, -2, b"\x01", True, None]})
    assert cbor.diagnostic(value) == '{"a": [1, -2, h\'01\', true, null]}'
    assert cbor.diagnostic(cbor.Tag(18, cbor.Array((cbor.UnsignedInt(0),)))) == "18([0])"
