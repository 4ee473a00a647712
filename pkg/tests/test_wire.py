import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmmkit.errors import MalformedFrame, ModulusMismatch, UnknownTag
from pmmkit.ff import MERSENNE61
from pmmkit.matrix import random_matrix
from pmmkit.wire import FRAME_HEADER, Message, Mode, Tag, decode_payload, wire_decode, wire_encode

P = MERSENNE61


def test_hello_frames():
    bare = wire_encode(Message(Tag.HELLO))
    assert len(bare) == 13 and bare[0] == 1 and bare[9:] == b"PMM1"
    full = wire_encode(Message(Tag.HELLO, modulus=P))
    assert len(full) == 21
    assert wire_decode(full).modulus == P
    assert wire_decode(bare, modulus=P).modulus is None
    with pytest.raises(ModulusMismatch):
        wire_decode(full, modulus=97)


def test_header_layout():
    frame = wire_encode(Message(Tag.COMPUTE, nonce=5))
    assert FRAME_HEADER.unpack_from(frame) == (4, 8)
    assert frame[9:] == (5).to_bytes(8, "little")


@pytest.mark.parametrize("tag", [Tag.SHARE, Tag.RESPONSE])
def test_matrix_frames_roundtrip(tag):
    mats = [random_matrix(2, 3, 1, P), random_matrix(1, 1, 2, P)]
    msg = wire_decode(wire_encode(Message(tag, matrices=mats), P), P)
    assert msg.tag is tag and all(np.array_equal(a, b) for a, b in zip(mats, msg.matrices))


def test_query_and_misc_roundtrip():
    q = random_matrix(3, 2, 4, P)
    msg = wire_decode(wire_encode(Message(Tag.QUERY, matrices=[q, q], mode=Mode.FPMM), P))
    assert msg.mode is Mode.FPMM and len(msg.matrices) == 2
    assert wire_decode(wire_encode(Message(Tag.COMPUTE))).nonce is None
    assert wire_decode(wire_encode(Message(Tag.ERROR, text="bad shape"))).text == "bad shape"


def test_truncation_and_garbage():
    frame = wire_encode(Message(Tag.SHARE, matrices=[random_matrix(2, 2, 0, P)]), P)
    for cut in (0, 5, 9, len(frame) - 1):
        with pytest.raises(MalformedFrame):
            wire_decode(frame[:cut])
    with pytest.raises(MalformedFrame):
        wire_decode(frame + b"\x00")
    with pytest.raises(UnknownTag):
        wire_decode(FRAME_HEADER.pack(0x7F, 0))
    with pytest.raises(MalformedFrame):
        decode_payload(Tag.QUERY, b"")
    with pytest.raises(MalformedFrame):
        decode_payload(Tag.QUERY, b"\x09")
    with pytest.raises(MalformedFrame):
        decode_payload(Tag.HELLO, b"PMM2")
    with pytest.raises(MalformedFrame):
        decode_payload(Tag.COMPUTE, b"\x01\x02")


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(1, 4), cols=st.integers(1, 4), count=st.integers(0, 3),
    seed=st.integers(0, 2**32 - 1), p=st.sampled_from([5, 97, 65537, P]),
)
def test_roundtrip_property(rows, cols, count, seed, p):
    mats = [random_matrix(rows, cols, seed + i, p) for i in range(count)]
    frame = wire_encode(Message(Tag.RESPONSE, matrices=mats), p)
    back = wire_decode(frame, p)
    assert len(back.matrices) == count
    assert all(np.array_equal(a, b) for a, b in zip(mats, back.matrices))
