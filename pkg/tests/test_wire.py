import pytest
from hypothesis import given
from hypothesis import strategies as st

from capsule import wire
from capsule.errors import ProtocolError
from capsule.wire import Decoder, MsgType, RejectReason


def test_header_layout_is_bit_exact():
    assert wire.encode(MsgType.JOIN) == b"\x01\x01\x00\x00\x00\x00"
    assert wire.encode(MsgType.FRAME, b"abc") == b"\x01\x05\x00\x00\x00\x03abc"


def test_type_codes():
    assert [m.value for m in MsgType] == [1, 2, 3, 4, 5, 6, 7]
    assert [m.name for m in MsgType] == ["JOIN", "JOIN_ACK", "REJECT", "INPUT", "FRAME", "LEAVE", "ENGINE_DOWN"]


def test_bad_headers():
    with pytest.raises(ProtocolError):
        wire.decode_header(b"\x02\x01\x00\x00\x00\x00")
    with pytest.raises(ProtocolError):
        wire.decode_header(b"\x01\x09\x00\x00\x00\x00")
    with pytest.raises(ProtocolError):
        wire.decode_header(b"\x01\x04\xff\xff\xff\xff")


def test_payload_codecs():
    assert wire.parse_join_ack(wire.decode_payload(wire.join_ack(42))) == 42
    reason, predicted, budget = wire.parse_reject(wire.decode_payload(wire.reject(RejectReason.CAPACITY, 40.0, 33.3)))
    assert (reason, predicted, budget) == (RejectReason.CAPACITY, 40.0, 33.3)
    assert wire.parse_input(wire.decode_payload(wire.input_msg(7, "jump", b"\x00\x01"))) == (7, "jump", b"\x00\x01")
    assert wire.parse_frame(wire.decode_payload(wire.frame(3, 2**64 - 1, 1.5))) == (3, 2**64 - 1, 1.5)


def test_short_input_payload():
    with pytest.raises(ProtocolError):
        wire.parse_input(b"\x00")
    with pytest.raises(ProtocolError):
        wire.parse_input(b"\x00" * 8 + b"\x00\x09ab")


@given(st.lists(st.tuples(st.sampled_from(list(MsgType)), st.binary(max_size=64)), max_size=20), st.integers(1, 7))
def test_decoder_reassembles_any_split(messages, chunk):
    stream = b"".join(wire.encode(t, p) for t, p in messages)
    dec = Decoder()
    out = []
    for i in range(0, len(stream), chunk):
        out += dec.feed(stream[i : i + chunk])
    assert [(m.type, m.payload) for m in out] == messages
