"""Binary length-prefixed wire format.

Every message is ``version:u8 | type:u8 | length:u32be | payload``.
"""

from __future__ import annotations

import struct
from enum import IntEnum
from typing import NamedTuple

from .errors import ProtocolError

VERSION = 1
HEADER = struct.Struct(">BBI")
MAX_PAYLOAD = 1 << 20


class MsgType(IntEnum):
    JOIN = 1
    JOIN_ACK = 2
    REJECT = 3
    INPUT = 4
    FRAME = 5
    LEAVE = 6
    ENGINE_DOWN = 7


class RejectReason(IntEnum):
    CAPACITY = 1
    ENGINE_DOWN = 2
    MAX_CONNECTIONS = 3
    PROTOCOL = 4
    NOT_JOINED = 5
    QUEUE_OVERFLOW = 6


class Message(NamedTuple):
    type: MsgType
    payload: bytes


_JOIN_ACK = struct.Struct(">Q")
_REJECT = struct.Struct(">Bdd")
_INPUT_HEAD = struct.Struct(">QH")
_FRAME = struct.Struct(">QQd")


def encode(msg_type: MsgType, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return HEADER.pack(VERSION, int(msg_type), len(payload)) + payload


def decode_header(header: bytes) -> tuple[MsgType, int]:
    version, raw_type, length = HEADER.unpack(header)
    if version != VERSION:
        raise ProtocolError(f"unsupported wire version {version}")
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise ProtocolError(f"unknown message type {raw_type}") from None
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"declared length {length} exceeds {MAX_PAYLOAD}")
    return msg_type, length


class Decoder:
    """Incremental decoder for byte streams captured off a socket."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message]:
        self._buf += data
        out = []
        while len(self._buf) >= HEADER.size:
            msg_type, length = decode_header(bytes(self._buf[: HEADER.size]))
            end = HEADER.size + length
            if len(self._buf) < end:
                break
            out.append(Message(msg_type, bytes(self._buf[HEADER.size : end])))
            del self._buf[:end]
        return out


def decode_payload(data: bytes) -> bytes:
    """Payload of one complete encoded message."""
    _, length = decode_header(data[: HEADER.size])
    if len(data) != HEADER.size + length:
        raise ProtocolError(f"expected {HEADER.size + length} bytes, got {len(data)}")
    return data[HEADER.size :]


async def read_message(reader) -> Message:
    header = await reader.readexactly(HEADER.size)
    msg_type, length = decode_header(header)
    payload = await reader.readexactly(length) if length else b""
    return Message(msg_type, payload)


# -- payloads ----------------------------------------------------------------


def join_ack(player: int) -> bytes:
    return encode(MsgType.JOIN_ACK, _JOIN_ACK.pack(player))


def parse_join_ack(payload: bytes) -> int:
    return _JOIN_ACK.unpack(payload)[0]


def reject(reason: RejectReason, predicted_ms: float = 0.0, budget_ms: float = 0.0) -> bytes:
    return encode(MsgType.REJECT, _REJECT.pack(int(reason), predicted_ms, budget_ms))


def parse_reject(payload: bytes) -> tuple[RejectReason, float, float]:
    reason, predicted, budget = _REJECT.unpack(payload)
    return RejectReason(reason), predicted, budget


def input_msg(client_seq: int, name: str, payload: bytes = b"") -> bytes:
    raw = name.encode()
    return encode(MsgType.INPUT, _INPUT_HEAD.pack(client_seq, len(raw)) + raw + payload)


def parse_input(payload: bytes) -> tuple[int, str, bytes]:
    if len(payload) < _INPUT_HEAD.size:
        raise ProtocolError("short INPUT payload")
    seq, name_len = _INPUT_HEAD.unpack_from(payload)
    start = _INPUT_HEAD.size
    if len(payload) < start + name_len:
        raise ProtocolError("INPUT name overruns payload")
    try:
        name = payload[start : start + name_len].decode()
    except UnicodeDecodeError:
        raise ProtocolError("INPUT name is not UTF-8") from None
    return seq, name, payload[start + name_len :]


def frame(tick: int, digest: int, tick_model_ms: float) -> bytes:
    return encode(MsgType.FRAME, _FRAME.pack(tick, digest, tick_model_ms))


def parse_frame(payload: bytes) -> tuple[int, int, float]:
    return _FRAME.unpack(payload)


def engine_down(reason: str) -> bytes:
    return encode(MsgType.ENGINE_DOWN, reason.encode())
