"""Length-prefixed binary framing between master and storage servers.

A frame is a 1-byte tag, a u64 little-endian payload length and the payload.
Matrix payloads are concatenated PMM1 matrices.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from .errors import MalformedFrame, ModulusMismatch, TransportError, UnknownTag
from .matrix import MAGIC, matrix_from_bytes, matrix_to_bytes

FRAME_HEADER = struct.Struct("<BQ")
_U64 = struct.Struct("<Q")
MAX_PAYLOAD = 1 << 34


class Tag(enum.IntEnum):
    HELLO = 0x01
    SHARE = 0x02
    QUERY = 0x03
    COMPUTE = 0x04
    RESPONSE = 0x05
    ERROR = 0x06


class Mode(enum.IntEnum):
    PSMM = 1
    FPMM = 2
    BASELINE = 3


@dataclass
class Message:
    tag: Tag
    matrices: list = field(default_factory=list)
    modulus: int | None = None  # HELLO
    mode: Mode | None = None  # QUERY
    nonce: int | None = None  # COMPUTE
    text: str = ""  # ERROR


def _matrices_payload(mats, p: int) -> bytes:
    return b"".join(matrix_to_bytes(m, p) for m in mats)


def wire_encode(msg: Message, p: int | None = None) -> bytes:
    tag = Tag(msg.tag)
    if tag is Tag.HELLO:
        payload = MAGIC + (b"" if msg.modulus is None else _U64.pack(msg.modulus))
    elif tag is Tag.QUERY:
        payload = bytes([Mode(msg.mode)]) + _matrices_payload(msg.matrices, p)
    elif tag is Tag.COMPUTE:
        payload = b"" if msg.nonce is None else _U64.pack(msg.nonce)
    elif tag is Tag.ERROR:
        payload = msg.text.encode("utf-8")
    else:
        payload = _matrices_payload(msg.matrices, p)
    return FRAME_HEADER.pack(tag, len(payload)) + payload


def _parse_matrices(buf: bytes, modulus) -> list:
    out, pos = [], 0
    while pos < len(buf):
        m, _, used = matrix_from_bytes(buf[pos:], modulus)
        out.append(m)
        pos += used
    return out


def decode_payload(tag_byte: int, payload: bytes, modulus: int | None = None) -> Message:
    try:
        tag = Tag(tag_byte)
    except ValueError:
        raise UnknownTag(f"unknown frame tag 0x{tag_byte:02x}") from None
    if tag is Tag.HELLO:
        if payload[:4] != MAGIC or len(payload) not in (4, 12):
            raise MalformedFrame("bad HELLO payload")
        theirs = _U64.unpack(payload[4:])[0] if len(payload) == 12 else None
        if modulus is not None and theirs is not None and theirs != modulus:
            raise ModulusMismatch(f"peer modulus {theirs} != {modulus}")
        return Message(tag, modulus=theirs)
    if tag is Tag.QUERY:
        if not payload:
            raise MalformedFrame("empty QUERY payload")
        try:
            mode = Mode(payload[0])
        except ValueError:
            raise MalformedFrame(f"unknown query mode {payload[0]}") from None
        return Message(tag, matrices=_parse_matrices(payload[1:], modulus), mode=mode)
    if tag is Tag.COMPUTE:
        if len(payload) not in (0, 8):
            raise MalformedFrame("bad COMPUTE payload")
        return Message(tag, nonce=_U64.unpack(payload)[0] if payload else None)
    if tag is Tag.ERROR:
        return Message(tag, text=payload.decode("utf-8", errors="replace"))
    return Message(tag, matrices=_parse_matrices(payload, modulus))


def wire_decode(data: bytes, modulus: int | None = None) -> Message:
    """Parse exactly one frame from ``data``."""
    if len(data) < FRAME_HEADER.size:
        raise MalformedFrame("truncated frame header")
    tag, length = FRAME_HEADER.unpack_from(data)
    if len(data) != FRAME_HEADER.size + length:
        raise MalformedFrame(f"frame declares {length} payload bytes, has {len(data) - FRAME_HEADER.size}")
    return decode_payload(tag, data[FRAME_HEADER.size:], modulus)


def _recv_exact(sock, n: int) -> bytes:
    chunks, got = [], 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            raise MalformedFrame(f"connection closed after {got} of {n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def recv_frame(sock) -> bytes:
    """Read one whole frame from a socket; returns the raw bytes."""
    header = _recv_exact(sock, FRAME_HEADER.size)
    _, length = FRAME_HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise MalformedFrame(f"payload length {length} too large")
    return header + _recv_exact(sock, length)


def send_frame(sock, frame: bytes) -> None:
    try:
        sock.sendall(frame)
    except OSError as exc:
        raise TransportError(str(exc)) from exc
