"""Binary codec for every protocol message.

Frame layout::

    0x4F | 0x01 | msg_type | field* ; field = u32 big-endian length || bytes

Strings are UTF-8, integers are 4-byte big-endian, and an envelope is
flattened into three consecutive fields (ciphertext, iv, mac).
"""

from __future__ import annotations

import re
from dataclasses import astuple, dataclass
from typing import ClassVar

from .crypto import Envelope
from .errors import ChainPassError, MalformedFrame, UnknownKind, UnsupportedFrame

MAGIC = 0x4F
VERSION = 0x01
HEADER = bytes([MAGIC, VERSION])

_PHONE_RE = re.compile(r"[0-9]{6,15}")


def is_phone_number(value: str) -> bool:
    return isinstance(value, str) and _PHONE_RE.fullmatch(value) is not None


@dataclass(frozen=True)
class RegistrationRequest:
    KIND: ClassVar[int] = 0x01
    SCHEMA: ClassVar[tuple] = ("str", "str")
    user_id: str
    server_id: str


@dataclass(frozen=True)
class TspRegistrationForward:
    KIND: ClassVar[int] = 0x02
    SCHEMA: ClassVar[tuple] = ("str", "phone", "b16")
    user_id: str
    user_phone: str
    session_key: bytes


@dataclass(frozen=True)
class RegistrationResponse:
    KIND: ClassVar[int] = 0x03
    SCHEMA: ClassVar[tuple] = ("str", "b16", "phone", "b16")
    server_id: str
    seed: bytes
    server_phone: str
    session_key: bytes


@dataclass(frozen=True)
class RegistrationSms:
    KIND: ClassVar[int] = 0x04
    SCHEMA: ClassVar[tuple] = ("str", "env")
    user_id: str
    envelope: Envelope


@dataclass(frozen=True)
class LoginRequest:
    KIND: ClassVar[int] = 0x05
    SCHEMA: ClassVar[tuple] = ("str",)
    user_id: str


@dataclass(frozen=True)
class ServerChallenge:
    KIND: ClassVar[int] = 0x06
    SCHEMA: ClassVar[tuple] = ("str", "b16")
    server_id: str
    server_nonce: bytes


@dataclass(frozen=True)
class LoginSms:
    KIND: ClassVar[int] = 0x07
    SCHEMA: ClassVar[tuple] = ("str", "env")
    user_id: str
    envelope: Envelope


@dataclass(frozen=True)
class LoginSuccess:
    KIND: ClassVar[int] = 0x08
    SCHEMA: ClassVar[tuple] = ("b32",)
    digest: bytes


@dataclass(frozen=True)
class RecoveryRequest:
    KIND: ClassVar[int] = 0x09
    SCHEMA: ClassVar[tuple] = ("str", "str")
    user_id: str
    server_id: str


@dataclass(frozen=True)
class TspRecoveryForward:
    KIND: ClassVar[int] = 0x0A
    SCHEMA: ClassVar[tuple] = ("str", "phone")
    user_id: str
    user_phone: str


@dataclass(frozen=True)
class RecoveryResponse:
    KIND: ClassVar[int] = 0x0B
    SCHEMA: ClassVar[tuple] = ("str", "b16", "phone", "u32", "b16")
    server_id: str
    seed: bytes
    server_phone: str
    index: int
    server_nonce: bytes


@dataclass(frozen=True)
class RecoverySms:
    KIND: ClassVar[int] = 0x0C
    SCHEMA: ClassVar[tuple] = ("str", "env")
    user_id: str
    envelope: Envelope


MESSAGE_TYPES = (
    RegistrationRequest, TspRegistrationForward, RegistrationResponse, RegistrationSms,
    LoginRequest, ServerChallenge, LoginSms, LoginSuccess,
    RecoveryRequest, TspRecoveryForward, RecoveryResponse, RecoverySms,
)
BY_KIND = {cls.KIND: cls for cls in MESSAGE_TYPES}


def kind_name(frame: bytes) -> str:
    """Best-effort message name for logging; never raises."""
    if len(frame) >= 3 and frame[:2] == HEADER and frame[2] in BY_KIND:
        return BY_KIND[frame[2]].__name__
    return "Unknown"


def _field(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def encode(message) -> bytes:
    parts = [HEADER, bytes([message.KIND])]
    for tag, value in zip(message.SCHEMA, astuple(message)):
        if tag == "env":
            # astuple recursed into the Envelope dataclass
            ciphertext, iv, mac = value
            parts += [_field(ciphertext), _field(iv), _field(mac)]
        elif tag == "u32":
            parts.append(_field(value.to_bytes(4, "big")))
        elif tag in ("str", "phone"):
            parts.append(_field(value.encode("utf-8")))
        else:
            parts.append(_field(bytes(value)))
    return b"".join(parts)


def _read_fields(data: bytes, pos: int) -> list[bytes]:
    fields = []
    while pos < len(data):
        if pos + 4 > len(data):
            raise MalformedFrame("truncated length prefix")
        n = int.from_bytes(data[pos:pos + 4], "big")
        pos += 4
        if n > len(data) - pos:
            raise MalformedFrame("field overruns frame")
        fields.append(data[pos:pos + n])
        pos += n
    return fields


def _convert(tag: str, raw: bytes):
    if tag in ("str", "phone"):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedFrame("invalid UTF-8") from None
        if tag == "phone" and not is_phone_number(text):
            raise MalformedFrame("invalid phone number")
        return text
    if tag == "u32":
        if len(raw) != 4:
            raise MalformedFrame("integer field must be 4 bytes")
        return int.from_bytes(raw, "big")
    size = {"b16": 16, "b32": 32}[tag]
    if len(raw) != size:
        raise MalformedFrame(f"field must be {size} bytes")
    return raw


def decode(data: bytes):
    """Parse one frame. Raises a :class:`ChainPassError` subclass on any defect."""
    data = bytes(data)
    if data[:1] not in (b"", HEADER[:1]) or data[1:2] not in (b"", HEADER[1:]):
        raise UnsupportedFrame("bad magic or version")
    if len(data) < 3:
        raise MalformedFrame("frame shorter than header")
    cls = BY_KIND.get(data[2])
    if cls is None:
        raise UnknownKind(f"unknown message type 0x{data[2]:02x}")
    raw = _read_fields(data, 3)
    expected = sum(3 if tag == "env" else 1 for tag in cls.SCHEMA)
    if len(raw) != expected:
        raise MalformedFrame(f"{cls.__name__} expects {expected} fields, got {len(raw)}")
    values = []
    it = iter(raw)
    for tag in cls.SCHEMA:
        if tag == "env":
            try:
                values.append(Envelope(next(it), next(it), next(it)))
            except ChainPassError as exc:
                raise MalformedFrame(f"bad envelope: {exc}") from None
        else:
            values.append(_convert(tag, next(it)))
    return cls(*values)
