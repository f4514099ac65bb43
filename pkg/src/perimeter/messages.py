"""Handshake message types, their binary layout, and the AEAD envelope.

Body layout: one kind byte, then the fields in declaration order,
big-endian. Timestamps are signed 8-byte microseconds, digests 32 bytes,
nonces and identities 16 bytes, gait values 8-byte fixed point in
micro-units. An optional commitment trailer carries the Schnorr/Pedersen
values: scheme byte, count byte, then length-prefixed integers.
"""

from __future__ import annotations

import enum
import hashlib
import random
import struct
from dataclasses import dataclass, field
from typing import ClassVar, Union

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

__all__ = [
    "KEY_BYTES",
    "Role",
    "Identity",
    "SymmetricKey",
    "GaitObservation",
    "BasicRequest",
    "BasicChallenge",
    "BasicResponse",
    "KeyfobRequest",
    "KeyfobChallenge",
    "KeyfobResponse",
    "Message",
    "WireError",
    "IntegrityFailure",
    "encode",
    "decode",
    "aead_seal",
    "aead_open",
]

KEY_BYTES = 16
NONCE_BYTES = 16
ID_BYTES = 16
DIGEST_BYTES = 32
CHALLENGE_BYTES = 16
AEAD_NONCE_BYTES = 12
MICRO = 1_000_000


class WireError(ValueError):
    """Body bytes do not parse as a handshake message."""


class IntegrityFailure(Exception):
    """Ciphertext failed authentication (tampered, truncated, or wrong key)."""


class Role(str, enum.Enum):
    VEHICLE = "vehicle"
    PERIPHERAL = "peripheral"
    KEYFOB = "keyfob"
    USER = "user"


@dataclass(frozen=True)
class Identity:
    role: Role
    id: bytes
    name: str = field(default="", compare=False)

    @classmethod
    def named(cls, role: Union[Role, str], name: str) -> "Identity":
        raw = hashlib.sha256(f"{Role(role).value}:{name}".encode()).digest()[:ID_BYTES]
        return cls(Role(role), raw, name)

    def __str__(self) -> str:
        return self.name or self.id.hex()


@dataclass(frozen=True)
class SymmetricKey:
    bytes: bytes

    def __post_init__(self) -> None:
        if len(self.bytes) != KEY_BYTES:
            raise ValueError(f"symmetric key must be {KEY_BYTES} bytes")

    @classmethod
    def generate(cls, rng: random.Random) -> "SymmetricKey":
        return cls(rng.randbytes(KEY_BYTES))


@dataclass(frozen=True)
class GaitObservation:
    """Displacement over an observation window; stored in micro-units."""

    displacement_um: int
    duration_us: int
    velocity_um_s: int

    @classmethod
    def measure(cls, displacement_m: float, duration_us: int) -> "GaitObservation":
        if duration_us <= 0:
            raise ValueError("gait window must have positive duration")
        disp = round(displacement_m * MICRO)
        return cls(disp, duration_us, round(disp * MICRO / duration_us))

    @property
    def displacement(self) -> float:
        return self.displacement_um / MICRO

    @property
    def duration(self) -> float:
        return self.duration_us / MICRO

    @property
    def velocity(self) -> float:
        return self.velocity_um_s / MICRO


Commitment = tuple[int, ...]
_NO_COMMIT: Commitment = ()
SCHEME_CODES = {"none": 0, "schnorr": 1, "pedersen": 2}
SCHEME_NAMES = {v: k for k, v in SCHEME_CODES.items()}


@dataclass(frozen=True)
class BasicRequest:
    KIND: ClassVar[int] = 1
    edr_digest: bytes
    id_pd: bytes
    nonce: bytes
    scheme: str = "none"
    commitment: Commitment = _NO_COMMIT


@dataclass(frozen=True)
class BasicChallenge:
    KIND: ClassVar[int] = 2
    challenge: bytes
    id_v: bytes
    nonce: bytes
    scheme: str = "none"
    commitment: Commitment = _NO_COMMIT


@dataclass(frozen=True)
class BasicResponse:
    KIND: ClassVar[int] = 3
    response: bytes
    nonce: bytes
    scheme: str = "none"
    commitment: Commitment = _NO_COMMIT


@dataclass(frozen=True)
class KeyfobRequest:
    KIND: ClassVar[int] = 4
    edr_digest: bytes
    t_kf_send: int
    nonce: bytes
    scheme: str = "none"
    commitment: Commitment = _NO_COMMIT


@dataclass(frozen=True)
class KeyfobChallenge:
    KIND: ClassVar[int] = 5
    hashed_vehicle_id: bytes
    challenge: bytes
    t_v_receive: int
    t_v_send: int
    nonce: bytes
    scheme: str = "none"
    commitment: Commitment = _NO_COMMIT


@dataclass(frozen=True)
class KeyfobResponse:
    KIND: ClassVar[int] = 6
    hashed_response: bytes
    gait: GaitObservation
    t_kf_cur: int
    nonce: bytes
    scheme: str = "none"
    commitment: Commitment = _NO_COMMIT


Message = Union[
    BasicRequest, BasicChallenge, BasicResponse, KeyfobRequest, KeyfobChallenge, KeyfobResponse
]

# (field name, codec) per kind; codecs: bytes of fixed width or "time"/"gait".
_LAYOUT: dict[type, tuple[tuple[str, object], ...]] = {
    BasicRequest: (("edr_digest", DIGEST_BYTES), ("id_pd", ID_BYTES), ("nonce", NONCE_BYTES)),
    BasicChallenge: (("challenge", CHALLENGE_BYTES), ("id_v", ID_BYTES), ("nonce", NONCE_BYTES)),
    BasicResponse: (("response", DIGEST_BYTES), ("nonce", NONCE_BYTES)),
    KeyfobRequest: (("edr_digest", DIGEST_BYTES), ("t_kf_send", "time"), ("nonce", NONCE_BYTES)),
    KeyfobChallenge: (
        ("hashed_vehicle_id", DIGEST_BYTES),
        ("challenge", CHALLENGE_BYTES),
        ("t_v_receive", "time"),
        ("t_v_send", "time"),
        ("nonce", NONCE_BYTES),
    ),
    KeyfobResponse: (
        ("hashed_response", DIGEST_BYTES),
        ("gait", "gait"),
        ("t_kf_cur", "time"),
        ("nonce", NONCE_BYTES),
    ),
}
_BY_KIND = {cls.KIND: cls for cls in _LAYOUT}
_I64 = struct.Struct(">q")
_GAIT = struct.Struct(">qqq")


def encode(msg: Message) -> bytes:
    out = bytearray([msg.KIND])
    for name, codec in _LAYOUT[type(msg)]:
        value = getattr(msg, name)
        if codec == "time":
            out += _I64.pack(value)
        elif codec == "gait":
            out += _GAIT.pack(value.displacement_um, value.duration_us, value.velocity_um_s)
        else:
            if len(value) != codec:
                raise WireError(f"{type(msg).__name__}.{name} must be {codec} bytes")
            out += value
    out.append(SCHEME_CODES[msg.scheme])
    out.append(len(msg.commitment))
    for n in msg.commitment:
        raw = n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big")
        out += len(raw).to_bytes(2, "big") + raw
    return bytes(out)


def decode(body: bytes) -> Message:
    if not body:
        raise WireError("empty body")
    cls = _BY_KIND.get(body[0])
    if cls is None:
        raise WireError(f"unknown message kind {body[0]}")
    pos = 1
    fields: dict[str, object] = {}

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(body):
            raise WireError("truncated body")
        chunk = body[pos : pos + n]
        pos += n
        return chunk

    for name, codec in _LAYOUT[cls]:
        if codec == "time":
            fields[name] = _I64.unpack(take(8))[0]
        elif codec == "gait":
            d, t, v = _GAIT.unpack(take(24))
            fields[name] = GaitObservation(d, t, v)
        else:
            fields[name] = take(codec)
    scheme_code = take(1)[0]
    if scheme_code not in SCHEME_NAMES:
        raise WireError(f"unknown commitment scheme {scheme_code}")
    values = []
    for _ in range(take(1)[0]):
        length = int.from_bytes(take(2), "big")
        values.append(int.from_bytes(take(length), "big"))
    if pos != len(body):
        raise WireError("trailing bytes after message")
    return cls(scheme=SCHEME_NAMES[scheme_code], commitment=tuple(values), **fields)


def aead_seal(key: SymmetricKey, msg: Message, rng: random.Random) -> bytes:
    """Encrypt-and-authenticate ``msg``; the 96-bit AEAD nonce prefixes the output."""
    iv = rng.randbytes(AEAD_NONCE_BYTES)
    return iv + AESGCM(key.bytes).encrypt(iv, encode(msg), None)


def aead_open(key: SymmetricKey, envelope: bytes) -> Message:
    if len(envelope) < AEAD_NONCE_BYTES + 16:
        raise IntegrityFailure("envelope too short")
    iv, ct = envelope[:AEAD_NONCE_BYTES], envelope[AEAD_NONCE_BYTES:]
    try:
        body = AESGCM(key.bytes).decrypt(iv, ct, None)
    except InvalidTag as exc:
        raise IntegrityFailure("authentication tag mismatch") from exc
    try:
        return decode(body)
    except WireError as exc:
        raise IntegrityFailure(f"authenticated body is malformed: {exc}") from exc
