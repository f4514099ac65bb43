"""Event data recorder: rolling vehicle-dynamics log and its digest.

The digest of the retained window is the proactive shared secret between
a vehicle and the keyfob used on the last drive. Values are fixed-point
(three fractional digits) so the byte encoding, and hence the digest, is
identical on every platform.
"""

from __future__ import annotations

import copy
import enum
import hashlib
import struct
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

__all__ = [
    "HASH_NAME",
    "EventKind",
    "EventRecord",
    "MobilityPattern",
    "EdrDigest",
    "TimeRegression",
    "GUESS_SPACE_OVERFLOW",
    "record_event",
    "digest",
    "replicate",
    "guess_space_size",
    "canonical_bytes",
]

HASH_NAME = "sha256"
FIXED_POINT_SCALE = 1000
DEFAULT_WINDOW_US = 30_000_000
DEFAULT_CAPACITY = 4096

_RECORD = struct.Struct(">QBq")
_COUNT = struct.Struct(">I")


class EventKind(enum.IntEnum):
    ACCELERATION = 1
    DECELERATION = 2
    STEERING_ANGLE = 3
    VELOCITY = 4
    SEAT_POSITION = 5
    TEMPERATURE = 6

    @classmethod
    def parse(cls, name: Union[str, int, "EventKind"]) -> "EventKind":
        if isinstance(name, int):
            return cls(name)
        try:
            return cls[name.strip().upper().replace("-", "_")]
        except KeyError:
            allowed = ", ".join(k.name.lower().replace("_", "-") for k in cls)
            raise ValueError(f"unknown event kind {name!r} (expected one of {allowed})") from None


class TimeRegression(ValueError):
    """An event older than the newest record was offered to the log."""


@dataclass(frozen=True)
class EventRecord:
    t_us: int
    kind: EventKind
    value_fp: int  # value * 1000, rounded

    @classmethod
    def from_float(cls, t_seconds: float, kind: Union[str, int, EventKind], value: float) -> "EventRecord":
        return cls(
            round(t_seconds * 1_000_000),
            EventKind.parse(kind),
            round(value * FIXED_POINT_SCALE),
        )

    @property
    def value(self) -> float:
        return self.value_fp / FIXED_POINT_SCALE

    def pack(self) -> bytes:
        return _RECORD.pack(self.t_us, int(self.kind), self.value_fp)


@dataclass(frozen=True)
class EdrDigest:
    bytes: bytes

    def __post_init__(self) -> None:
        if len(self.bytes) != 32:
            raise ValueError("EDR digest must be 32 bytes")

    def hex(self) -> str:
        return self.bytes.hex()


class MobilityPattern:
    """Bounded, time-ordered window of the most recent vehicle events."""

    def __init__(self, window_us: int = DEFAULT_WINDOW_US, capacity: int = DEFAULT_CAPACITY):
        if window_us < 0 or capacity < 1:
            raise ValueError("window must be >= 0 and capacity >= 1")
        self.window_us = window_us
        self.capacity = capacity
        self._records: deque[EventRecord] = deque()

    def record(self, event: EventRecord) -> "MobilityPattern":
        if self._records and event.t_us < self._records[-1].t_us:
            raise TimeRegression(
                f"event at t={event.t_us}us precedes latest record t={self._records[-1].t_us}us"
            )
        self._records.append(event)
        horizon = event.t_us - self.window_us
        while self._records[0].t_us < horizon:
            self._records.popleft()
        while len(self._records) > self.capacity:
            self._records.popleft()
        return self

    def extend(self, events: Iterable[EventRecord]) -> "MobilityPattern":
        for e in events:
            self.record(e)
        return self

    @property
    def records(self) -> tuple[EventRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self._records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MobilityPattern):
            return NotImplemented
        return (
            self.window_us == other.window_us
            and self.capacity == other.capacity
            and self.records == other.records
        )

    def __repr__(self) -> str:
        return f"MobilityPattern(window_us={self.window_us}, records={len(self)})"


def record_event(pattern: MobilityPattern, event: EventRecord) -> MobilityPattern:
    return pattern.record(event)


def canonical_bytes(records: Iterable[EventRecord]) -> bytes:
    """Count-prefixed concatenation of 17-byte big-endian records."""
    body = [r.pack() for r in records]
    return _COUNT.pack(len(body)) + b"".join(body)


def digest(pattern: MobilityPattern) -> EdrDigest:
    return EdrDigest(hashlib.new(HASH_NAME, canonical_bytes(pattern)).digest())


def replicate(pattern: MobilityPattern) -> MobilityPattern:
    """Value-equal, independently owned copy for a paired device."""
    return copy.deepcopy(pattern)


class _Overflow:
    def __repr__(self) -> str:
        return "GUESS_SPACE_OVERFLOW"

    def __str__(self) -> str:
        return "exceeds 2^64"


GUESS_SPACE_OVERFLOW = _Overflow()


def guess_space_size(kinds: int, levels: int, slots: int) -> Union[int, _Overflow]:
    """Brute-force search space ``(kinds * levels) ** slots`` for guessing a log.

    Returns ``GUESS_SPACE_OVERFLOW`` once the count passes ``2**64``.
    """
    if min(kinds, levels, slots) < 1:
        raise ValueError("kinds, levels and slots must all be >= 1")
    size = (kinds * levels) ** slots
    if size > 2**64:
        return GUESS_SPACE_OVERFLOW
    return size
