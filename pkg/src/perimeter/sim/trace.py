"""Simulation trace events and their line-oriented text form.

One event per line: ``t_us actor kind key=value ...``. A header names the
hash function and build; a closing ``# end events=N`` marker makes a cut
file detectable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .. import __version__
from ..edr import HASH_NAME

__all__ = ["TraceEvent", "Trace", "TraceError", "KINDS", "parse_trace"]

KINDS = (
    "send",
    "receive",
    "relay",
    "claim-running",
    "claim-commit",
    "verdict",
    "commitment-transcript",
)
HEADER_PREFIX = "# perimeter-trace"


class TraceError(ValueError):
    """Malformed trace text or an event sequence that breaks trace rules."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class TraceEvent:
    t_us: int
    actor: str
    kind: str
    payload: tuple[tuple[str, str], ...] = ()
    line: Optional[int] = field(default=None, compare=False)

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        for k, v in self.payload:
            if k == key:
                return v
        return default

    def to_line(self) -> str:
        parts = [str(self.t_us), self.actor, self.kind]
        parts += [f"{k}={v}" for k, v in self.payload]
        return " ".join(parts)


class Trace:
    def __init__(self, events: Iterable[TraceEvent] = (), build: str = f"perimeter-{__version__}"):
        self.events: list[TraceEvent] = list(events)
        self.build = build

    def emit(self, t_us: int, actor: str, kind: str, **payload: object) -> TraceEvent:
        if kind not in KINDS:
            raise TraceError(f"unknown event kind {kind!r}")
        if self.events and t_us < self.events[-1].t_us:
            raise TraceError(f"time went backwards: {t_us} after {self.events[-1].t_us}")
        event = TraceEvent(
            t_us,
            actor,
            kind,
            tuple((k, str(v)) for k, v in payload.items()),
            line=len(self.events) + 2,
        )
        self.events.append(event)
        return event

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, *kinds: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind in kinds]

    def to_text(self) -> str:
        lines = [f"{HEADER_PREFIX} hash={HASH_NAME} build={self.build}"]
        lines += [e.to_line() for e in self.events]
        lines.append(f"# end events={len(self.events)}")
        return "\n".join(lines) + "\n"


def parse_trace(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(HEADER_PREFIX):
        raise TraceError("missing trace header", 1)
    build = "unknown"
    for token in lines[0].split()[2:]:
        key, _, value = token.partition("=")
        if key == "build":
            build = value
    events: list[TraceEvent] = []
    ended = False
    for lineno, raw in enumerate(lines[1:], start=2):
        if ended:
            raise TraceError("content after end marker", lineno)
        if raw.startswith("# end"):
            _, _, count = raw.partition("events=")
            if not count.strip().isdigit() or int(count) != len(events):
                raise TraceError(f"end marker disagrees with {len(events)} events", lineno)
            ended = True
            continue
        if not raw.strip() or raw.startswith("#"):
            continue
        fields = raw.split()
        if len(fields) < 3:
            raise TraceError(f"expected 't_us actor kind ...', got {raw!r}", lineno)
        t, actor, kind = fields[:3]
        if not t.lstrip("-").isdigit():
            raise TraceError(f"bad timestamp {t!r}", lineno)
        if kind not in KINDS:
            raise TraceError(f"unknown event kind {kind!r}", lineno)
        payload = []
        for token in fields[3:]:
            key, sep, value = token.partition("=")
            if not sep or not key:
                raise TraceError(f"bad payload token {token!r}", lineno)
            payload.append((key, value))
        event = TraceEvent(int(t), actor, kind, tuple(payload), line=lineno)
        if events and event.t_us < events[-1].t_us:
            raise TraceError("time went backwards", lineno)
        events.append(event)
    if not ended:
        raise TraceError(f"trace truncated: no end marker after line {len(lines)}", len(lines))
    return Trace(events, build)
