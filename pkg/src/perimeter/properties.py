"""Lowe's authentication hierarchy checked over finite simulation traces.

Honest parties log ``claim-running`` when they send their final message and
``claim-commit`` when they accept. Each claim carries the peer it believes
it talks to and the session data ``(nonce, challenge, response digest)``.
A verifier commit is judged against the prover's running claims that appear
earlier in the trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

from .sim.trace import Trace, TraceError, TraceEvent, parse_trace

__all__ = [
    "Claim",
    "PropertyVerdict",
    "PROPERTIES",
    "claims",
    "check_aliveness",
    "check_weak_agreement",
    "check_noninjective_agreement",
    "check_agreement",
    "check_all",
    "format_report",
]

_CLAIM_FIELDS = ("peer", "nonce", "challenge", "response")


@dataclass(frozen=True)
class Claim:
    t_us: int
    actor: str
    kind: str  # "running" or "commit"
    peer: str
    nonce: str
    challenge: str
    response: str
    line: int

    @property
    def data(self) -> tuple[str, str, str]:
        return (self.nonce, self.challenge, self.response)


@dataclass(frozen=True)
class PropertyVerdict:
    name: str
    holds: bool
    witness: tuple[int, ...] = ()

    def __str__(self) -> str:
        if self.holds:
            return "holds"
        return "violated(lines " + ",".join(map(str, self.witness)) + ")"


def _claim(event: TraceEvent, index: int) -> Claim:
    line = event.line if event.line is not None else index + 2
    missing = [k for k in _CLAIM_FIELDS if event.get(k) is None]
    if missing:
        raise TraceError(f"{event.kind} claim lacks {', '.join(missing)}", line)
    kind = "running" if event.kind == "claim-running" else "commit"
    return Claim(event.t_us, event.actor, kind, *(event.get(k) for k in _CLAIM_FIELDS), line)


def claims(trace: Union[Trace, str]) -> list[Claim]:
    """All claims in trace order. Text input is parsed first."""
    if isinstance(trace, str):
        trace = parse_trace(trace)
    out = []
    last = None
    for i, event in enumerate(trace):
        if last is not None and event.t_us < last:
            raise TraceError("time went backwards", event.line)
        last = event.t_us
        if event.kind in ("claim-running", "claim-commit"):
            out.append(_claim(event, i))
    return out


def _split(cl: Iterable[Claim], v: str, kf: str) -> tuple[list[Claim], list[Claim]]:
    commits = [c for c in cl if c.actor == v and c.kind == "commit" and c.peer == kf]
    running = [c for c in cl if c.actor == kf and c.kind == "running"]
    return commits, running


def _before(running: list[Claim], commit: Claim) -> list[Claim]:
    return [r for r in running if r.line < commit.line]


def check_aliveness(trace, v: str, kf: str) -> PropertyVerdict:
    """``kf`` ran the protocol at some point before each commit of ``v``."""
    commits, running = _split(claims(trace), v, kf)
    for c in commits:
        if not _before(running, c):
            return PropertyVerdict("aliveness", False, (c.line,))
    return PropertyVerdict("aliveness", True)


def check_weak_agreement(trace, v: str, kf: str) -> PropertyVerdict:
    """As aliveness, and that earlier run named ``v`` as its peer."""
    commits, running = _split(claims(trace), v, kf)
    for c in commits:
        earlier = _before(running, c)
        if not any(r.peer == v for r in earlier):
            return PropertyVerdict("weak-agreement", False, tuple(sorted([c.line] + [r.line for r in earlier])))
    return PropertyVerdict("weak-agreement", True)


def check_noninjective_agreement(trace, v: str, kf: str) -> PropertyVerdict:
    """Some earlier run of ``kf`` with peer ``v`` agrees on the session data."""
    commits, running = _split(claims(trace), v, kf)
    for c in commits:
        earlier = [r for r in _before(running, c) if r.peer == v]
        if not any(r.data == c.data for r in earlier):
            same_nonce = [r.line for r in earlier if r.nonce == c.nonce]
            return PropertyVerdict("non-injective-agreement", False, tuple(sorted([c.line] + same_nonce)))
    return PropertyVerdict("non-injective-agreement", True)


def check_agreement(trace, v: str, kf: str) -> PropertyVerdict:
    """Commits map one-to-one onto matching earlier runs of ``kf``.

    Runs with equal data are interchangeable, so taking commits in order and
    pairing each with the earliest unused match finds a matching whenever
    one exists.
    """
    commits, running = _split(claims(trace), v, kf)
    used: dict[int, Claim] = {}
    for c in commits:
        candidates = [r for r in _before(running, c) if r.peer == v and r.data == c.data]
        free = [r for r in candidates if r.line not in used]
        if not free:
            lines = {c.line} | {r.line for r in _before(running, c) if r.peer == v and r.nonce == c.nonce}
            for r in candidates:
                lines |= {r.line, used[r.line].line}
            return PropertyVerdict("agreement", False, tuple(sorted(lines)))
        used[free[0].line] = c
    return PropertyVerdict("agreement", True)


PROPERTIES = (
    ("aliveness", check_aliveness),
    ("weak-agreement", check_weak_agreement),
    ("non-injective-agreement", check_noninjective_agreement),
    ("agreement", check_agreement),
)


def check_all(trace, v: str, kf: str) -> list[PropertyVerdict]:
    """All four properties, weakest first. Raises if the results break the hierarchy."""
    if isinstance(trace, str):
        trace = parse_trace(trace)
    results = [fn(trace, v, kf) for _, fn in PROPERTIES]
    for weaker, stronger in zip(results, results[1:]):
        if stronger.holds and not weaker.holds:
            raise AssertionError(f"{stronger.name} holds but {weaker.name} does not")
    return results


def format_report(results: list[PropertyVerdict], v: str, kf: str) -> str:
    lines = [f"# properties verifier={v} prover={kf}"]
    for r in results:
        witness = ",".join(map(str, r.witness)) or "-"
        lines.append(f"{r.name}\t{'holds' if r.holds else 'violated'}\t{witness}")
    return "\n".join(lines) + "\n"
