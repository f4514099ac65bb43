"""Virtual time, geometry and the discrete-event loop."""

from __future__ import annotations

import bisect
import hashlib
import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

__all__ = [
    "MICRO",
    "DEFAULT_SIGNAL_SPEED",
    "VirtualClock",
    "Trajectory",
    "WorldState",
    "EventLoop",
    "SeedStreams",
    "distance",
]

MICRO = 1_000_000
# 100 m of air per 2 ms: propagation and gait windows land on the same scale
DEFAULT_SIGNAL_SPEED = 50_000.0

Point = tuple[float, float]


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class VirtualClock:
    """A party's clock: true virtual time plus a constant offset."""

    drift_us: int = 0

    def read(self, true_us: int) -> int:
        return true_us + self.drift_us

    def to_true(self, local_us: int) -> int:
        return local_us - self.drift_us


class Trajectory:
    """Piecewise-linear path through ``(t_us, x, y)`` waypoints.

    Position is held constant before the first and after the last waypoint.
    """

    def __init__(self, waypoints: Sequence[tuple[int, float, float]]):
        if not waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        pts = sorted(waypoints)
        times = [p[0] for p in pts]
        if len(set(times)) != len(times):
            raise ValueError("trajectory waypoints must have distinct times")
        self._t = times
        self._xy = [(float(p[1]), float(p[2])) for p in pts]

    @classmethod
    def stationary(cls, pos: Point) -> "Trajectory":
        return cls([(0, pos[0], pos[1])])

    @classmethod
    def straight(cls, start: Point, velocity: Point, t0_us: int, t1_us: int) -> "Trajectory":
        dt = (t1_us - t0_us) / MICRO
        end = (start[0] + velocity[0] * dt, start[1] + velocity[1] * dt)
        return cls([(t0_us, *start), (t1_us, *end)])

    @property
    def span(self) -> tuple[int, int]:
        return self._t[0], self._t[-1]

    def position(self, t_us: int) -> Point:
        if t_us <= self._t[0]:
            return self._xy[0]
        if t_us >= self._t[-1]:
            return self._xy[-1]
        i = bisect.bisect_right(self._t, t_us) - 1
        t0, t1 = self._t[i], self._t[i + 1]
        (x0, y0), (x1, y1) = self._xy[i], self._xy[i + 1]
        f = (t_us - t0) / (t1 - t0)
        return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))

    def path_length(self, t0_us: int, t1_us: int) -> float:
        """Distance walked between two instants (what a pedometer reports)."""
        if t1_us < t0_us:
            t0_us, t1_us = t1_us, t0_us
        cuts = [t0_us] + [t for t in self._t if t0_us < t < t1_us] + [t1_us]
        return sum(distance(self.position(a), self.position(b)) for a, b in zip(cuts, cuts[1:]))


@dataclass
class WorldState:
    vehicle_pos: Point = (0.0, 0.0)
    holder: Trajectory = field(default_factory=lambda: Trajectory.stationary((100.0, 0.0)))
    signal_speed: float = DEFAULT_SIGNAL_SPEED
    jitter_us: int = 0

    def propagation_us(self, a: Point, b: Point) -> int:
        return round(distance(a, b) / self.signal_speed * MICRO)

    def holder_travel_us(self, t_us: int) -> int:
        return self.propagation_us(self.holder.position(t_us), self.vehicle_pos)


class EventLoop:
    """Single-threaded scheduler; ties break by insertion order."""

    def __init__(self) -> None:
        self.now = 0
        self._queue: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = itertools.count()

    def at(self, t_us: int, action: Callable[[], None]) -> None:
        if t_us < self.now:
            raise ValueError(f"cannot schedule at {t_us}us, now is {self.now}us")
        heapq.heappush(self._queue, (t_us, next(self._seq), action))

    def run(self, until: int | None = None) -> None:
        while self._queue:
            t, _, action = self._queue[0]
            if until is not None and t > until:
                break
            heapq.heappop(self._queue)
            self.now = t
            action()

    def clear(self) -> None:
        self._queue.clear()


class SeedStreams:
    """Independent ``random.Random`` streams derived from one 64-bit root seed."""

    def __init__(self, root: int):
        self.root = root & (2**64 - 1)

    def seed_for(self, actor: str) -> int:
        h = hashlib.sha256(self.root.to_bytes(8, "big") + actor.encode())
        return int.from_bytes(h.digest()[:8], "big")

    def rng(self, actor: str) -> random.Random:
        return random.Random(self.seed_for(actor))
