"""Monte Carlo estimates of adversary success, and parameter sweeps.

Trials are split into fixed-size chunks, each seeded from the scenario root
and its chunk index, so the totals do not depend on how many worker
processes share the work.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import random
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from scipy.stats import binomtest

from ..edr import EventKind, EventRecord, MobilityPattern, digest, guess_space_size
from ..messages import CHALLENGE_BYTES, NONCE_BYTES, SymmetricKey
from ..protocol import _prefix_equal, prf
from .engine import guess_space_drive, run_scenario
from .scenario import GuessSpace, Scenario, with_overrides
from .world import SeedStreams

__all__ = [
    "Estimate",
    "estimate_advantage",
    "edr_guess_experiment",
    "guess_record_table",
    "SweepRow",
    "sweep",
]

CHUNK = 50_000


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int
    analytic: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def sigma(self) -> float:
        """Binomial standard error under the analytic success probability."""
        p = self.analytic
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else float("inf")

    @property
    def z(self) -> float:
        if self.sigma == 0:
            return 0.0 if self.rate == self.analytic else math.inf
        return (self.rate - self.analytic) / self.sigma

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        interval = binomtest(self.successes, self.trials).proportion_ci(level, method="wilson")
        return (float(interval.low), float(interval.high))

    def within(self, k: float = 3.0) -> bool:
        return abs(self.rate - self.analytic) <= k * self.sigma


def _chunks(trials: int) -> list[tuple[int, int]]:
    return [(i, min(CHUNK, trials - i * CHUNK)) for i in range(math.ceil(trials / CHUNK))]


def _map(fn, jobs: Sequence[tuple], workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _advantage_chunk(key: bytes, seed: int, rounds: int, bits: int, n: int) -> int:
    rng = random.Random(seed)
    k = SymmetricKey(key)
    wins = 0
    for _ in range(n):
        for _ in range(rounds):
            challenge = rng.randbytes(CHALLENGE_BYTES)
            nonce = rng.randbytes(NONCE_BYTES)
            truth = hashlib.sha256(prf(k, challenge + nonce)).digest()
            guess = rng.randbytes(32)
            if not _prefix_equal(truth, guess, bits):
                break
        else:
            wins += 1
    return wins


def estimate_advantage(scenario: Scenario, rounds: int, trials: int, workers: int = 1) -> Estimate:
    """Empirical probability that a keyless relay passes ``rounds`` challenges in a row.

    Each round the vehicle draws a fresh challenge and nonce; the adversary,
    lacking ``K``, submits a uniformly random response digest, compared on
    the scenario's ``response_bits`` leading bits.
    """
    if rounds < 0 or trials < 1:
        raise ValueError("rounds must be >= 0 and trials >= 1")
    bits = scenario.timing.response_bits
    streams = SeedStreams(scenario.seed)
    key = SymmetricKey.generate(streams.rng("setup")).bytes
    jobs = [
        (key, streams.seed_for(f"advantage/{rounds}/{i}"), rounds, bits, n)
        for i, n in _chunks(trials)
    ]
    wins = sum(_map(_advantage_chunk, jobs, workers))
    return Estimate(wins, trials, 2.0 ** (-bits * rounds))


def guess_record_table(space: GuessSpace) -> list[list[bytes]]:
    """Packed record bytes for every (slot, symbol) pair of the guess space."""
    kinds = list(EventKind)[: space.kinds]
    return [
        [
            EventRecord(slot * 1_000_000, kinds[sym // space.levels], sym % space.levels).pack()
            for sym in range(space.kinds * space.levels)
        ]
        for slot in range(space.slots)
    ]


def _guess_chunk(table: list[list[bytes]], target: bytes, seed: int, n: int) -> int:
    rng = random.Random(seed)
    header = struct.pack(">I", len(table))
    symbols = len(table[0])
    hits = 0
    for _ in range(n):
        body = b"".join(row[rng.randrange(symbols)] for row in table)
        if hashlib.sha256(header + body).digest() == target:
            hits += 1
    return hits


def edr_guess_experiment(
    space: GuessSpace, trials: int, seed: int, workers: int = 1
) -> tuple[Estimate, object]:
    """Blind guesses at a vehicle's EDR digest drawn from ``space``.

    Returns the estimate and the exact space size (or the overflow marker).
    """
    streams = SeedStreams(seed)
    truth = guess_space_drive(space, streams.rng("drive"))
    target = digest(MobilityPattern().extend(truth)).bytes
    table = guess_record_table(space)
    jobs = [(table, target, streams.seed_for(f"edr-guess/{i}"), n) for i, n in _chunks(trials)]
    hits = sum(_map(_guess_chunk, jobs, workers))
    size = guess_space_size(space.kinds, space.levels, space.slots)
    exact = (space.kinds * space.levels) ** space.slots
    return Estimate(hits, trials, 1.0 / exact), size


@dataclass
class SweepRow:
    params: dict[str, Any]
    verdict: str
    accepted: bool
    hop_delays_us: dict[int, int]
    max_added_us: int
    gait_deviation: Optional[float]
    gait_flag: Optional[bool]
    metrics: dict[str, object] = field(default_factory=dict)


def _gait_probe(scenario: Scenario) -> tuple[Optional[float], Optional[bool]]:
    """First-round gait deviation with the hop checks switched off."""
    probe = with_overrides(scenario, {"timing.hop_check": False})
    result = run_scenario(probe)
    dev = result.metrics.get("gait_deviation#1")
    if dev is None:
        return None, None
    return dev, abs(dev) > scenario.timing.vel_epsilon


def sweep(scenario: Scenario, grid: Mapping[str, Sequence[Any]], gait: bool = True) -> list[SweepRow]:
    """Run every point of the cartesian ``grid`` (dotted config keys) in canonical order."""
    keys = list(grid)
    rows = []
    if not keys or any(len(grid[k]) == 0 for k in keys):
        return rows
    for values in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, values))
        sc = with_overrides(scenario, params)
        result = run_scenario(sc)
        delays = result.metrics.get("hop_delays_us", {})
        dev, flag = _gait_probe(sc) if gait and sc.scheme == "keyfob" else (None, None)
        rows.append(
            SweepRow(
                params=params,
                verdict=str(result.verdict),
                accepted=result.verdict.accepted,
                hop_delays_us=delays,
                max_added_us=max(delays.values(), default=0),
                gait_deviation=dev,
                gait_flag=flag,
                metrics=result.metrics,
            )
        )
    return rows
