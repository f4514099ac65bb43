"""Scenario configuration: parsing, validation and dotted-key overrides.

Configs are TOML. Durations are given in seconds and converted to integer
microseconds. Group integers accept decimal or ``0x`` hex (as strings when
they exceed TOML's 64-bit integers).
"""

from __future__ import annotations

import copy
import enum
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..edr import DEFAULT_CAPACITY, DEFAULT_WINDOW_US, EventKind, EventRecord
from ..group import GroupParams, validate_params
from ..protocol import Reason, TimingPolicy
from .world import DEFAULT_SIGNAL_SPEED, MICRO, Trajectory, WorldState

__all__ = [
    "AdversaryMode",
    "AdversaryConfig",
    "GuessSpace",
    "Scenario",
    "ScenarioError",
    "expectation_met",
    "load_scenario",
    "scenario_from_dict",
    "with_overrides",
]


class ScenarioError(ValueError):
    """The configuration cannot describe a runnable scenario."""


class AdversaryMode(str, enum.Enum):
    NONE = "none"
    BRUTE_FORCE_RELAY = "brute_force_relay"
    PURE_RELAY = "pure_relay"
    DISTANCE_FRAUD_EARLY = "distance_fraud_early"
    MAFIA_FRAUD = "mafia_fraud"
    TERRORIST_FRAUD = "terrorist_fraud"
    EDR_GUESS = "edr_guess"


@dataclass(frozen=True)
class AdversaryConfig:
    mode: AdversaryMode = AdversaryMode.NONE
    t_relay_us: int = 0
    consistency: str = "consistent"
    schedule_us: tuple[int, ...] = ()
    pos: tuple[float, float] = (50.0, 0.0)
    pos2: Optional[tuple[float, float]] = None
    forge: str = "body"
    strategy: str = "relay"
    replay: bool = False
    colluder_digest: str = "fresh"
    colluder_gait: str = "pedometer"

    def hop_delay_us(self, hop: int) -> int:
        """Added delay on the ``hop``-th relayed crossing (1-based)."""
        if self.consistency == "consistent":
            return self.t_relay_us
        return self.schedule_us[(hop - 1) % len(self.schedule_us)]


@dataclass(frozen=True)
class GuessSpace:
    kinds: int = 2
    levels: int = 4
    slots: int = 3


@dataclass
class Scenario:
    name: str
    group: GroupParams
    timing: TimingPolicy
    world: WorldState
    adversary: AdversaryConfig
    drive_script: list[EventRecord]
    seed: int
    trials: int = 1
    scheme: str = "keyfob"
    backend: str = "none"
    expect: Optional[str] = None
    sessions: int = 1
    session_gap_us: int = 1_000_000
    start_us: int = 0
    stale_events: int = 0
    gait_window_us: int = 2_000_000
    processing_us: int = 1_000
    clock_offset_us: int = 0
    timeout_us: int = 10_000_000
    edr_window_us: int = DEFAULT_WINDOW_US
    edr_capacity: int = DEFAULT_CAPACITY
    guess: GuessSpace = field(default_factory=GuessSpace)
    raw: dict = field(default_factory=dict, repr=False)


def _us(seconds: Any, key: str) -> int:
    try:
        return round(float(seconds) * MICRO)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{key}: expected seconds, got {seconds!r}") from exc


def _int(value: Any, key: str) -> int:
    if isinstance(value, bool):
        raise ScenarioError(f"{key}: expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value.strip().replace("_", ""), 0)
        except ValueError:
            pass
    raise ScenarioError(f"{key}: expected an integer (decimal or 0x-hex), got {value!r}")


def _point(value: Any, key: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"{key}: expected [x, y]")
    return (float(value[0]), float(value[1]))


def _section(raw: Mapping, name: str) -> Mapping:
    sec = raw.get(name, {})
    if not isinstance(sec, Mapping):
        raise ScenarioError(f"{name}: expected a table")
    return sec


def _choice(value: str, key: str, allowed: tuple[str, ...]) -> str:
    if value not in allowed:
        raise ScenarioError(f"{key}: {value!r} not one of {', '.join(allowed)}")
    return value


def _check_expect(value: str) -> None:
    """``accept``, ``reinit``, ``reject`` or ``reject(<reason>)``."""
    if value in ("accept", "reject", "reinit"):
        return
    if value.startswith("reject(") and value.endswith(")"):
        reason = value[len("reject(") : -1]
        if reason in {r.value for r in Reason}:
            return
    raise ScenarioError(f"expect: {value!r} is not accept, reinit, reject or reject(<reason>)")


def expectation_met(expect: Optional[str], verdict, history) -> bool:
    """Does a run's final verdict (and reinit history) satisfy ``expect``?"""
    if expect is None:
        return True
    if expect == "reinit":
        return any(v.outcome.value == "reinit" for v in history)
    if expect in ("accept", "reject"):
        return verdict.outcome.value == expect
    return str(verdict) == expect


def scenario_from_dict(raw: Mapping, name: str = "scenario", seed: Optional[int] = None) -> Scenario:
    raw = copy.deepcopy(dict(raw))
    g = _section(raw, "group")
    for key in ("p", "q", "g"):
        if key not in g:
            raise ScenarioError(f"missing required key group.{key}")
    group = GroupParams(
        _int(g["p"], "group.p"),
        _int(g["q"], "group.q"),
        _int(g["g"], "group.g"),
        _int(g["h"], "group.h") if "h" in g else None,
    )
    problem = validate_params(group)
    if problem:
        raise ScenarioError(f"group: {problem}")
    backend = _choice(g.get("backend", "none"), "group.backend", ("none", "schnorr", "pedersen"))
    if backend == "pedersen" and group.h is None:
        raise ScenarioError("group.h is required for the pedersen backend")

    t = _section(raw, "timing")
    try:
        timing = TimingPolicy(
            t_travel_max_us=_us(t.get("t_travel_max", 0.005), "timing.t_travel_max"),
            t_epsilon_us=_us(t.get("t_epsilon", 0.001), "timing.t_epsilon"),
            vel_epsilon=float(t.get("vel_epsilon", 0.1)),
            clock_drift_bound_us=_us(t.get("drift", 0.0), "timing.drift"),
            t_travel_min_us=_us(t.get("t_travel_min", 0.0), "timing.t_travel_min"),
            hop_check=bool(t.get("hop_check", True)),
            gait_check=bool(t.get("gait_check", True)),
            response_bits=_int(t.get("response_bits", 256), "timing.response_bits"),
        )
    except ValueError as exc:
        raise ScenarioError(f"timing: {exc}") from exc

    w = _section(raw, "world")
    vehicle_pos = _point(w.get("vehicle_pos", [0.0, 0.0]), "world.vehicle_pos")
    path = w.get("holder_path", [[0.0, 100.0, 0.0]])
    try:
        holder = Trajectory([(_us(p[0], "world.holder_path"), float(p[1]), float(p[2])) for p in path])
    except (TypeError, IndexError, ValueError) as exc:
        raise ScenarioError(f"world.holder_path: {exc}") from exc
    speed = float(w.get("signal_speed", DEFAULT_SIGNAL_SPEED))
    if speed <= 0:
        raise ScenarioError("world.signal_speed must be positive")
    world = WorldState(vehicle_pos, holder, speed, _us(w.get("jitter", 0.0), "world.jitter"))

    a = _section(raw, "adversary")
    try:
        mode = AdversaryMode(a.get("mode", "none"))
    except ValueError:
        allowed = ", ".join(m.value for m in AdversaryMode)
        raise ScenarioError(f"adversary.mode: {a.get('mode')!r} not one of {allowed}") from None
    t_relay = _us(a.get("t_relay", 0.0), "adversary.t_relay")
    if t_relay < 0:
        raise ScenarioError("adversary.t_relay must be >= 0")
    consistency = _choice(a.get("consistency", "consistent"), "adversary.consistency", ("consistent", "inconsistent"))
    schedule = tuple(_us(s, "adversary.schedule") for s in a.get("schedule", []))
    if consistency == "inconsistent" and not schedule:
        schedule = (0, 2 * t_relay, 0)
    if consistency == "inconsistent" and len(schedule) < 3:
        raise ScenarioError("adversary.schedule must cover at least the three handshake hops")
    if any(s < 0 for s in schedule):
        raise ScenarioError("adversary.schedule entries must be >= 0")
    adversary = AdversaryConfig(
        mode=mode,
        t_relay_us=t_relay,
        consistency=consistency,
        schedule_us=schedule,
        pos=_point(a.get("pos", [50.0, 0.0]), "adversary.pos"),
        pos2=_point(a["pos2"], "adversary.pos2") if "pos2" in a else None,
        forge=_choice(a.get("forge", "body"), "adversary.forge", ("body", "ciphertext")),
        strategy=_choice(a.get("strategy", "relay"), "adversary.strategy", ("relay", "substitute")),
        replay=bool(a.get("replay", False)),
        colluder_digest=_choice(a.get("colluder_digest", "fresh"), "adversary.colluder_digest", ("fresh", "stale")),
        colluder_gait=_choice(a.get("colluder_gait", "pedometer"), "adversary.colluder_gait", ("pedometer", "replayed")),
    )
    if mode is AdversaryMode.MAFIA_FRAUD and adversary.pos2 is None:
        raise ScenarioError("adversary.pos2 (ghost position) is required for mafia_fraud")

    drive = []
    for i, entry in enumerate(raw.get("drive_script", [])):
        try:
            drive.append(EventRecord.from_float(float(entry[0]), entry[1], float(entry[2])))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ScenarioError(f"drive_script[{i}]: {exc}") from exc
    if any(b.t_us < a_.t_us for a_, b in zip(drive, drive[1:])):
        raise ScenarioError("drive_script must be ordered by time")

    v = _section(raw, "vehicle")
    k = _section(raw, "keyfob")
    e = _section(raw, "edr")
    gs = _section(raw, "guess")
    if seed is None:
        if "seed" in raw:
            seed = _int(raw["seed"], "seed")
        elif os.environ.get("PERIMETER_SEED"):
            seed = _int(os.environ["PERIMETER_SEED"], "PERIMETER_SEED")
        else:
            raise ScenarioError("missing required key seed (or PERIMETER_SEED)")
    scenario = Scenario(
        name=str(raw.get("name", name)),
        group=group,
        timing=timing,
        world=world,
        adversary=adversary,
        drive_script=drive,
        seed=seed,
        trials=_int(raw.get("trials", 1), "trials"),
        scheme=_choice(raw.get("scheme", "keyfob"), "scheme", ("keyfob", "basic")),
        backend=backend,
        expect=raw.get("expect"),
        sessions=_int(k.get("sessions", 1), "keyfob.sessions"),
        session_gap_us=_us(k.get("session_gap", 1.0), "keyfob.session_gap"),
        start_us=_us(k.get("start", 0.0), "keyfob.start"),
        stale_events=_int(k.get("stale_events", 0), "keyfob.stale_events"),
        gait_window_us=_us(k.get("gait_window", 2.0), "keyfob.gait_window"),
        processing_us=_us(v.get("processing", 0.001), "vehicle.processing"),
        clock_offset_us=_us(k.get("clock_offset", 0.0), "keyfob.clock_offset"),
        timeout_us=_us(v.get("timeout", 10.0), "vehicle.timeout"),
        edr_window_us=_us(e.get("window", DEFAULT_WINDOW_US / MICRO), "edr.window"),
        edr_capacity=_int(e.get("capacity", DEFAULT_CAPACITY), "edr.capacity"),
        guess=GuessSpace(
            _int(gs.get("kinds", 2), "guess.kinds"),
            _int(gs.get("levels", 4), "guess.levels"),
            _int(gs.get("slots", 3), "guess.slots"),
        ),
        raw=raw,
    )
    if scenario.expect is not None:
        _check_expect(str(scenario.expect))
    if scenario.trials < 1 or scenario.sessions < 1:
        raise ScenarioError("trials and keyfob.sessions must be >= 1")
    if not 0 <= scenario.stale_events <= len(drive):
        raise ScenarioError("keyfob.stale_events must be between 0 and the drive_script length")
    if scenario.gait_window_us <= 0:
        raise ScenarioError("keyfob.gait_window must be positive")
    if scenario.processing_us < 0:
        raise ScenarioError("vehicle.processing must be >= 0")
    if min(scenario.guess.kinds, scenario.guess.levels, scenario.guess.slots) < 1:
        raise ScenarioError("guess.kinds, guess.levels and guess.slots must be >= 1")
    if scenario.guess.kinds > len(EventKind):
        raise ScenarioError(f"guess.kinds cannot exceed {len(EventKind)} event kinds")
    return scenario


def load_scenario(path: Union[str, Path], seed: Optional[int] = None) -> Scenario:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return scenario_from_dict(raw, name=path.stem, seed=seed)


def with_overrides(scenario: Scenario, overrides: Mapping[str, Any]) -> Scenario:
    """Re-parse the scenario's source with dotted-key values replaced."""
    raw = copy.deepcopy(scenario.raw)
    for dotted, value in overrides.items():
        node = raw
        *parents, leaf = dotted.split(".")
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ScenarioError(f"{dotted}: {part} is not a table")
        node[leaf] = value
    return scenario_from_dict(raw, name=scenario.name, seed=scenario.seed)
