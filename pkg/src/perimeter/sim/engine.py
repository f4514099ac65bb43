"""Run one scenario end to end on the discrete-event loop.

Every node acts only on events delivered by the loop; the channel turns a
send into a receive after distance-derived propagation plus whatever the
adversary adds. The adversary sees plaintext metadata in ``forge="body"``
mode (it still lacks ``K``), which isolates the response-guessing odds.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..edr import EventKind, EventRecord, MobilityPattern, replicate
from ..messages import (
    BasicChallenge,
    BasicRequest,
    BasicResponse,
    GaitObservation,
    Identity,
    IntegrityFailure,
    KeyfobChallenge,
    KeyfobRequest,
    KeyfobResponse,
    Message,
    Role,
    SymmetricKey,
    aead_open,
    aead_seal,
)
from ..protocol import (
    CommitmentBackend,
    Device,
    Outcome,
    Reason,
    Rejected,
    SessionState,
    Verdict,
    Vehicle,
    kf_initiate,
    kf_on_challenge,
    pd_initiate_basic,
    pd_respond_basic,
    register,
    vehicle_on_request,
    vehicle_on_request_basic,
    vehicle_verify,
    vehicle_verify_basic,
)
from .scenario import AdversaryMode, Scenario, ScenarioError
from .trace import Trace
from .world import EventLoop, SeedStreams, Trajectory, VirtualClock

__all__ = ["RunResult", "run_scenario", "guess_space_drive", "VEHICLE", "KEYFOB"]

VEHICLE = "vehicle"
KEYFOB = "keyfob"
ADVERSARY = "adversary"
LEECH = "leech"
GHOST = "ghost"

_BASIC_MODES = {AdversaryMode.NONE, AdversaryMode.PURE_RELAY, AdversaryMode.BRUTE_FORCE_RELAY}
_SILENT_KEYFOB = {AdversaryMode.TERRORIST_FRAUD, AdversaryMode.EDR_GUESS}


@dataclass
class RunResult:
    scenario: Scenario
    trace: Trace
    verdict: Verdict
    session_verdicts: list[Verdict]
    history: list[Verdict]
    decided_by: str
    metrics: dict[str, object] = field(default_factory=dict)
    costs: dict[str, tuple[int, int]] = field(default_factory=dict)


def guess_space_drive(space, rng) -> list[EventRecord]:
    """A drive log drawn uniformly from ``kinds x levels`` symbols per slot."""
    kinds = list(EventKind)[: space.kinds]
    out = []
    for slot in range(space.slots):
        sym = rng.randrange(space.kinds * space.levels)
        out.append(EventRecord(slot * 1_000_000, kinds[sym // space.levels], sym % space.levels))
    return out


def _hex8(b: Optional[bytes]) -> str:
    return b.hex() if b else "-"


class _Run:
    def __init__(self, scenario: Scenario):
        sc = self.sc = scenario
        if sc.scheme == "basic" and sc.adversary.mode not in _BASIC_MODES:
            raise ScenarioError(f"adversary mode {sc.adversary.mode.value} needs the keyfob scheme")
        if sc.adversary.replay and sc.sessions < 2:
            raise ScenarioError("adversary.replay needs keyfob.sessions >= 2")
        self.adv = sc.adversary
        self.mode = sc.adversary.mode
        self.streams = SeedStreams(sc.seed)
        self.loop = EventLoop()
        self.trace = Trace()
        self.channel_rng = self.streams.rng("channel")
        self.adv_rng = self.streams.rng(ADVERSARY)
        self.key = SymmetricKey.generate(self.streams.rng("setup"))
        self.kf_clock = VirtualClock(sc.clock_offset_us)

        drive = list(sc.drive_script)
        if self.mode is AdversaryMode.EDR_GUESS and not drive:
            drive = guess_space_drive(sc.guess, self.streams.rng("drive"))
        self.drive = drive
        v_pattern = MobilityPattern(sc.edr_window_us, sc.edr_capacity).extend(drive)
        kf_pattern = MobilityPattern(sc.edr_window_us, sc.edr_capacity).extend(
            drive[: len(drive) - sc.stale_events]
        )

        backend = (
            CommitmentBackend(sc.backend, sc.group) if sc.backend != "none" else CommitmentBackend()
        )
        role = Role.KEYFOB if sc.scheme == "keyfob" else Role.PERIPHERAL
        self.v_id = Identity.named(Role.VEHICLE, VEHICLE)
        self.kf_id = Identity.named(role, KEYFOB)
        self.vehicle = Vehicle(
            self.v_id,
            self.key,
            v_pattern,
            self.streams.rng(VEHICLE),
            sc.timing,
            sc.processing_us,
            backend,
        )
        self.device = Device(
            self.kf_id,
            self.key,
            kf_pattern,
            self.v_id,
            self.streams.rng(KEYFOB),
            sc.timing,
            sc.gait_window_us,
        )
        register(self.vehicle, self.device, self.streams.rng("registration"))
        self.prover = self.device
        self.prover_name = KEYFOB
        self.prover_path = sc.world.holder
        self.prover_clock = self.kf_clock
        if self.mode in _SILENT_KEYFOB:
            self._install_impostor(v_pattern)

        self.session_index = -1
        self.logged_transcripts: set[bytes] = set()
        self.active: Optional[bytes] = None
        self.terminal: dict[int, tuple[Verdict, str]] = {}
        self.history: list[Verdict] = []
        self.hop = 0
        self.hop_delays: dict[int, int] = {}
        self.observed: dict[str, object] = {}
        self.recorded_responses: list[bytes] = []
        self.request_meta: Optional[KeyfobRequest] = None

    # -- set-up helpers ----------------------------------------------------------

    def _install_impostor(self, v_pattern: MobilityPattern) -> None:
        """Replace the silent genuine keyfob with a device that holds ``K``."""
        sc = self.sc
        if self.mode is AdversaryMode.TERRORIST_FRAUD:
            pattern = replicate(v_pattern)
            if self.adv.colluder_digest == "stale" and self.drive:
                pattern = MobilityPattern(sc.edr_window_us, sc.edr_capacity).extend(self.drive[:-1])
        else:
            guess = guess_space_drive(sc.guess, self.adv_rng)
            pattern = MobilityPattern(sc.edr_window_us, sc.edr_capacity).extend(guess)
        impostor = Device(
            self.kf_id,
            self.key,
            pattern,
            self.v_id,
            self.streams.rng("impostor"),
            sc.timing,
            sc.gait_window_us,
            prover_keys=self.device.prover_keys,
        )
        impostor.backend = self.device.backend
        if self.mode is AdversaryMode.TERRORIST_FRAUD and self.adv.colluder_gait == "replayed":
            impostor.gait_window_us = 0
        self.prover = impostor
        self.prover_name = ADVERSARY
        self.prover_path = Trajectory.stationary(self.adv.pos)
        self.prover_clock = VirtualClock(0)

    # -- geometry and channel ---------------------------------------------------

    def pos(self, node: str, t: int):
        if node == VEHICLE:
            return self.sc.world.vehicle_pos
        if node == KEYFOB:
            return self.sc.world.holder.position(t)
        if node == GHOST:
            return self.adv.pos2
        if node in (ADVERSARY, LEECH):
            return self.adv.pos
        raise KeyError(node)

    def prop(self, a: str, b: str, t: int) -> int:
        return self.sc.world.propagation_us(self.pos(a, t), self.pos(b, t))

    def jitter(self) -> int:
        j = self.sc.world.jitter_us
        return self.channel_rng.randint(0, j) if j else 0

    def transmit(self, src: str, dst: str, envelope: bytes, label: str, hop: int) -> None:
        """Put ``envelope`` on the air now; route it through any relays."""
        t = self.loop.now
        self.trace.emit(t, src, "send", to=dst, msg=label, hop=hop, bytes=len(envelope))
        relayed = self.mode in (AdversaryMode.PURE_RELAY, AdversaryMode.BRUTE_FORCE_RELAY)
        if self.mode is AdversaryMode.MAFIA_FRAUD and self.prover_name == KEYFOB:
            self._mafia_route(src, dst, envelope, label, hop)
            return
        base = self.prop(src, dst, t) + self.jitter()
        if relayed:
            added = self.adv.hop_delay_us(hop)
            self.hop_delays[hop] = added
            at_adv = t + min(self.prop(src, ADVERSARY, t), base) + added
            self.loop.at(at_adv, lambda: self._relay(src, dst, envelope, label, hop, added, t + base + added))
            return
        self.loop.at(t + base, lambda: self.deliver(src, dst, envelope, label, hop))

    def _relay(self, src, dst, envelope, label, hop, added, arrival) -> None:
        self.trace.emit(self.loop.now, ADVERSARY, "relay", msg=label, hop=hop, delay_us=added)
        if self.mode is AdversaryMode.BRUTE_FORCE_RELAY and label in ("KeyfobResponse", "BasicResponse"):
            envelope = self._forge_response(envelope)
            self.trace.emit(self.loop.now, ADVERSARY, "send", to=dst, msg=label, hop=hop, forged=self.adv.forge)
        self.loop.at(arrival, lambda: self.deliver(src, dst, envelope, label, hop))

    def _mafia_route(self, src, dst, envelope, label, hop) -> None:
        t = self.loop.now
        near, far = (GHOST, LEECH) if src == KEYFOB else (LEECH, GHOST)
        d = self.adv.hop_delay_us(hop)
        first = t + self.prop(src, near, t) + d
        bridge = self.prop(near, far, t)
        second = first + bridge + d
        arrival = second + self.prop(far, dst, t) + self.jitter()
        self.hop_delays[hop] = bridge + 2 * d

        def at_near():
            self.trace.emit(self.loop.now, near, "relay", msg=label, hop=hop, delay_us=d)

        def at_far():
            self.trace.emit(self.loop.now, far, "relay", msg=label, hop=hop, delay_us=d)
            out = envelope
            if label == "KeyfobResponse" and self.adv.strategy == "substitute":
                # the leech swaps in its own guess for the genuine response body
                out = self._forge_response(envelope)
                self.trace.emit(self.loop.now, far, "send", to=dst, msg=label, hop=hop, forged=self.adv.forge)
            self.loop.at(arrival, lambda: self.deliver(src, dst, out, label, hop))

        self.loop.at(first, at_near)
        self.loop.at(second, at_far)

    def deliver(self, src: str, dst: str, envelope: bytes, label: str, hop: int) -> None:
        self.trace.emit(self.loop.now, dst, "receive", **{"from": src}, msg=label, hop=hop)
        if dst == VEHICLE:
            self.vehicle_receive(envelope)
        elif dst in (KEYFOB, ADVERSARY):
            self.prover_receive(envelope)

    # -- adversary actions ------------------------------------------------------

    def _forge_response(self, real_envelope: bytes) -> bytes:
        if self.adv.forge == "ciphertext":
            return self.adv_rng.randbytes(len(real_envelope))
        real = aead_open(self.key, real_envelope)  # body-mode oracle: plaintext metadata only
        guess = self.adv_rng.randbytes(32)
        if isinstance(real, KeyfobResponse):
            forged = dataclasses.replace(real, hashed_response=guess)
        else:
            forged = dataclasses.replace(real, response=guess)
        return aead_seal(self.key, forged, self.adv_rng)

    def _body_oracle(self, msg: Message) -> bytes:
        return aead_seal(self.key, msg, self.adv_rng)

    def _early_response(self, challenge_env: bytes) -> None:
        """Distance fraud: answer from close range before the genuine keyfob can."""
        now = self.loop.now
        if self.adv.replay:
            if not self.recorded_responses:
                return  # first session: listen and record only
            envelope = self.recorded_responses[-1]
            kind = "replay"
        elif self.adv.forge == "ciphertext":
            envelope = self.adv_rng.randbytes(len(challenge_env))
            kind = "ciphertext"
        else:
            ch = aead_open(self.key, challenge_env)
            req = self.request_meta
            w = max(1, now - req.t_kf_send)
            forged = KeyfobResponse(
                self.adv_rng.randbytes(32), GaitObservation.measure(0.0, w), now, ch.nonce
            )
            envelope = self._body_oracle(forged)
            kind = "body"
        self.trace.emit(now, ADVERSARY, "send", to=VEHICLE, msg="KeyfobResponse", hop=3, forged=kind)
        arrival = now + self.prop(ADVERSARY, VEHICLE, now) + self.jitter()
        self.loop.at(arrival, lambda: self.deliver(ADVERSARY, VEHICLE, envelope, "KeyfobResponse", 3))

    # -- vehicle ------------------------------------------------------------------

    def finish(self, verdict: Verdict, by: str, session: Optional[SessionState] = None) -> None:
        idx = self.session_index
        nonce = _hex8(session.nonce if session else self.active)
        self.history.append(verdict)
        self.trace.emit(self.loop.now, by, "verdict", verdict=str(verdict), session=idx, nonce=nonce)
        if verdict.outcome is Outcome.REINIT or idx in self.terminal:
            return
        self.terminal[idx] = (verdict, by)
        self.active = None
        if idx + 1 < self.sc.sessions:
            self.loop.at(self.loop.now + self.sc.session_gap_us, self.start_session)

    def vehicle_receive(self, envelope: bytes) -> None:
        now = self.loop.now
        idx = self.session_index
        try:
            msg = aead_open(self.key, envelope)
        except IntegrityFailure:
            self._abort_active(Reason.INTEGRITY_FAILURE)
            return
        if isinstance(msg, (KeyfobRequest, BasicRequest)):
            self.request_meta = msg if isinstance(msg, KeyfobRequest) else None
            try:
                if isinstance(msg, KeyfobRequest):
                    self.observed["p1_us"] = now - msg.t_kf_send
                    challenge = vehicle_on_request(self.vehicle, msg, now)
                    send_at = challenge.t_v_send
                else:
                    challenge = vehicle_on_request_basic(self.vehicle, msg)
                    send_at = now + self.sc.processing_us
            except Rejected as exc:
                self.finish(Verdict(Outcome.REJECT, exc.reason), VEHICLE)
                return
            self.active = msg.nonce
            self.loop.at(send_at, lambda: self._send_challenge(challenge))
            return
        if not isinstance(msg, (KeyfobResponse, BasicResponse)):
            return
        if self.active is None or idx in self.terminal:
            return  # late message for a finished session
        if msg.nonce != self.active:
            self._abort_active(Reason.NONCE_MISMATCH)
            return
        session = self.vehicle.sessions[self.active]
        if isinstance(msg, KeyfobResponse):
            verdict, reinit = vehicle_verify(self.vehicle, msg, now)
        else:
            verdict, reinit = vehicle_verify_basic(self.vehicle, msg), None
        if session.transcript is not None and session.nonce not in self.logged_transcripts:
            self.logged_transcripts.add(session.nonce)
            self.trace.emit(
                now,
                VEHICLE,
                "commitment-transcript",
                nonce=_hex8(session.nonce),
                transcript=session.transcript.to_text().replace(" ", ","),
            )
        if verdict.accepted:
            self.trace.emit(
                now,
                VEHICLE,
                "claim-commit",
                peer=self.prover_claim_name(),
                nonce=_hex8(session.nonce),
                challenge=_hex8(session.challenge),
                response=_hex8(session.response_digest),
            )
        self.finish(verdict, VEHICLE, session)
        if reinit is not None:
            self.loop.at(reinit.t_v_send, lambda: self._send_challenge(reinit))

    def prover_claim_name(self) -> str:
        return KEYFOB

    def _abort_active(self, reason: Reason) -> None:
        if self.active is None or self.session_index in self.terminal:
            return  # nothing in flight to abort
        session = self.vehicle.sessions.get(self.active)
        verdict = Verdict(Outcome.REJECT, reason)
        if session is not None and session.verdict is None:
            session.decide(verdict)
        self.finish(verdict, VEHICLE, session)

    def _send_challenge(self, challenge) -> None:
        if self.session_index in self.terminal:
            return
        self.hop += 1
        label = type(challenge).__name__
        envelope = aead_seal(self.key, challenge, self.vehicle.rng)
        self.transmit(VEHICLE, self.prover_name, envelope, label, self.hop)
        if self.mode is AdversaryMode.DISTANCE_FRAUD_EARLY and isinstance(challenge, KeyfobChallenge):
            at_adv = self.loop.now + self.prop(VEHICLE, ADVERSARY, self.loop.now)
            self.loop.at(at_adv, lambda: self._early_response(envelope))

    # -- prover (genuine keyfob or impostor) ------------------------------------

    def prover_receive(self, envelope: bytes) -> None:
        now = self.loop.now
        try:
            msg = aead_open(self.key, envelope)
        except IntegrityFailure:
            return
        dev, clock, path = self.prover, self.prover_clock, self.prover_path
        if isinstance(msg, KeyfobChallenge):
            local = clock.read(now)

            def pedometer(t0: int, t1: int) -> float:
                return path.path_length(clock.to_true(t0), clock.to_true(t1))

            try:
                response = kf_on_challenge(dev, msg, local, pedometer)
            except Rejected as exc:
                self.finish(Verdict(Outcome.REJECT, exc.reason), self.prover_name)
                return
            if self.prover_name == ADVERSARY and self.adv.colluder_gait == "replayed":
                start = self.sc.start_us
                replayed = GaitObservation.measure(
                    self.sc.world.holder.path_length(start, start + self.sc.gait_window_us),
                    self.sc.gait_window_us,
                )
                response = dataclasses.replace(response, gait=replayed)
            send_at = clock.to_true(response.t_kf_cur)
            idx = self.session_index
            self.loop.at(send_at, lambda: self._send_response(dev, response, idx))
        elif isinstance(msg, BasicChallenge):
            try:
                response = pd_respond_basic(dev, msg)
            except Rejected as exc:
                self.finish(Verdict(Outcome.REJECT, exc.reason), self.prover_name)
                return
            self._send_response(dev, response, self.session_index)

    def _send_response(self, dev: Device, response, idx: int) -> None:
        if idx != self.session_index:
            return  # the prover has already moved on to a newer session
        session = dev.sessions[response.nonce]
        if self.prover_name == KEYFOB:
            self.trace.emit(
                self.loop.now,
                KEYFOB,
                "claim-running",
                peer=VEHICLE,
                nonce=_hex8(session.nonce),
                challenge=_hex8(session.challenge),
                response=_hex8(session.response_digest),
            )
        self.hop += 1
        envelope = aead_seal(self.key, response, dev.rng)
        if self.prover_name == KEYFOB:
            self.recorded_responses.append(envelope)
        self.transmit(self.prover_name, VEHICLE, envelope, type(response).__name__, self.hop)

    # -- sessions -------------------------------------------------------------------

    def start_session(self) -> None:
        self.session_index += 1
        idx = self.session_index
        self.hop = 1
        now = self.loop.now
        dev = self.prover
        if self.sc.scheme == "keyfob":
            request = kf_initiate(dev, self.prover_clock.read(now))
        else:
            request = pd_initiate_basic(dev)
        envelope = aead_seal(self.key, request, dev.rng)
        self.transmit(self.prover_name, VEHICLE, envelope, type(request).__name__, 1)
        self.loop.at(now + self.sc.timeout_us, lambda: self._timeout(idx))

    def _timeout(self, idx: int) -> None:
        if idx in self.terminal or idx != self.session_index:
            return
        session = self.vehicle.sessions.get(self.active) if self.active else None
        verdict = Verdict(Outcome.REJECT, Reason.TIMEOUT)
        if session is not None and session.verdict is None:
            session.decide(verdict)
        self.finish(verdict, VEHICLE, session)

    def run(self) -> RunResult:
        self.loop.at(self.sc.start_us, self.start_session)
        self.loop.run()
        verdicts = [self.terminal[i][0] for i in sorted(self.terminal)]
        last = max(self.terminal)
        verdict, by = self.terminal[last]
        return RunResult(
            scenario=self.sc,
            trace=self.trace,
            verdict=verdict,
            session_verdicts=verdicts,
            history=self.history,
            decided_by=by,
            metrics=self._metrics(),
            costs={VEHICLE: self.vehicle.counter.as_tuple(), KEYFOB: self.prover.counter.as_tuple()},
        )

    def _metrics(self) -> dict[str, object]:
        out: dict[str, object] = {
            "reinit": sum(v.outcome is Outcome.REINIT for v in self.history),
            "hop_delays_us": dict(sorted(self.hop_delays.items())),
            **self.observed,
        }
        v_sessions = list(self.vehicle.sessions.values())
        if v_sessions:
            out.update(v_sessions[-1].metrics)
        p_sessions = list(self.prover.sessions.values())
        if p_sessions and "p2_us" in p_sessions[-1].metrics:
            out["p2_us"] = p_sessions[-1].metrics["p2_us"]
        return out


def run_scenario(scenario: Scenario) -> RunResult:
    """Execute ``scenario`` deterministically from its seed."""
    return _Run(scenario).run()
