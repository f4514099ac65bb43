"""Three-way handshakes between a vehicle and a paired device.

Basic scheme (peripheral devices): EDR digest + identity + nonce, then a
random challenge answered with ``H(C_v)``.

Keyfob scheme: the same proactive digest check plus per-hop propagation
bounds and a gait cross-check. The keyfob answers ``H(PRF_K(C_v || nonce))``
together with the displacement its pedometer saw over the observation
window; the vehicle rebuilds the window from the timestamps it was given
and compares velocities.

Vehicle-side window: ``W_v = (response arrival - t_kf_send) - P`` with
``P = t_v_send - t_v_receive``. The keyfob's window is
``W_kf = t_kf_cur - t_kf_send``. Honest runs give ``W_v - W_kf = p3 - P``,
i.e. a few milliseconds over a window of seconds.

Step functions raise :class:`Rejected` on failure. ``vehicle_verify*``
return the final :class:`Verdict`.

All times are integer microseconds of the party's own clock.
"""

from __future__ import annotations

import enum
import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from . import commitments as cm
from .edr import MobilityPattern, digest
from .group import GroupElement, GroupParams, OpCounter, Scalar, random_scalar
from .messages import (
    CHALLENGE_BYTES,
    NONCE_BYTES,
    BasicChallenge,
    BasicRequest,
    BasicResponse,
    GaitObservation,
    Identity,
    KeyfobChallenge,
    KeyfobRequest,
    KeyfobResponse,
    Role,
    SymmetricKey,
)

__all__ = [
    "Reason",
    "Rejected",
    "Outcome",
    "Verdict",
    "Phase",
    "SessionState",
    "TimingPolicy",
    "CommitmentBackend",
    "Vehicle",
    "Device",
    "register",
    "prf",
    "pd_initiate_basic",
    "vehicle_on_request_basic",
    "pd_respond_basic",
    "vehicle_verify_basic",
    "kf_initiate",
    "vehicle_on_request",
    "kf_on_challenge",
    "vehicle_verify",
    "cost_counters",
    "CLAIMED_COST",
]


class Reason(str, enum.Enum):
    DIGEST_MISMATCH = "digest-mismatch"
    UNKNOWN_IDENTITY = "unknown-identity"
    NONCE_REPLAY = "nonce-replay"
    NONCE_MISMATCH = "nonce-mismatch"
    VEHICLE_ID_MISMATCH = "vehicle-id-mismatch"
    BAD_RESPONSE = "bad-response"
    COMMITMENT_INVALID = "commitment-invalid"
    PROPAGATION_EXCESS = "propagation-excess"
    TIMESTAMP_IMPLAUSIBLE = "timestamp-implausible"
    GAIT_MISMATCH = "gait-mismatch"
    INTEGRITY_FAILURE = "integrity-failure"
    TIMEOUT = "timeout"


class Rejected(Exception):
    def __init__(self, reason: Reason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


class Outcome(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    REINIT = "reinit"


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    reason: Optional[Reason] = None

    def __str__(self) -> str:
        if self.reason is None:
            return self.outcome.value
        return f"{self.outcome.value}({self.reason.value})"

    @property
    def accepted(self) -> bool:
        return self.outcome is Outcome.ACCEPT


ACCEPT = Verdict(Outcome.ACCEPT)


class Phase(enum.IntEnum):
    IDLE = 0
    REQUESTED = 1
    CHALLENGED = 2
    DECIDED = 3


@dataclass
class SessionState:
    role: Role
    nonce: bytes
    phase: Phase = Phase.IDLE
    challenge: Optional[bytes] = None
    rounds: int = 0
    timestamps: dict[str, int] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    verdict: Optional[Verdict] = None
    response_digest: Optional[bytes] = None
    peer: Optional[bytes] = None
    # backend state: prover keeps its secret commitment, verifier the public part
    commitment: object = None
    backend_challenge: Optional[Scalar] = None
    transcript: Optional[cm.CommitmentTranscript] = None

    def advance(self, phase: Phase) -> None:
        if phase <= self.phase:
            raise RuntimeError(f"session cannot move from {self.phase.name} to {phase.name}")
        self.phase = phase

    def decide(self, verdict: Verdict) -> Verdict:
        if self.verdict is not None:
            raise RuntimeError("verdict already set for this session")
        self.verdict = verdict
        self.phase = Phase.DECIDED
        return verdict


@dataclass(frozen=True)
class TimingPolicy:
    """Detection thresholds; times in microseconds, velocity in m/s."""

    t_travel_max_us: int = 5_000
    t_epsilon_us: int = 1_000
    vel_epsilon: float = 0.1
    clock_drift_bound_us: int = 0
    t_travel_min_us: int = 0
    hop_check: bool = True
    gait_check: bool = True
    response_bits: int = 256

    def __post_init__(self) -> None:
        for name in ("t_travel_max_us", "t_epsilon_us", "clock_drift_bound_us", "t_travel_min_us"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.vel_epsilon < 0:
            raise ValueError("vel_epsilon must be >= 0")
        if not 1 <= self.response_bits <= 256:
            raise ValueError("response_bits must be in [1, 256]")

    @property
    def hop_bound_us(self) -> int:
        return self.t_travel_max_us + self.t_epsilon_us + self.clock_drift_bound_us

    def check_hop(self, propagation_us: int) -> None:
        if not self.hop_check:
            return
        if propagation_us < -self.clock_drift_bound_us:
            raise Rejected(Reason.TIMESTAMP_IMPLAUSIBLE, f"hop took {propagation_us}us")
        if propagation_us > self.hop_bound_us:
            raise Rejected(
                Reason.PROPAGATION_EXCESS, f"hop took {propagation_us}us > {self.hop_bound_us}us"
            )


@dataclass(frozen=True)
class CommitmentBackend:
    """Optional Schnorr/Pedersen layer riding on the handshake."""

    scheme: str = "none"
    params: Optional[GroupParams] = None

    def __post_init__(self) -> None:
        if self.scheme not in ("none", "schnorr", "pedersen"):
            raise ValueError(f"unknown commitment scheme {self.scheme!r}")
        if self.scheme != "none" and self.params is None:
            raise ValueError("commitment backend needs group parameters")
        if self.scheme == "pedersen" and self.params.h is None:
            raise ValueError("pedersen backend needs a second generator h")

    @property
    def enabled(self) -> bool:
        return self.scheme != "none"


NO_BACKEND = CommitmentBackend()


@dataclass
class Vehicle:
    identity: Identity
    key: SymmetricKey
    pattern: MobilityPattern
    rng: random.Random
    policy: TimingPolicy = field(default_factory=TimingPolicy)
    processing_us: int = 1_000
    backend: CommitmentBackend = NO_BACKEND
    prover_public: Optional[GroupElement] = None
    registered: dict[bytes, Identity] = field(default_factory=dict)
    seen_nonces: set[bytes] = field(default_factory=set)
    sessions: dict[bytes, SessionState] = field(default_factory=dict)
    counter: OpCounter = field(default_factory=OpCounter)


@dataclass
class Device:
    """A peripheral device or keyfob paired with one vehicle."""

    identity: Identity
    key: SymmetricKey
    pattern: MobilityPattern
    vehicle: Identity
    rng: random.Random
    policy: TimingPolicy = field(default_factory=TimingPolicy)
    gait_window_us: int = 2_000_000
    backend: CommitmentBackend = NO_BACKEND
    prover_keys: Union[cm.SchnorrKeypair, cm.PedersenKeypair, None] = None
    used_nonces: set[bytes] = field(default_factory=set)
    sessions: dict[bytes, SessionState] = field(default_factory=dict)
    counter: OpCounter = field(default_factory=OpCounter)


def register(
    vehicle: Vehicle, device: Device, keygen_rng: Optional[random.Random] = None
) -> None:
    """Bind a device to a vehicle and install backend key material."""
    if device.key != vehicle.key:
        raise ValueError("device and vehicle must share the setup key K")
    vehicle.registered[device.identity.id] = device.identity
    backend = vehicle.backend
    device.backend = backend
    if not backend.enabled:
        return
    if device.prover_keys is None:
        rng = keygen_rng or device.rng
        if backend.scheme == "schnorr":
            device.prover_keys = cm.schnorr_keygen(backend.params, rng)
        else:
            device.prover_keys = cm.pedersen_keygen(backend.params, rng)
    keys = device.prover_keys
    vehicle.prover_public = keys.A if isinstance(keys, cm.SchnorrKeypair) else keys.X


def _hash(counter: OpCounter, *parts: bytes) -> bytes:
    counter.hash_digests += 1
    return hashlib.sha256(b"".join(parts)).digest()


def prf(key: SymmetricKey, data: bytes, counter: Optional[OpCounter] = None) -> bytes:
    """Keyed 256-bit PRF: SHA-256 over ``K || data``."""
    if counter is not None:
        counter.hash_digests += 1
    return hashlib.sha256(key.bytes + data).digest()


def _prefix_equal(a: bytes, b: bytes, bits: int) -> bool:
    if bits >= 8 * len(a):
        return a == b
    whole, rest = divmod(bits, 8)
    if a[:whole] != b[:whole]:
        return False
    if rest == 0:
        return True
    mask = (0xFF << (8 - rest)) & 0xFF
    return (a[whole] & mask) == (b[whole] & mask)


def _fresh_nonce(device: Device) -> bytes:
    while True:
        nonce = device.rng.randbytes(NONCE_BYTES)
        if nonce not in device.used_nonces:
            device.used_nonces.add(nonce)
            return nonce


# -- commitment backend steps -------------------------------------------------


def _prover_commit(device: Device, session: SessionState) -> tuple[int, ...]:
    backend = device.backend
    if not backend.enabled:
        return ()
    if backend.scheme == "schnorr":
        c = cm.schnorr_commit(backend.params, device.rng, counter=device.counter)
        session.commitment = c
        return (c.X.value,)
    c = cm.pedersen_commit(backend.params, device.rng, counter=device.counter)
    session.commitment = c
    return (c.C.value,)


def _verifier_store_commit(
    vehicle: Vehicle, session: SessionState, scheme: str, values: tuple[int, ...]
) -> tuple[int, ...]:
    """Check the request's commitment fields and draw the backend challenge."""
    backend = vehicle.backend
    if not backend.enabled:
        return ()
    if scheme != backend.scheme or len(values) != 1:
        raise Rejected(Reason.COMMITMENT_INVALID, "request lacks the expected commitment")
    try:
        session.commitment = backend.params.element(values[0])
    except ValueError as exc:
        raise Rejected(Reason.COMMITMENT_INVALID, str(exc)) from exc
    session.backend_challenge = random_scalar(vehicle.rng, backend.params)
    return (session.backend_challenge.value,)


def _prover_respond(device: Device, session: SessionState, scheme: str, values: tuple[int, ...]) -> tuple[int, ...]:
    backend = device.backend
    if not backend.enabled:
        return ()
    if scheme != backend.scheme or len(values) != 1:
        raise Rejected(Reason.COMMITMENT_INVALID, "challenge lacks the backend challenge")
    k = backend.params.scalar(values[0])
    if backend.scheme == "schnorr":
        return (cm.schnorr_respond(device.prover_keys, session.commitment, k).value,)
    return tuple(r.value for r in cm.pedersen_respond(device.prover_keys, session.commitment, k))


def _verifier_check(
    vehicle: Vehicle, session: SessionState, scheme: str, values: tuple[int, ...]
) -> None:
    backend = vehicle.backend
    if not backend.enabled:
        return
    params = backend.params
    k = session.backend_challenge
    expected = 1 if backend.scheme == "schnorr" else 2
    if scheme != backend.scheme or len(values) != expected:
        raise Rejected(Reason.COMMITMENT_INVALID, "response lacks backend values")
    responses = tuple(params.scalar(v) for v in values)
    if backend.scheme == "schnorr":
        ok = cm.schnorr_verify(
            params, vehicle.prover_public, session.commitment, k, responses[0], vehicle.counter
        )
        session.transcript = cm.CommitmentTranscript.from_schnorr(session.commitment, k, responses[0])
    else:
        ok = cm.pedersen_verify(
            params, vehicle.prover_public, session.commitment, k, *responses, counter=vehicle.counter
        )
        session.transcript = cm.CommitmentTranscript.from_pedersen(session.commitment, k, responses)
    if not ok:
        raise Rejected(Reason.COMMITMENT_INVALID, "commitment proof did not verify")


# -- basic (peripheral) scheme --------------------------------------------------


def pd_initiate_basic(device: Device) -> BasicRequest:
    nonce = _fresh_nonce(device)
    session = SessionState(Role.PERIPHERAL, nonce)
    session.advance(Phase.REQUESTED)
    device.sessions[nonce] = session
    device.counter.hash_digests += 1
    edr = digest(device.pattern).bytes
    commit = _prover_commit(device, session)
    return BasicRequest(edr, device.identity.id, nonce, device.backend.scheme, commit)


def _vehicle_digest(vehicle: Vehicle) -> bytes:
    vehicle.counter.hash_digests += 1
    return digest(vehicle.pattern).bytes


def vehicle_on_request_basic(vehicle: Vehicle, request: BasicRequest) -> BasicChallenge:
    if request.edr_digest != _vehicle_digest(vehicle):
        raise Rejected(Reason.DIGEST_MISMATCH)
    if request.id_pd not in vehicle.registered:
        raise Rejected(Reason.UNKNOWN_IDENTITY)
    if request.nonce in vehicle.seen_nonces:
        raise Rejected(Reason.NONCE_REPLAY)
    vehicle.seen_nonces.add(request.nonce)
    session = SessionState(Role.VEHICLE, request.nonce)
    session.advance(Phase.REQUESTED)
    k = _verifier_store_commit(vehicle, session, request.scheme, request.commitment)
    session.challenge = vehicle.rng.randbytes(CHALLENGE_BYTES)
    session.peer = request.id_pd
    session.advance(Phase.CHALLENGED)
    vehicle.sessions[request.nonce] = session
    return BasicChallenge(
        session.challenge, vehicle.identity.id, request.nonce, vehicle.backend.scheme, k
    )


def _open_device_session(device: Device, nonce: bytes) -> SessionState:
    session = device.sessions.get(nonce)
    if session is None or session.phase is Phase.DECIDED:
        raise Rejected(Reason.NONCE_MISMATCH)
    return session


def pd_respond_basic(device: Device, challenge: BasicChallenge) -> BasicResponse:
    session = _open_device_session(device, challenge.nonce)
    if session.phase is not Phase.REQUESTED:
        raise Rejected(Reason.NONCE_MISMATCH, "session already answered")
    if challenge.id_v != device.vehicle.id:
        session.decide(Verdict(Outcome.REJECT, Reason.VEHICLE_ID_MISMATCH))
        raise Rejected(Reason.VEHICLE_ID_MISMATCH)
    backend_values = _prover_respond(device, session, challenge.scheme, challenge.commitment)
    session.challenge = challenge.challenge
    session.response_digest = _hash(device.counter, challenge.challenge)
    session.advance(Phase.CHALLENGED)
    return BasicResponse(
        session.response_digest, challenge.nonce, device.backend.scheme, backend_values
    )


def _open_vehicle_session(vehicle: Vehicle, nonce: bytes) -> SessionState:
    session = vehicle.sessions.get(nonce)
    if session is None or session.phase is not Phase.CHALLENGED:
        raise Rejected(Reason.NONCE_MISMATCH)
    return session


def _reject(session: Optional[SessionState], exc: Rejected) -> Verdict:
    verdict = Verdict(Outcome.REJECT, exc.reason)
    if session is not None and session.verdict is None:
        session.decide(verdict)
    return verdict


def vehicle_verify_basic(vehicle: Vehicle, response: BasicResponse) -> Verdict:
    session = None
    try:
        session = _open_vehicle_session(vehicle, response.nonce)
        session.response_digest = response.response
        expected = _hash(vehicle.counter, session.challenge)
        if not _prefix_equal(expected, response.response, vehicle.policy.response_bits):
            raise Rejected(Reason.BAD_RESPONSE)
        _verifier_check(vehicle, session, response.scheme, response.commitment)
    except Rejected as exc:
        return _reject(session, exc)
    return session.decide(ACCEPT)


# -- keyfob scheme --------------------------------------------------------------


def kf_initiate(keyfob: Device, now: int) -> KeyfobRequest:
    """Open a session at local time ``now``."""
    nonce = _fresh_nonce(keyfob)
    session = SessionState(Role.KEYFOB, nonce)
    session.advance(Phase.REQUESTED)
    session.timestamps["t_kf_send"] = now
    session.timestamps["t_ref"] = now
    keyfob.sessions[nonce] = session
    keyfob.counter.hash_digests += 1
    edr = digest(keyfob.pattern).bytes
    commit = _prover_commit(keyfob, session)
    return KeyfobRequest(edr, now, nonce, keyfob.backend.scheme, commit)


def _challenge_message(vehicle: Vehicle, session: SessionState, now: int, backend: tuple[int, ...]) -> KeyfobChallenge:
    session.challenge = vehicle.rng.randbytes(CHALLENGE_BYTES)
    session.rounds += 1
    t_send = now + vehicle.processing_us
    session.timestamps["t_v_receive"] = now
    session.timestamps["t_v_send"] = t_send
    return KeyfobChallenge(
        _hash(vehicle.counter, vehicle.identity.id),
        session.challenge,
        now,
        t_send,
        session.nonce,
        vehicle.backend.scheme if backend else "none",
        backend,
    )


def vehicle_on_request(vehicle: Vehicle, request: KeyfobRequest, now: int) -> KeyfobChallenge:
    """Check the digest, nonce freshness and hop-1 propagation; issue ``C_v``.

    The returned challenge is due on the air at ``t_v_send = now + P``.
    """
    if request.edr_digest != _vehicle_digest(vehicle):
        raise Rejected(Reason.DIGEST_MISMATCH)
    if request.nonce in vehicle.seen_nonces:
        raise Rejected(Reason.NONCE_REPLAY)
    vehicle.seen_nonces.add(request.nonce)
    p1 = now - request.t_kf_send
    vehicle.policy.check_hop(p1)
    session = SessionState(Role.VEHICLE, request.nonce)
    session.advance(Phase.REQUESTED)
    session.timestamps["t_kf_send"] = request.t_kf_send
    session.timestamps["t_ref"] = request.t_kf_send
    session.metrics["p1_us"] = p1
    k = _verifier_store_commit(vehicle, session, request.scheme, request.commitment)
    message = _challenge_message(vehicle, session, now, k)
    session.advance(Phase.CHALLENGED)
    vehicle.sessions[request.nonce] = session
    return message


Pedometer = Callable[[int, int], float]


def kf_on_challenge(
    keyfob: Device, challenge: KeyfobChallenge, now: int, pedometer: Pedometer
) -> KeyfobResponse:
    """Answer a challenge received at local time ``now``.

    The keyfob keeps observing gait until ``t_ref + gait_window`` (or answers
    at once if that has passed); the response carries ``t_kf_cur``, the send
    time. ``pedometer(t0, t1)`` returns metres walked between local times.
    """
    session = _open_device_session(keyfob, challenge.nonce)
    if session.rounds >= 2:
        raise Rejected(Reason.NONCE_MISMATCH, "re-initialisation budget spent")
    try:
        if challenge.hashed_vehicle_id != _hash(keyfob.counter, keyfob.vehicle.id):
            raise Rejected(Reason.VEHICLE_ID_MISMATCH)
        p2 = now - challenge.t_v_send
        keyfob.policy.check_hop(p2)
        first_round = session.rounds == 0
        backend_values = ()
        if first_round:
            backend_values = _prover_respond(keyfob, session, challenge.scheme, challenge.commitment)
    except Rejected as exc:
        _reject(session, exc)
        raise
    t_ref = session.timestamps["t_ref"]
    t_cur = max(now, t_ref + keyfob.gait_window_us)
    gait = GaitObservation.measure(pedometer(t_ref, t_cur), t_cur - t_ref)
    r_kf = prf(keyfob.key, challenge.challenge + challenge.nonce, keyfob.counter)
    session.response_digest = _hash(keyfob.counter, r_kf)
    session.challenge = challenge.challenge
    session.rounds += 1
    session.metrics[f"p2_us#{session.rounds}"] = p2
    session.metrics["p2_us"] = p2
    session.timestamps["t_kf_cur"] = t_cur
    # a re-initialised round measures from this response onwards
    session.timestamps["t_ref"] = t_cur
    if first_round:
        session.advance(Phase.CHALLENGED)
    return KeyfobResponse(
        session.response_digest,
        gait,
        t_cur,
        challenge.nonce,
        keyfob.backend.scheme if backend_values else "none",
        backend_values,
    )


def vehicle_verify(
    vehicle: Vehicle, response: KeyfobResponse, now: int
) -> tuple[Verdict, Optional[KeyfobChallenge]]:
    """Decide on a response arriving at ``now``.

    Returns ``(verdict, None)`` or, on a first gait mismatch,
    ``(reinit(gait-mismatch), fresh_challenge)``.
    """
    session = None
    policy = vehicle.policy
    try:
        session = _open_vehicle_session(vehicle, response.nonce)
        session.response_digest = response.hashed_response
        r_kf = prf(vehicle.key, session.challenge + session.nonce, vehicle.counter)
        expected = _hash(vehicle.counter, r_kf)
        if not _prefix_equal(expected, response.hashed_response, policy.response_bits):
            raise Rejected(Reason.BAD_RESPONSE)
        if session.rounds == 1:
            _verifier_check(vehicle, session, response.scheme, response.commitment)
        t_ref = session.timestamps["t_ref"]
        P = session.timestamps["t_v_send"] - session.timestamps["t_v_receive"]
        p3 = now - response.t_kf_cur
        session.metrics["p3_us"] = p3
        policy.check_hop(p3)
        if policy.hop_check and now < t_ref + 2 * policy.t_travel_min_us + P:
            raise Rejected(Reason.TIMESTAMP_IMPLAUSIBLE, "response arrived too early")
        w_v = (now - t_ref) - P
        if w_v <= 0:
            raise Rejected(Reason.TIMESTAMP_IMPLAUSIBLE, "empty vehicle-side gait window")
        vel_v = response.gait.displacement / (w_v / 1_000_000)
        deviation = vel_v - response.gait.velocity
        session.metrics.update(
            w_kf_us=response.gait.duration_us,
            w_v_us=w_v,
            disp_kf=response.gait.displacement,
            vel_kf=response.gait.velocity,
            vel_v=vel_v,
            gait_deviation=deviation,
        )
        n = session.rounds
        session.metrics.update(
            {f"w_kf_us#{n}": response.gait.duration_us, f"w_v_us#{n}": w_v, f"gait_deviation#{n}": deviation}
        )
        if policy.gait_check and abs(deviation) > policy.vel_epsilon:
            if session.rounds >= 2:
                raise Rejected(Reason.GAIT_MISMATCH)
            session.timestamps["t_ref"] = response.t_kf_cur
            return Verdict(Outcome.REINIT, Reason.GAIT_MISMATCH), _challenge_message(
                vehicle, session, now, ()
            )
    except Rejected as exc:
        return _reject(session, exc), None
    return session.decide(ACCEPT), None


# -- cost accounting ----------------------------------------------------------

CLAIMED_COST = {"none": (3, 1), "schnorr": (4, 1), "pedersen": (5, 1)}


def cost_counters(vehicle: Vehicle, device: Device) -> dict[str, dict[str, object]]:
    """Instrumented (exponentiations, hash digests) per party vs. the claimed cost.

    Counters accumulate over every session the parties ran; reset them
    (``party.counter = OpCounter()``) before the session of interest.
    """
    claim = CLAIMED_COST[vehicle.backend.scheme]
    report = {}
    for party, obj in (("vehicle", vehicle), ("device", device)):
        measured = obj.counter.as_tuple()
        report[party] = {
            "measured": measured,
            "claimed": claim,
            "discrepancy": measured != claim,
        }
    return report
