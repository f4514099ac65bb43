import dataclasses
import random

import pytest
from hypothesis import given, strategies as st

from perimeter.edr import EventRecord, MobilityPattern, replicate
from perimeter.group import TOY_GROUP, OpCounter
from perimeter.messages import Identity, Role, SymmetricKey
from perimeter.protocol import (
    ACCEPT,
    CommitmentBackend,
    Device,
    Outcome,
    Phase,
    Reason,
    Rejected,
    SessionState,
    TimingPolicy,
    Vehicle,
    _prefix_equal,
    cost_counters,
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

KEY = SymmetricKey(bytes(range(16)))
DRIVE = [EventRecord.from_float(t, "velocity", 10.0 + t) for t in range(3)]


def pair(policy=TimingPolicy(), backend=CommitmentBackend(), role=Role.KEYFOB, vehicle_name="car"):
    pattern = MobilityPattern().extend(DRIVE)
    v_id = Identity.named(Role.VEHICLE, "car")
    v = Vehicle(v_id, KEY, pattern, random.Random(1), policy, 1_000, backend)
    d = Device(
        Identity.named(role, "fob"),
        KEY,
        replicate(pattern),
        Identity.named(Role.VEHICLE, vehicle_name),
        random.Random(2),
        policy,
    )
    register(v, d, random.Random(3))
    return v, d


def walker(speed):
    return lambda t0, t1: speed * (t1 - t0) / 1_000_000


def handshake(v, d, speed=1.5, travel=2_000):
    """Drive one keyfob session by hand; returns (verdict, reinit challenge, arrival)."""
    req = kf_initiate(d, 0)
    ch = vehicle_on_request(v, req, travel)
    resp = kf_on_challenge(d, ch, ch.t_v_send + travel, walker(speed))
    arrival = resp.t_kf_cur + travel
    verdict, again = vehicle_verify(v, resp, arrival)
    return verdict, again, arrival


# -- basic scheme ---------------------------------------------------------------


def test_basic_accept():
    v, d = pair(role=Role.PERIPHERAL)
    ch = vehicle_on_request_basic(v, pd_initiate_basic(d))
    verdict = vehicle_verify_basic(v, pd_respond_basic(d, ch))
    assert verdict.accepted


def test_basic_digest_checked_first():
    v, d = pair(role=Role.PERIPHERAL)
    d.pattern = MobilityPattern().extend(DRIVE[:-1])
    req = dataclasses.replace(pd_initiate_basic(d), id_pd=b"\x00" * 16)
    with pytest.raises(Rejected) as exc:
        vehicle_on_request_basic(v, req)
    assert exc.value.reason is Reason.DIGEST_MISMATCH


def test_basic_unknown_identity_and_replay():
    v, d = pair(role=Role.PERIPHERAL)
    req = pd_initiate_basic(d)
    with pytest.raises(Rejected) as exc:
        vehicle_on_request_basic(v, dataclasses.replace(req, id_pd=b"\x01" * 16))
    assert exc.value.reason is Reason.UNKNOWN_IDENTITY
    vehicle_on_request_basic(v, req)
    with pytest.raises(Rejected) as exc:
        vehicle_on_request_basic(v, req)
    assert exc.value.reason is Reason.NONCE_REPLAY


def test_basic_device_refuses_foreign_vehicle():
    v, d = pair(role=Role.PERIPHERAL, vehicle_name="other-car")
    ch = vehicle_on_request_basic(v, pd_initiate_basic(d))
    with pytest.raises(Rejected) as exc:
        pd_respond_basic(d, ch)
    assert exc.value.reason is Reason.VEHICLE_ID_MISMATCH


def test_basic_bad_response():
    v, d = pair(role=Role.PERIPHERAL)
    ch = vehicle_on_request_basic(v, pd_initiate_basic(d))
    resp = pd_respond_basic(d, ch)
    forged = dataclasses.replace(resp, response=bytes(32))
    assert str(vehicle_verify_basic(v, forged)) == "reject(bad-response)"


# -- keyfob scheme --------------------------------------------------------------


def test_keyfob_hand_timed_session():
    v, d = pair()
    verdict, again, arrival = handshake(v, d, speed=1.5, travel=2_000)
    assert verdict.accepted and again is None
    m = next(iter(v.sessions.values())).metrics
    # request at 0, challenge leaves at 3000, keyfob answers at the end of its 2 s window
    assert (m["p1_us"], m["p3_us"]) == (2_000, 2_000)
    assert arrival == 2_002_000
    assert m["w_kf_us"] == 2_000_000
    assert m["w_v_us"] == 2_002_000 - 1_000
    assert m["disp_kf"] == pytest.approx(3.0)
    assert m["vel_v"] == pytest.approx(3.0 / 2.001)
    assert next(iter(d.sessions.values())).metrics["p2_us"] == 2_000


@pytest.mark.parametrize("travel, reason", [(6_000, None), (6_001, Reason.PROPAGATION_EXCESS)])
def test_hop_bound_is_inclusive(travel, reason):
    v, d = pair(TimingPolicy(t_travel_max_us=5_000, t_epsilon_us=1_000))
    req = kf_initiate(d, 0)
    if reason is None:
        vehicle_on_request(v, req, travel)
    else:
        with pytest.raises(Rejected) as exc:
            vehicle_on_request(v, req, travel)
        assert exc.value.reason is reason


def test_negative_hop_needs_drift_allowance():
    strict, d = pair()
    # keyfob clock 1 ms ahead: the request seems to arrive before it was sent
    with pytest.raises(Rejected) as exc:
        vehicle_on_request(strict, kf_initiate(d, 1_000), 600)
    assert exc.value.reason is Reason.TIMESTAMP_IMPLAUSIBLE
    lenient, d = pair(TimingPolicy(clock_drift_bound_us=500))
    vehicle_on_request(lenient, kf_initiate(d, 1_000), 600)


def test_early_response_is_implausible():
    v, d = pair(TimingPolicy(t_travel_min_us=1_000))
    req = kf_initiate(d, 0)
    ch = vehicle_on_request(v, req, 2_000)
    resp = kf_on_challenge(d, ch, 4_000, walker(0.0))
    # answered "instantly": before two minimum hops plus processing could elapse
    early = dataclasses.replace(resp, t_kf_cur=2_500)
    verdict, _ = vehicle_verify(v, early, 2_500)
    assert str(verdict) == "reject(timestamp-implausible)"


def test_gait_mismatch_reinit_then_reject():
    v, d = pair(TimingPolicy(hop_check=False))
    req = kf_initiate(d, 0)
    ch = vehicle_on_request(v, req, 2_000)
    resp = kf_on_challenge(d, ch, 5_000, walker(1.5))
    # 300 ms of relay on the way back stretches the vehicle's window
    verdict, again = vehicle_verify(v, resp, resp.t_kf_cur + 300_000)
    assert str(verdict) == "reinit(gait-mismatch)" and again is not None
    assert again.challenge != ch.challenge
    resp2 = kf_on_challenge(d, again, again.t_v_send + 300_000, walker(1.5))
    verdict2, none = vehicle_verify(v, resp2, resp2.t_kf_cur + 300_000)
    assert str(verdict2) == "reject(gait-mismatch)" and none is None


def test_reinit_round_can_recover():
    v, d = pair(TimingPolicy(hop_check=False))
    ch = vehicle_on_request(v, kf_initiate(d, 0), 2_000)
    resp = kf_on_challenge(d, ch, 5_000, walker(1.5))
    verdict, again = vehicle_verify(v, resp, resp.t_kf_cur + 300_000)
    assert verdict.outcome is Outcome.REINIT
    resp2 = kf_on_challenge(d, again, again.t_v_send + 2_000, walker(1.5))
    # the second window starts at the first response, so 2 s of walking is measured again
    assert resp2.t_kf_cur - resp.t_kf_cur == 2_000_000
    verdict2, _ = vehicle_verify(v, resp2, resp2.t_kf_cur + 2_000)
    assert verdict2.accepted


def test_keyfob_answers_at_most_twice():
    v, d = pair()
    ch = vehicle_on_request(v, kf_initiate(d, 0), 2_000)
    kf_on_challenge(d, ch, 5_000, walker(0))
    kf_on_challenge(d, ch, 6_000, walker(0))
    with pytest.raises(Rejected):
        kf_on_challenge(d, ch, 7_000, walker(0))


def test_response_with_unknown_nonce():
    v, d = pair()
    ch = vehicle_on_request(v, kf_initiate(d, 0), 2_000)
    resp = kf_on_challenge(d, ch, 5_000, walker(0))
    verdict, _ = vehicle_verify(v, dataclasses.replace(resp, nonce=bytes(16)), resp.t_kf_cur + 2_000)
    assert str(verdict) == "reject(nonce-mismatch)"


def test_vehicle_id_hash_checked_by_keyfob():
    v, d = pair(vehicle_name="other-car")
    ch = vehicle_on_request(v, kf_initiate(d, 0), 2_000)
    with pytest.raises(Rejected) as exc:
        kf_on_challenge(d, ch, 5_000, walker(0))
    assert exc.value.reason is Reason.VEHICLE_ID_MISMATCH


@pytest.mark.parametrize("scheme", ["schnorr", "pedersen"])
def test_backend_accepts_and_catches_tampering(scheme):
    backend = CommitmentBackend(scheme, TOY_GROUP)
    v, d = pair(backend=backend)
    verdict, _, _ = handshake(v, d)
    assert verdict.accepted
    session = next(iter(v.sessions.values()))
    assert session.transcript.scheme == scheme

    v, d = pair(backend=backend)
    ch = vehicle_on_request(v, kf_initiate(d, 0), 2_000)
    resp = kf_on_challenge(d, ch, 5_000, walker(0))
    bad = tuple((x + 1) % TOY_GROUP.q for x in resp.commitment)
    verdict, _ = vehicle_verify(v, dataclasses.replace(resp, commitment=bad), resp.t_kf_cur + 2_000)
    assert str(verdict) == "reject(commitment-invalid)"


def test_request_commitment_outside_subgroup():
    v, d = pair(backend=CommitmentBackend("schnorr", TOY_GROUP))
    req = kf_initiate(d, 0)
    with pytest.raises(Rejected) as exc:
        vehicle_on_request(v, dataclasses.replace(req, commitment=(5,)), 2_000)
    assert exc.value.reason is Reason.COMMITMENT_INVALID


@pytest.mark.parametrize(
    "scheme, prover_exps, verifier_exps", [("none", 0, 0), ("schnorr", 1, 2), ("pedersen", 2, 3)]
)
def test_instrumented_costs(scheme, prover_exps, verifier_exps):
    backend = CommitmentBackend(scheme, TOY_GROUP) if scheme != "none" else CommitmentBackend()
    v, d = pair(backend=backend)
    v.counter, d.counter = OpCounter(), OpCounter()
    handshake(v, d)
    report = cost_counters(v, d)
    assert report["device"]["measured"] == (prover_exps, 4)
    assert report["vehicle"]["measured"] == (verifier_exps, 4)
    assert report["vehicle"]["discrepancy"]


def test_session_phases_only_move_forward():
    s = SessionState(Role.VEHICLE, bytes(16))
    s.advance(Phase.REQUESTED)
    with pytest.raises(RuntimeError):
        s.advance(Phase.IDLE)
    s.decide(ACCEPT)
    with pytest.raises(RuntimeError):
        s.decide(ACCEPT)


@given(st.binary(min_size=32, max_size=32), st.binary(min_size=32, max_size=32), st.integers(1, 256))
def test_prefix_comparison_matches_integer_shift(a, b, bits):
    shift = 256 - bits
    expected = int.from_bytes(a, "big") >> shift == int.from_bytes(b, "big") >> shift
    assert _prefix_equal(a, b, bits) == expected


def test_policy_validation():
    with pytest.raises(ValueError):
        TimingPolicy(response_bits=0)
    with pytest.raises(ValueError):
        TimingPolicy(t_epsilon_us=-1)
