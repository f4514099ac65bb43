import random

import pytest

from perimeter.messages import (
    BasicChallenge,
    BasicRequest,
    BasicResponse,
    GaitObservation,
    Identity,
    IntegrityFailure,
    KeyfobChallenge,
    KeyfobRequest,
    KeyfobResponse,
    SymmetricKey,
    WireError,
    aead_open,
    aead_seal,
    decode,
    encode,
)

N = bytes(range(16))
D = bytes(range(32))

SAMPLES = [
    BasicRequest(D, Identity.named("peripheral", "phone").id, N),
    BasicChallenge(bytes(16), Identity.named("vehicle", "car").id, N),
    BasicResponse(D, N, "schnorr", (12345,)),
    KeyfobRequest(D, -42, N, "pedersen", (6,)),
    KeyfobChallenge(D, bytes(16), 1_000, 2_000, N),
    KeyfobResponse(D, GaitObservation.measure(3.0, 2_000_000), 2_000_000, N, "pedersen", (8, 5)),
]


@pytest.mark.parametrize("msg", SAMPLES, ids=lambda m: type(m).__name__)
def test_wire_round_trip(msg):
    assert decode(encode(msg)) == msg


def test_wire_layout_keyfob_request():
    body = encode(KeyfobRequest(D, 7, N))
    assert body[0] == 4
    assert body[1:33] == D
    assert body[33:41] == (7).to_bytes(8, "big")
    assert body[41:57] == N
    assert body[57:] == b"\x00\x00"


def test_wire_rejects_garbage():
    with pytest.raises(WireError):
        decode(b"")
    with pytest.raises(WireError):
        decode(b"\x09")
    with pytest.raises(WireError):
        decode(encode(SAMPLES[0])[:-3])
    with pytest.raises(WireError):
        decode(encode(SAMPLES[0]) + b"\x00")


def test_gait_fixed_point():
    g = GaitObservation.measure(3.0, 2_000_000)
    assert (g.displacement, g.duration, g.velocity) == (3.0, 2.0, 1.5)
    assert GaitObservation.measure(0.0, 5).velocity == 0.0
    with pytest.raises(ValueError):
        GaitObservation.measure(1.0, 0)


def test_aead_round_trip_and_wrong_key():
    rng = random.Random(1)
    k1, k2 = SymmetricKey.generate(rng), SymmetricKey.generate(rng)
    sealed = aead_seal(k1, SAMPLES[5], rng)
    assert aead_open(k1, sealed) == SAMPLES[5]
    with pytest.raises(IntegrityFailure):
        aead_open(k2, sealed)


def test_aead_every_single_bit_flip_detected():
    rng = random.Random(2)
    key = SymmetricKey.generate(rng)
    sealed = aead_seal(key, SAMPLES[4], rng)
    for i in range(len(sealed) * 8):
        tampered = bytearray(sealed)
        tampered[i // 8] ^= 1 << (i % 8)
        with pytest.raises(IntegrityFailure):
            aead_open(key, bytes(tampered))


def test_aead_truncation_detected():
    rng = random.Random(3)
    key = SymmetricKey.generate(rng)
    sealed = aead_seal(key, SAMPLES[0], rng)
    for cut in (1, 5, len(sealed) - 1):
        with pytest.raises(IntegrityFailure):
            aead_open(key, sealed[:cut])


def test_identity_is_deterministic():
    a = Identity.named("keyfob", "kf-1")
    assert a == Identity.named("keyfob", "kf-1")
    assert a != Identity.named("keyfob", "kf-2")
    assert len(a.id) == 16
