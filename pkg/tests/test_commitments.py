import itertools
import random

import pytest

from perimeter import commitments as cm
from perimeter.group import TOY_GROUP as G

P, Q = G.p, G.q


def brute(base, exp):
    acc = 1
    for _ in range(exp):
        acc = acc * base % P
    return acc


def test_schnorr_commit_examples():
    rng = random.Random(0)
    assert cm.schnorr_commit(G, rng, x=4).X.value == 16
    assert cm.schnorr_commit(G, rng, x=0).X.value == 1


def test_schnorr_commit_freshness_rate():
    rng = random.Random(11)
    trials = 1000
    same = sum(cm.schnorr_commit(G, rng).x == cm.schnorr_commit(G, rng).x for _ in range(trials))
    # collision probability 1/q; 3-sigma band around trials/q
    sigma = (trials * (1 / Q) * (1 - 1 / Q)) ** 0.5
    assert abs(same - trials / Q) <= 3 * sigma


@pytest.mark.parametrize("x, a, k, rho", [(4, 3, 5, 8), (6, 9, 0, 6), (0, 0, 7, 0)])
def test_schnorr_respond(x, a, k, rho):
    kp = cm.schnorr_keygen(G, random.Random(0), a=a)
    c = cm.schnorr_commit(G, random.Random(0), x=x)
    assert cm.schnorr_respond(kp, c, G.scalar(k)).value == rho == (x + a * k) % Q


def test_schnorr_verify_worked_example():
    A, X = G.element(8), G.element(16)
    # both sides equal 3 mod 23 by brute force
    assert brute(2, 8) == 3 and 16 * brute(8, 5) % P == 3
    assert cm.schnorr_verify(G, A, X, G.scalar(5), G.scalar(8))
    assert brute(2, 7) == 13
    assert not cm.schnorr_verify(G, A, X, G.scalar(5), G.scalar(7))


def test_schnorr_zero_challenge_opens_commitment():
    A = G.element(8)
    for x in range(Q):
        X = G.element(brute(2, x))
        assert cm.schnorr_verify(G, A, X, G.scalar(0), G.scalar(x))
        assert not cm.schnorr_verify(G, A, X, G.scalar(0), G.scalar((x + 1) % Q))


def test_schnorr_completeness_exhaustive():
    for x, a, k in itertools.product(range(Q), repeat=3):
        kp = cm.schnorr_keygen(G, None, a=a)
        c = cm.schnorr_commit(G, None, x=x)
        rho = cm.schnorr_respond(kp, c, G.scalar(k))
        assert cm.schnorr_verify(G, kp.A, c.X, G.scalar(k), rho)


def test_schnorr_soundness_exactly_one_in_q():
    # for any fixed (A, X, k) exactly one rho of q verifies
    for a, x, k in itertools.product(range(Q), repeat=3):
        A, X = G.element(brute(2, a)), G.element(brute(2, x))
        ok = sum(cm.schnorr_verify(G, A, X, G.scalar(k), G.scalar(r)) for r in range(Q))
        assert ok == 1


def test_schnorr_extractor():
    rng = random.Random(5)
    for _ in range(200):
        kp = cm.schnorr_keygen(G, rng)
        c = cm.schnorr_commit(G, rng)
        k1, k2 = rng.sample(range(Q), 2)
        r1 = cm.schnorr_respond(kp, c, G.scalar(k1))
        r2 = cm.schnorr_respond(kp, c, G.scalar(k2))
        assert cm.schnorr_extract(G, G.scalar(k1), r1, G.scalar(k2), r2) == kp.a
    with pytest.raises(ZeroDivisionError):
        cm.schnorr_extract(G, G.scalar(3), G.scalar(1), G.scalar(3), G.scalar(2))


def test_pedersen_commit_worked_example():
    assert (brute(2, 5), brute(3, 6), 9 * 16 % P) == (9, 16, 6)
    c = cm.pedersen_commit(G, None, s1=5, s2=6)
    assert (c.A.value, c.B.value, c.C.value) == (9, 16, 6)
    assert cm.pedersen_commit(G, None, s1=0, s2=0).C.value == 1


def test_pedersen_commitment_has_many_openings():
    preimages = {}
    for s1, s2 in itertools.product(range(Q), repeat=2):
        C = brute(2, s1) * brute(3, s2) % P
        preimages.setdefault(C, []).append((s1, s2))
    # every subgroup element is hit by exactly q pairs
    assert len(preimages) == Q
    assert all(len(v) == Q for v in preimages.values())


@pytest.mark.parametrize(
    "s1, s2, x, y, k, expected",
    [(5, 6, 2, 3, 7, (8, 5)), (5, 6, 2, 3, 0, (5, 6)), (5, 6, 0, 0, 9, (5, 6))],
)
def test_pedersen_respond(s1, s2, x, y, k, expected):
    kp = cm.pedersen_keygen(G, None, x=x, y=y)
    c = cm.pedersen_commit(G, None, s1=s1, s2=s2)
    r1, r2 = cm.pedersen_respond(kp, c, G.scalar(k))
    assert (r1.value, r2.value) == expected


def test_pedersen_verify_worked_example():
    X, C = G.element(16), G.element(6)
    assert brute(2, 2) * brute(3, 3) % P == 16
    lhs = brute(2, 8) * brute(3, 5) % P
    rhs = 6 * brute(16, 7) % P
    assert lhs == rhs == 16
    assert cm.pedersen_verify(G, X, C, G.scalar(7), G.scalar(8), G.scalar(5))
    assert not cm.pedersen_verify(G, X, C, G.scalar(7), G.scalar(8), G.scalar(4))


def test_pedersen_transposed_equation_fails_honest_runs():
    # X * C^k does not hold for the worked example; C * X^k does
    assert 16 * brute(6, 7) % P != 16


def test_pedersen_zero_challenge_is_opening():
    X = G.element(16)
    for s1, s2 in itertools.product(range(Q), repeat=2):
        C = G.element(brute(2, s1) * brute(3, s2) % P)
        assert cm.pedersen_verify(G, X, C, G.scalar(0), G.scalar(s1), G.scalar(s2))


def test_pedersen_completeness_random():
    rng = random.Random(3)
    for _ in range(2000):
        kp = cm.pedersen_keygen(G, rng)
        c = cm.pedersen_commit(G, rng)
        k = G.scalar(rng.randrange(Q))
        assert cm.pedersen_verify(G, kp.X, c.C, k, *cm.pedersen_respond(kp, c, k))


def test_pedersen_forgery_rate_by_enumeration():
    # for fixed (X, C, k) the accepting (r1, r2) pairs form one line: q of q^2
    X, C, k = G.element(16), G.element(6), G.scalar(7)
    ok = sum(
        cm.pedersen_verify(G, X, C, k, G.scalar(r1), G.scalar(r2))
        for r1, r2 in itertools.product(range(Q), repeat=2)
    )
    assert ok == Q


def test_transcript_text_round_trip():
    t = cm.CommitmentTranscript.from_pedersen(G.element(6), G.scalar(7), (G.scalar(8), G.scalar(5)))
    assert t.to_text() == "scheme=pedersen commit=6 challenge=7 response=8 response=5"
    assert cm.CommitmentTranscript.from_text(t.to_text()) == t
    with pytest.raises(ValueError):
        cm.CommitmentTranscript.from_text("scheme=schnorr commit=1 bogus=2")
