"""Schnorr identification and Pedersen commitment-of-knowledge protocols.

Both are three-move interactions: the prover commits, the verifier sends a
random challenge, the prover answers with linear combinations of its
secrets. They plug into the handshake as the reactive commitment.

Pedersen verification uses ``g^r1 * h^r2 == C * X^k``. That is the only
equation the response formulas ``r1 = s1 + k*x``, ``r2 = s2 + k*y`` satisfy;
the transposed form ``X * C^k`` fails for honest provers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Union

from .group import (
    GroupElement,
    GroupParams,
    OpCounter,
    Scalar,
    modexp,
    random_scalar,
)

__all__ = [
    "SchnorrKeypair",
    "SchnorrCommitment",
    "PedersenKeypair",
    "PedersenCommitment",
    "CommitmentTranscript",
    "schnorr_keygen",
    "schnorr_commit",
    "schnorr_respond",
    "schnorr_verify",
    "schnorr_extract",
    "pedersen_keygen",
    "pedersen_commit",
    "pedersen_respond",
    "pedersen_verify",
]


@dataclass(frozen=True)
class SchnorrKeypair:
    a: Scalar
    A: GroupElement


@dataclass(frozen=True)
class SchnorrCommitment:
    x: Scalar
    X: GroupElement


@dataclass(frozen=True)
class PedersenKeypair:
    x: Scalar
    y: Scalar
    X: GroupElement


@dataclass(frozen=True)
class PedersenCommitment:
    s1: Scalar
    s2: Scalar
    A: GroupElement
    B: GroupElement
    C: GroupElement


def schnorr_keygen(
    params: GroupParams, rng: random.Random, a: Optional[int] = None
) -> SchnorrKeypair:
    secret = params.scalar(a) if a is not None else random_scalar(rng, params)
    return SchnorrKeypair(secret, modexp(params.generator, secret, params))


def schnorr_commit(
    params: GroupParams,
    rng: random.Random,
    x: Optional[int] = None,
    counter: Optional[OpCounter] = None,
) -> SchnorrCommitment:
    """Fresh ephemeral ``x`` and its public image ``X = g^x``.

    ``x`` may be forced for worked examples; otherwise it comes from ``rng``.
    """
    secret = params.scalar(x) if x is not None else random_scalar(rng, params)
    return SchnorrCommitment(secret, modexp(params.generator, secret, params, counter))


def schnorr_respond(
    keypair: SchnorrKeypair, commitment: SchnorrCommitment, challenge: Scalar
) -> Scalar:
    return commitment.x + keypair.a * challenge


def schnorr_verify(
    params: GroupParams,
    A: GroupElement,
    X: GroupElement,
    challenge: Scalar,
    response: Scalar,
    counter: Optional[OpCounter] = None,
) -> bool:
    lhs = modexp(params.generator, response, params, counter)
    rhs = params.mul(X, modexp(A, challenge, params, counter))
    return lhs == rhs


def schnorr_extract(
    params: GroupParams,
    challenge1: Scalar,
    response1: Scalar,
    challenge2: Scalar,
    response2: Scalar,
) -> Scalar:
    """Recover the long-term key from two accepting transcripts sharing ``X``.

    Raises ZeroDivisionError when the two challenges coincide.
    """
    return (response1 - response2) * params.inverse(challenge1 - challenge2)


def pedersen_keygen(
    params: GroupParams,
    rng: random.Random,
    x: Optional[int] = None,
    y: Optional[int] = None,
) -> PedersenKeypair:
    sx = params.scalar(x) if x is not None else random_scalar(rng, params)
    sy = params.scalar(y) if y is not None else random_scalar(rng, params)
    X = params.mul(
        modexp(params.generator, sx, params),
        modexp(params.second_generator, sy, params),
    )
    return PedersenKeypair(sx, sy, X)


def pedersen_commit(
    params: GroupParams,
    rng: random.Random,
    s1: Optional[int] = None,
    s2: Optional[int] = None,
    counter: Optional[OpCounter] = None,
) -> PedersenCommitment:
    r1 = params.scalar(s1) if s1 is not None else random_scalar(rng, params)
    r2 = params.scalar(s2) if s2 is not None else random_scalar(rng, params)
    A = modexp(params.generator, r1, params, counter)
    B = modexp(params.second_generator, r2, params, counter)
    return PedersenCommitment(r1, r2, A, B, params.mul(A, B))


def pedersen_respond(
    keypair: PedersenKeypair, commitment: PedersenCommitment, challenge: Scalar
) -> tuple[Scalar, Scalar]:
    return (
        commitment.s1 + challenge * keypair.x,
        commitment.s2 + challenge * keypair.y,
    )


def pedersen_verify(
    params: GroupParams,
    X: GroupElement,
    C: GroupElement,
    challenge: Scalar,
    response1: Scalar,
    response2: Scalar,
    counter: Optional[OpCounter] = None,
) -> bool:
    lhs = params.mul(
        modexp(params.generator, response1, params, counter),
        modexp(params.second_generator, response2, params, counter),
    )
    rhs = params.mul(C, modexp(X, challenge, params, counter))
    return lhs == rhs


@dataclass(frozen=True)
class CommitmentTranscript:
    """Public view of one commit/challenge/response run."""

    scheme: str
    commitments: tuple[int, ...]
    challenge: int
    responses: tuple[int, ...]

    @classmethod
    def from_schnorr(
        cls, commitment: Union[SchnorrCommitment, GroupElement], challenge: Scalar, response: Scalar
    ) -> "CommitmentTranscript":
        X = commitment.X if isinstance(commitment, SchnorrCommitment) else commitment
        return cls("schnorr", (X.value,), challenge.value, (response.value,))

    @classmethod
    def from_pedersen(
        cls, C: GroupElement, challenge: Scalar, responses: tuple[Scalar, Scalar]
    ) -> "CommitmentTranscript":
        return cls("pedersen", (C.value,), challenge.value, tuple(r.value for r in responses))

    def to_text(self) -> str:
        """Fixed-order, decimal rendering used inside trace lines."""
        parts = [f"scheme={self.scheme}"]
        parts += [f"commit={c}" for c in self.commitments]
        parts.append(f"challenge={self.challenge}")
        parts += [f"response={r}" for r in self.responses]
        return " ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "CommitmentTranscript":
        scheme, challenge = None, None
        commitments: list[int] = []
        responses: list[int] = []
        for token in text.split():
            key, _, value = token.partition("=")
            if key == "scheme":
                scheme = value
            elif key == "commit":
                commitments.append(int(value))
            elif key == "challenge":
                challenge = int(value)
            elif key == "response":
                responses.append(int(value))
            else:
                raise ValueError(f"unexpected transcript field {key!r}")
        if scheme not in ("schnorr", "pedersen") or challenge is None:
            raise ValueError(f"incomplete transcript: {text!r}")
        return cls(scheme, tuple(commitments), challenge, tuple(responses))
