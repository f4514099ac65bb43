"""Prime-order subgroup arithmetic modulo a prime.

Both commitment backends work in the order-``q`` subgroup of ``Z_p^*``.
Scalars are reduced mod ``q`` when built, elements are checked for
subgroup membership when built, so downstream code never re-validates.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Optional

from sympy import isprime

__all__ = [
    "GroupParams",
    "Scalar",
    "GroupElement",
    "GroupError",
    "OpCounter",
    "modexp",
    "random_scalar",
    "validate_params",
    "hash_to_subgroup",
    "TOY_GROUP",
    "DEMO_GROUP",
]


class GroupError(ValueError):
    """Raised when a value is outside the group it claims to belong to."""


@dataclass
class OpCounter:
    """Per-party tally of expensive operations."""

    exponentiations: int = 0
    hash_digests: int = 0

    def as_tuple(self) -> tuple[int, int]:
        return (self.exponentiations, self.hash_digests)


@dataclass(frozen=True)
class GroupParams:
    """Modulus ``p``, subgroup order ``q`` and generators ``g`` (and ``h``)."""

    p: int
    q: int
    g: int
    h: Optional[int] = None

    def scalar(self, value: int) -> "Scalar":
        return Scalar(value % self.q, self.q)

    def element(self, value: int) -> "GroupElement":
        value = value % self.p
        if value == 0 or pow(value, self.q, self.p) != 1:
            raise GroupError(f"{value} is not in the order-{self.q} subgroup mod {self.p}")
        return GroupElement(value, self.p)

    @property
    def generator(self) -> "GroupElement":
        return GroupElement(self.g, self.p)

    @property
    def second_generator(self) -> "GroupElement":
        if self.h is None:
            raise GroupError("group parameters carry no second generator h")
        return GroupElement(self.h, self.p)

    def mul(self, *elements: "GroupElement") -> "GroupElement":
        acc = 1
        for e in elements:
            acc = acc * e.value % self.p
        return GroupElement(acc, self.p)

    def inverse(self, s: "Scalar") -> "Scalar":
        if s.value == 0:
            raise ZeroDivisionError("zero scalar has no inverse")
        return Scalar(pow(s.value, -1, self.q), self.q)


@dataclass(frozen=True)
class Scalar:
    value: int
    q: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.q:
            raise GroupError(f"scalar {self.value} outside [0, {self.q})")

    def __add__(self, other: "Scalar") -> "Scalar":
        return Scalar((self.value + other.value) % self.q, self.q)

    def __sub__(self, other: "Scalar") -> "Scalar":
        return Scalar((self.value - other.value) % self.q, self.q)

    def __mul__(self, other: "Scalar") -> "Scalar":
        return Scalar(self.value * other.value % self.q, self.q)

    def __int__(self) -> int:
        return self.value


@dataclass(frozen=True)
class GroupElement:
    value: int
    p: int

    def __int__(self) -> int:
        return self.value


def modexp(
    base: GroupElement,
    exp: Scalar,
    params: GroupParams,
    counter: Optional[OpCounter] = None,
) -> GroupElement:
    """Return ``base ** exp mod p``; the result stays in the subgroup."""
    if counter is not None:
        counter.exponentiations += 1
    return GroupElement(pow(base.value, exp.value, params.p), params.p)


def random_scalar(rng: random.Random, params: GroupParams) -> Scalar:
    """Draw a uniform scalar in ``[0, q)`` from a caller-owned stream."""
    return Scalar(rng.randrange(params.q), params.q)


def validate_params(params: GroupParams) -> Optional[str]:
    """Return ``None`` if the parameters are sound, else the first violation."""
    p, q = params.p, params.q
    if p < 3 or not isprime(p):
        return "p not prime"
    if q < 2 or not isprime(q):
        return "q not prime"
    if (p - 1) % q != 0:
        return "q does not divide p-1"
    for name, gen in (("g", params.g), ("h", params.h)):
        if gen is None:
            continue
        gen %= p
        if gen == 0:
            return f"{name} is zero mod p"
        if gen == 1:
            return f"{name} trivial"
        if pow(gen, q, p) != 1:
            return f"{name} order is not q"
    if params.h is not None and params.h % p == params.g % p:
        return "h equals g"
    return None


def hash_to_subgroup(tag: bytes, p: int, q: int, avoid: tuple[int, ...] = ()) -> int:
    """Map a domain tag to a subgroup element with no known log relation.

    Cofactor exponentiation of a hash output; a counter is appended until
    the result is non-trivial and not in ``avoid``.
    """
    cofactor = (p - 1) // q
    counter = 0
    while True:
        digest = hashlib.sha256(tag + counter.to_bytes(4, "big")).digest()
        candidate = pow(int.from_bytes(digest, "big") % p, cofactor, p)
        if candidate not in (0, 1) and candidate not in avoid:
            return candidate
        counter += 1


# Desk-scale group: soundness rates of ~1/11 are directly observable.
TOY_GROUP = GroupParams(p=23, q=11, g=2, h=3)

_DEMO_P = 0x1743DE2E09C844F73CEE2B08C407D86C671859469F64D45FE72E05C71382CF27B
_DEMO_Q = 0xBA1EF1704E4227B9E7715846203EC36338C2CA34FB26A2FF39702E389C16793D

# Safe prime p = 2q + 1 with a 256-bit q; 4 is a quadratic residue so has order q.
DEMO_GROUP = GroupParams(
    p=_DEMO_P,
    q=_DEMO_Q,
    g=4,
    h=hash_to_subgroup(b"perimeter/pedersen-h", _DEMO_P, _DEMO_Q, avoid=(4,)),
)
