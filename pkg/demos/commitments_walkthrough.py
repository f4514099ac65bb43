"""Schnorr identification and Pedersen commitments in the toy group p=23, q=11.

Shows an honest round of each, a forged Schnorr response failing, and the
special-soundness extractor recovering the secret from two transcripts.
"""

import random

from perimeter import commitments as cm
from perimeter.group import DEMO_GROUP, TOY_GROUP as G

rng = random.Random(2024)

kp = cm.schnorr_keygen(G, rng)
c = cm.schnorr_commit(G, rng)
k = G.scalar(7)
rho = cm.schnorr_respond(kp, c, k)
print(f"Schnorr: secret a={kp.a.value}, public A={kp.A.value}, commit X={c.X.value}")
print(f"  challenge k={k.value}, response rho={rho.value}, verifies: {cm.schnorr_verify(G, kp.A, c.X, k, rho)}")
forged = G.scalar(rho.value + 1)
print(f"  forged rho={forged.value} verifies: {cm.schnorr_verify(G, kp.A, c.X, k, forged)}")

# the same commitment answered twice gives the secret away
k2 = G.scalar(3)
rho2 = cm.schnorr_respond(kp, c, k2)
print(f"  extractor from (k={k.value}, rho={rho.value}) and (k={k2.value}, rho={rho2.value}): "
      f"a={cm.schnorr_extract(G, k, rho, k2, rho2).value}")

pk = cm.pedersen_keygen(G, rng)
pc = cm.pedersen_commit(G, rng)
r1, r2 = cm.pedersen_respond(pk, pc, k)
t = cm.CommitmentTranscript.from_pedersen(pc.C, k, (r1, r2))
print(f"Pedersen: {t.to_text()} verifies: {cm.pedersen_verify(G, pk.X, pc.C, k, r1, r2)}")

big = cm.schnorr_keygen(DEMO_GROUP, rng)
print(f"256-bit group: q has {DEMO_GROUP.q.bit_length()} bits; public key starts {hex(big.A.value)[:18]}...")
