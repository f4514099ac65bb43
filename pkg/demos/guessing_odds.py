"""How often does a keyless adversary get lucky?

Relaying a random response digest passes n consecutive one-bit rounds with
probability 2^-n; guessing an EDR log succeeds with probability one over
the size of the event space.
"""

from pathlib import Path

from perimeter.sim import load_scenario
from perimeter.sim.montecarlo import edr_guess_experiment, estimate_advantage
from perimeter.sim.scenario import GuessSpace

corpus = Path(__file__).resolve().parent.parent / "scenarios"
sc = load_scenario(corpus / "brute_force_1bit.toml")
print("rounds  empirical   analytic   z      95% interval")
for n in (0, 1, 2, 4, 8):
    e = estimate_advantage(sc, n, 200_000)
    lo, hi = e.ci()
    print(f"{n:>6}  {e.rate:.6f}  {e.analytic:.6f}  {e.z:+.2f}  [{lo:.6f}, {hi:.6f}]")

for space in (GuessSpace(1, 1, 5), GuessSpace(2, 4, 3), GuessSpace(6, 16, 10)):
    e, size = edr_guess_experiment(space, 50_000, seed=7)
    print(f"EDR guess over {size} possibilities: {e.successes}/{e.trials} hits")
