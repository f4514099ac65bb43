"""Every adversary from the threat model against the same car.

Each scenario file in ``scenarios/`` states the verdict it expects; this
prints what actually happened next to it.
"""

from pathlib import Path

from perimeter.sim import load_scenario, run_scenario
from perimeter.sim.scenario import expectation_met

corpus = Path(__file__).resolve().parent.parent / "scenarios"
for path in sorted(corpus.glob("*.toml")):
    sc = load_scenario(path)
    r = run_scenario(sc)
    steps = " -> ".join(str(v) for v in r.history)
    mark = "ok " if expectation_met(sc.expect, r.verdict, r.history) else "!! "
    print(f"{mark}{sc.name:<26} {sc.adversary.mode.value:<22} {steps:<50} expect={sc.expect}")
