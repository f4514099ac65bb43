"""Aliveness, weak agreement, non-injective agreement and agreement on real traces.

An honest run satisfies all four. A mafia fraud where the leech swaps in a
guessed response (one response bit, timing checks off) still shows a
genuine keyfob run aimed at the vehicle, so the two weaker properties
hold, but the committed session data never matches what the keyfob sent.
In terrorist fraud the owner's keyfob colludes instead of running the
protocol, so the vehicle commits to a partner that was never alive.
"""

from pathlib import Path

from perimeter.properties import check_all, format_report
from perimeter.sim import load_scenario, run_scenario

corpus = Path(__file__).resolve().parent.parent / "scenarios"
for name in ("honest", "honest_two_sessions", "mafia_substitute", "terrorist_fraud"):
    r = run_scenario(load_scenario(corpus / f"{name}.toml"))
    print(f"== {name}: {r.verdict}")
    print(format_report(check_all(r.trace, "vehicle", "keyfob"), "vehicle", "keyfob"))
