"""Relay detection: sweep the added delay per hop against the tolerance t_epsilon.

With the honest hop close to t_travel_max, any relay adding more than
t_epsilon on some hop is rejected, consistent or not. Very long relays are
also caught by the gait cross-check alone.
"""

from perimeter.sim import scenario_from_dict
from perimeter.sim.montecarlo import sweep

raw = {
    "seed": 5,
    "group": {"p": 23, "q": 11, "g": 2, "h": 3},
    "drive_script": [[0.0, "velocity", 12.5]],
    "timing": {"t_travel_max": 0.00201, "t_epsilon": 0.001, "vel_epsilon": 0.1},
    "world": {"holder_path": [[0.0, 100.0, 0.0], [10.0, 100.0, 15.0]]},
    "adversary": {"mode": "pure_relay", "pos": [50.0, 0.0]},
}
sc = scenario_from_dict(raw)
grid = {
    "adversary.t_relay": [0.0, 0.0005, 0.001, 0.002, 0.01, 0.5],
    "adversary.consistency": ["consistent", "inconsistent"],
}
print(f"{'t_relay':>8} {'schedule':>12} {'per-hop added (us)':>22}  {'verdict':<28} gait flag")
for row in sweep(sc, grid):
    delays = "/".join(str(v) for v in row.hop_delays_us.values())
    print(f"{row.params['adversary.t_relay']:>8} {row.params['adversary.consistency']:>12} {delays:>22}  "
          f"{row.verdict:<28} {row.gait_flag}")
