"""One honest keyfob unlock, end to end, with the full event trace."""

from pathlib import Path

from perimeter.cli import render_report
from perimeter.sim import load_scenario, run_scenario

corpus = Path(__file__).resolve().parent.parent / "scenarios"
result = run_scenario(load_scenario(corpus / "honest_pedersen_demo.toml"))

print(result.trace.to_text())
print(render_report(result))
m = result.metrics
print(f"The holder walked {m['disp_kf']:.3f} m in {m['w_kf_us'] / 1e6:.3f} s; "
      f"the vehicle's reconstruction gives {m['vel_v']:.4f} m/s against the keyfob's {m['vel_kf']:.4f} m/s.")
