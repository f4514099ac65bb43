"""Command-line runner: single runs, sweeps, advantage estimates and trace checks.

Exit codes: 0 when the run matches its ``expect`` field (or has none),
1 on a verdict mismatch, 2 on a configuration or trace error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .edr import HASH_NAME
from .properties import check_all, format_report
from .protocol import CLAIMED_COST
from .sim.engine import KEYFOB, VEHICLE, RunResult, run_scenario
from .sim.montecarlo import estimate_advantage, sweep
from .sim.scenario import AdversaryMode, Scenario, ScenarioError, expectation_met, load_scenario
from .sim.trace import TraceError, parse_trace

EXIT_OK, EXIT_MISMATCH, EXIT_ERROR = 0, 1, 2


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, dict):
        return ",".join(f"{k}:{_fmt(v)}" for k, v in value.items()) or "-"
    if value is None:
        return "-"
    return str(value)


def _header(kind: str, sc: Scenario) -> str:
    g = sc.group
    h = g.h if g.h is not None else "-"
    return (
        f"# perimeter-{kind} hash={HASH_NAME} build=perimeter-{__version__} "
        f"group.p={g.p} group.q={g.q} group.g={g.g} group.h={h}"
    )


def render_report(result: RunResult) -> str:
    """Tab-separated run report. Only virtual time appears, so reruns are byte-identical."""
    sc = result.scenario
    m = result.metrics
    rows: list[tuple[str, Any]] = [
        ("scenario", sc.name),
        ("seed", sc.seed),
        ("scheme", sc.scheme),
        ("backend", sc.backend),
        ("adversary", sc.adversary.mode.value),
        ("verdict", str(result.verdict)),
        ("decided_by", result.decided_by),
        ("history", " ".join(str(v) for v in result.history)),
        ("expect", sc.expect),
        ("hop_delays_us", m.get("hop_delays_us")),
    ]
    for key in ("p1_us", "p2_us", "p3_us", "w_kf_us", "w_v_us", "disp_kf", "vel_kf", "vel_v", "gait_deviation"):
        rows.append((key, m.get(key)))
    claim = CLAIMED_COST[sc.backend]
    for party, (exps, hashes) in result.costs.items():
        rows.append((f"cost.{party}", f"exp={exps} hash={hashes}"))
        rows.append((f"cost.{party}.claimed", f"exp={claim[0]} hash={claim[1]}"))
        rows.append((f"cost.{party}.discrepancy", "yes" if (exps, hashes) != claim else "no"))
    for prop in check_all(result.trace, VEHICLE, KEYFOB):
        rows.append((f"property.{prop.name}", str(prop)))
    lines = [_header("report", sc)] + [f"{k}\t{_fmt(v)}" for k, v in rows]
    return "\n".join(lines) + "\n"


def _aligned(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [header] + rows
    ) + "\n"


def _parse_value(text: str) -> Any:
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip()


def _parse_grid(specs: Sequence[str]) -> dict[str, list[Any]]:
    grid: dict[str, list[Any]] = {}
    for spec in specs:
        key, sep, values = spec.partition("=")
        if not sep or not key.strip():
            raise ScenarioError(f"grid spec {spec!r} must look like KEY=v1,v2,...")
        grid[key.strip()] = [_parse_value(v) for v in values.split(",") if v.strip()]
    return grid


def cmd_run(args) -> int:
    sc = load_scenario(args.config, seed=args.seed)
    result = run_scenario(sc)
    report = render_report(result)
    if args.trace:
        Path(args.trace).write_text(result.trace.to_text())
    if args.report:
        Path(args.report).write_text(report)
    sys.stdout.write(report)
    if not expectation_met(sc.expect, result.verdict, result.history):
        print(f"verdict {result.verdict} does not meet expect={sc.expect}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = load_scenario(args.config, seed=args.seed)
    grid = _parse_grid(args.grid or [])
    rows = sweep(sc, grid, gait=not args.no_gait)
    header = list(grid) + ["verdict", "max_added_us", "hop_delays_us", "detected", "gait_deviation", "gait_flag"]
    table = []
    for row in rows:
        table.append(
            [_fmt(row.params[k]) for k in grid]
            + [
                row.verdict,
                str(row.max_added_us),
                _fmt(row.hop_delays_us),
                "no" if row.accepted else "yes",
                _fmt(row.gait_deviation),
                _fmt(row.gait_flag if row.gait_flag is None else ("yes" if row.gait_flag else "no")),
            ]
        )
    if args.aligned:
        sys.stdout.write(_aligned(header, table))
    else:
        sys.stdout.write("\t".join(header) + "\n")
        sys.stdout.writelines("\t".join(r) + "\n" for r in table)
    return EXIT_OK


def cmd_advantage(args) -> int:
    sc = load_scenario(args.config, seed=args.seed)
    if sc.adversary.mode is not AdversaryMode.BRUTE_FORCE_RELAY:
        raise ScenarioError("advantage needs adversary.mode = brute_force_relay")
    if args.rounds < 0 or args.trials < 1:
        raise ScenarioError("--rounds must be >= 0 and --trials >= 1")
    analytic = 2.0 ** (-sc.timing.response_bits * args.rounds)
    if analytic * args.trials < 1:
        print(
            f"warning: expected successes {analytic * args.trials:.3g} < 1; "
            "shrink timing.response_bits or raise --trials",
            file=sys.stderr,
        )
        return EXIT_ERROR
    est = estimate_advantage(sc, args.rounds, args.trials, workers=args.workers)
    low, high = est.ci()
    header = ["rounds", "trials", "successes", "adv", "analytic", "z", "ci95_low", "ci95_high", "within_3sigma"]
    row = [args.rounds, args.trials, est.successes, est.rate, est.analytic, est.z, low, high, est.within()]
    sys.stdout.write(_header("advantage", sc) + "\n")
    sys.stdout.write("\t".join(header) + "\n" + "\t".join(_fmt(v) for v in row) + "\n")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        text = Path(args.trace).read_text()
    except OSError as exc:
        raise TraceError(f"cannot read {args.trace}: {exc.strerror}") from exc
    results = check_all(parse_trace(text), args.verifier, args.prover)
    sys.stdout.write(format_report(results, args.verifier, args.prover))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perimeter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"perimeter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--trace")
    run.add_argument("--report")
    run.set_defaults(fn=cmd_run)

    sw = sub.add_parser("sweep", help="run a grid of config overrides")
    sw.add_argument("config")
    sw.add_argument("--grid", action="append", metavar="KEY=v1,v2")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--aligned", action="store_true", help="aligned columns instead of tabs")
    sw.add_argument("--no-gait", action="store_true", help="skip the gait-only probe runs")
    sw.set_defaults(fn=cmd_sweep)

    adv = sub.add_parser("advantage", help="estimate keyless relay success over n rounds")
    adv.add_argument("config")
    adv.add_argument("--rounds", type=int, required=True)
    adv.add_argument("--trials", type=int, required=True)
    adv.add_argument("--seed", type=int)
    adv.add_argument("--workers", type=int, default=1)
    adv.set_defaults(fn=cmd_advantage)

    chk = sub.add_parser("check", help="check authentication properties of a trace file")
    chk.add_argument("trace")
    chk.add_argument("--verifier", default=VEHICLE)
    chk.add_argument("--prover", default=KEYFOB)
    chk.set_defaults(fn=cmd_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
