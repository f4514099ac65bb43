import subprocess
import sys
from pathlib import Path

import pytest

from perimeter.cli import main

CORPUS = Path(__file__).resolve().parent.parent / "scenarios"


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_honest_run_exit_zero(capsys, tmp_path):
    trace, report = tmp_path / "t.txt", tmp_path / "r.txt"
    code, out, _ = cli(capsys, "run", CORPUS / "honest.toml", "--trace", trace, "--report", report)
    assert code == 0
    assert report.read_text() == out
    assert "verdict\taccept" in out
    assert out.startswith("# perimeter-report hash=sha256 build=perimeter-0.1.0 group.p=23 group.q=11")
    assert trace.read_text().splitlines()[-1].startswith("# end events=")


def test_expected_rejection_exit_zero(capsys):
    code, out, _ = cli(capsys, "run", CORPUS / "relay_pure.toml")
    assert code == 0 and "reject(propagation-excess)" in out


def test_verdict_mismatch_exit_one(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text((CORPUS / "stale_keyfob.toml").read_text().replace('expect = "reject(digest-mismatch)"', 'expect = "accept"'))
    code, _, err = cli(capsys, "run", cfg)
    assert code == 1 and "does not meet" in err


def test_missing_group_q_exit_two(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("seed = 1\n[group]\np = 23\ng = 2\n")
    code, _, err = cli(capsys, "run", cfg)
    assert code == 2 and "group.q" in err


def test_unreadable_and_malformed_config(capsys, tmp_path):
    assert cli(capsys, "run", tmp_path / "absent.toml")[0] == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[group\n")
    assert cli(capsys, "run", bad)[0] == 2


def test_seed_override_and_env(capsys, monkeypatch, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text((CORPUS / "honest.toml").read_text().replace("seed = 1\n", ""))
    monkeypatch.delenv("PERIMETER_SEED", raising=False)
    assert cli(capsys, "run", cfg)[0] == 2
    monkeypatch.setenv("PERIMETER_SEED", "99")
    code, out, _ = cli(capsys, "run", cfg)
    assert code == 0 and "seed\t99" in out
    code, out, _ = cli(capsys, "run", cfg, "--seed", 7)
    assert "seed\t7" in out


def test_reports_are_byte_identical(capsys, tmp_path):
    outs = []
    for i in range(2):
        trace, report = tmp_path / f"t{i}", tmp_path / f"r{i}"
        cli(capsys, "run", CORPUS / "mafia_substitute.toml", "--trace", trace, "--report", report)
        outs.append((trace.read_bytes(), report.read_bytes()))
    assert outs[0] == outs[1]


def test_sweep_table(capsys):
    code, out, _ = cli(
        capsys, "sweep", CORPUS / "relay_subthreshold.toml", "--grid", "adversary.t_relay=0,0.001,0.002", "--no-gait"
    )
    lines = out.splitlines()
    assert code == 0 and lines[0].split("\t")[:2] == ["adversary.t_relay", "verdict"]
    assert [line.split("\t")[4] for line in lines[1:]] == ["no", "no", "yes"]


def test_sweep_aligned_and_empty(capsys):
    code, out, _ = cli(capsys, "sweep", CORPUS / "honest.toml", "--grid", "adversary.t_relay=")
    assert code == 0 and len(out.splitlines()) == 1
    code, out, _ = cli(capsys, "sweep", CORPUS / "honest.toml", "--grid", "timing.vel_epsilon=0.1", "--aligned")
    assert code == 0 and "\t" not in out


def test_sweep_bad_grid(capsys):
    assert cli(capsys, "sweep", CORPUS / "honest.toml", "--grid", "nonsense")[0] == 2
    assert cli(capsys, "sweep", CORPUS / "honest.toml", "--grid", "adversary.mode=warp")[0] == 2


def test_sweep_vel_epsilon_boundary(capsys):
    cfg = CORPUS / "mafia_gait.toml"
    code, out, _ = cli(capsys, "sweep", cfg, "--grid", "timing.vel_epsilon=0.05,0.1,0.2,0.5")
    flags = [line.split("\t")[-1] for line in out.splitlines()[1:]]
    # about 0.148 m/s of deviation: the gait check alone flips between 0.1 and 0.2
    assert flags == ["yes", "yes", "no", "no"]


def test_advantage(capsys):
    cfg = CORPUS / "brute_force_1bit.toml"
    code, out, _ = cli(capsys, "advantage", cfg, "--rounds", 0, "--trials", 100)
    assert code == 0 and out.splitlines()[-1].split("\t")[3] == "1.000000"
    code, out, _ = cli(capsys, "advantage", cfg, "--rounds", 1, "--trials", 20000)
    row = out.splitlines()[-1].split("\t")
    assert code == 0 and row[-1] == "True"


def test_advantage_not_measurable(capsys):
    code, _, err = cli(capsys, "advantage", CORPUS / "brute_force_body.toml", "--rounds", 1, "--trials", 1000)
    assert code == 2 and "warning" in err
    assert cli(capsys, "advantage", CORPUS / "honest.toml", "--rounds", 1, "--trials", 10)[0] == 2


def test_check_trace(capsys, tmp_path):
    trace = tmp_path / "t.txt"
    cli(capsys, "run", CORPUS / "honest.toml", "--trace", trace)
    code, out, _ = cli(capsys, "check", trace, "--verifier", "vehicle", "--prover", "keyfob")
    assert code == 0 and out.count("\tholds\t") == 4


def test_check_mafia_trace(capsys, tmp_path):
    trace = tmp_path / "t.txt"
    cli(capsys, "run", CORPUS / "mafia_substitute.toml", "--trace", trace)
    _, out, _ = cli(capsys, "check", trace)
    status = dict(line.split("\t")[:2] for line in out.splitlines()[1:])
    assert status == {
        "aliveness": "holds",
        "weak-agreement": "holds",
        "non-injective-agreement": "violated",
        "agreement": "violated",
    }


def test_check_truncated_trace(capsys, tmp_path):
    trace = tmp_path / "t.txt"
    cli(capsys, "run", CORPUS / "honest.toml", "--trace", trace)
    lines = trace.read_text().splitlines()
    trace.write_text("\n".join(lines[:5]) + "\n")
    code, _, err = cli(capsys, "check", trace)
    assert code == 2 and "line 5" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "perimeter", "run", str(CORPUS / "honest.toml")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "verdict\taccept" in proc.stdout
