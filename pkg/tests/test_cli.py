import json
import subprocess
import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def run(*args):
    proc = subprocess.run([sys.executable, "-m", "stoptime", *map(str, args)], capture_output=True, text=True)
    report = json.loads(proc.stdout) if proc.stdout.strip() else None
    return proc.returncode, report, proc.stderr


@pytest.mark.parametrize(
    "fixture, space, expected",
    [("ones-depth-1.json", "S", 2.0), ("ones-depth-2.json", "B", 3.0), ("f0-plus-f1.json", "D", 1.0)],
)
def test_norm_command(fixture, space, expected):
    code, rep, _ = run("norm", FIXTURES / fixture, "--space", space, "--base", "lp:1", "--witness")
    assert code == 0
    assert rep["command"] == "norm"
    assert rep["outputs"]["value"] == pytest.approx(expected)
    assert "witness" in rep["outputs"]


def test_norm_witness_antichain():
    _, rep, _ = run("norm", FIXTURES / "ones-depth-1.json", "--space", "S", "--witness")
    assert rep["outputs"]["witness"] == {"antichain": ["0", "1"]}


def test_input_errors_exit_2(tmp_path):
    assert run("norm", FIXTURES / "malformed.json", "--space", "S")[0] == 2
    assert run("norm", tmp_path / "missing.json", "--space", "S")[0] == 2
    assert run("norm", FIXTURES / "ones-depth-1.json", "--space", "S", "--base", "lp:x")[0] == 2
    bad = tmp_path / "deep.json"
    bad.write_text(json.dumps({"depth": 1, "entries": {"0101": 1}}))
    assert run("norm", bad, "--space", "S")[0] == 2


def test_factorize_two_identity(tmp_path):
    cert_path = tmp_path / "cert.json"
    code, rep, _ = run("factorize", FIXTURES / "two-identity-depth-3.json", "--delta", 1, "--eta", 0.5,
                       "--out-depth", 3, "--certificate", cert_path)
    assert code == 0
    assert rep["outputs"]["residual"] == 0
    assert rep["outputs"]["norm_product_bound"] == pytest.approx(0.5)
    cert = json.loads(cert_path.read_text())
    assert len(cert["selection_log"]) == 15


def test_factorize_diagonal_and_near_diagonal():
    code, rep, _ = run("factorize", FIXTURES / "diagonal-depth-4.json", "--delta", 0.5, "--eta", 0.5, "--out-depth", 2)
    assert code == 0 and rep["outputs"]["residual"] <= 1e-10
    code, rep, _ = run("factorize", FIXTURES / "near-diagonal-seed-7-depth-5.json", "--delta", 0.5, "--eta", 0.5,
                       "--out-depth", 2)
    assert code == 0 and rep["outputs"]["residual"] <= 0.05


def test_factorize_precondition_exit_3():
    code, rep, err = run("factorize", FIXTURES / "small-diagonal-depth-2.json", "--delta", 0.5, "--eta", 0.5,
                         "--out-depth", 1)
    assert code == 3 and rep is None
    assert "'00'" in err


def test_factorize_residual_above_tolerance_exit_4():
    code, _, _ = run("factorize", FIXTURES / "near-diagonal-seed-7-depth-5.json", "--delta", 0.5, "--eta", 0.5,
                     "--out-depth", 2, "--tolerance", -1)
    assert code == 4


def test_game_command_and_replay(tmp_path):
    out = tmp_path / "game.json"
    code, rep, _ = run("--output", out, "game", "--seed", 3, "--host-depth", 8)
    assert code == 0 and rep["outputs"]["all_turns_ok"]
    transcript = tmp_path / "transcript.json"
    transcript.write_text(json.dumps(rep["outputs"]["transcript"]))
    code, again, _ = run("game", "--seed", 3, "--host-depth", 8, "--adversary", "replay", "--replay", transcript)
    assert code == 0
    assert again["outputs"]["transcript"]["turns"] == rep["outputs"]["transcript"]["turns"]
    assert json.loads(out.read_text()) == rep


def test_ramsey_command():
    code, rep, _ = run("ramsey", "--depth", 8, "--seed", 3)
    assert code == 0 and rep["outputs"]["verified"]
    assert rep["outputs"]["achieved_depth"] >= 2
    assert run("ramsey", "--seed", 3)[0] == 2


def test_seed_is_mandatory():
    assert run("verify", "--suite", "norms")[0] == 2  # argparse usage error
    assert run("game")[0] == 2


def test_reports_are_deterministic():
    args = ("ramsey", "--depth", 7, "--seed", 11)
    _, a, _ = run(*args)
    _, b, _ = run(*args)
    a.pop("timings"), b.pop("timings")
    assert a == b


def test_verify_game_suite():
    code, rep, err = run("verify", "--suite", "game", "--seed", 3)
    assert code == 0 and rep["outputs"]["passed"]
    games = next(c for c in rep["outputs"]["checks"] if c["criterion"] == 7)
    assert games["detail"]["games"] == 20
    assert "PASS" in err


def test_enum_cap_env_var():
    import os

    env = dict(os.environ, STOPTIME_ENUM_CAP="1")
    proc = subprocess.run(
        [sys.executable, "-m", "stoptime", "norm", str(FIXTURES / "ones-depth-2.json"), "--space", "S",
         "--base", "lp:1"],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0  # l^p bases use the DP, so the cap does not bite
