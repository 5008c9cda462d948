"""Command line harness: JSON reports, reproducibility, exit codes."""

import json
import subprocess
import sys

import gamecompiler
from gamecompiler.cli import main


def run_cli(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


class TestReports:
    def test_value_reports_exact_numbers(self, capsys):
        code, doc = run_cli(capsys, ["value", "--game", "chsh"])
        assert code == 0
        assert doc["results"]["classical_value"] == "3/4"
        assert abs(doc["results"]["quantum_value"] - 0.8535533905932737) < 1e-9
        assert doc["version"] == gamecompiler.__version__
        assert doc["config"]["command"] == "value"
        assert "wall_clock_s" in doc

    def test_ghz3_value(self, capsys):
        code, doc = run_cli(capsys, ["value", "--game", "ghz3"])
        assert code == 0
        assert doc["results"]["classical_value"] == "3/4"
        assert abs(doc["results"]["quantum_value"] - 1.0) < 1e-9

    def test_run_is_bit_reproducible(self, capsys):
        argv = ["run", "--game", "chsh", "--prover", "honest", "--trials", "120", "--seed", "5"]
        _, doc1 = run_cli(capsys, argv)
        _, doc2 = run_cli(capsys, argv)
        assert doc1["results"] == doc2["results"]

    def test_out_writes_the_report(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        code, doc = run_cli(
            capsys, ["value", "--game", "chsh", "--out", str(target)]
        )
        assert code == 0
        on_disk = json.loads(target.read_text())
        assert on_disk["results"] == doc["results"]

    def test_extract_report(self, capsys):
        code, doc = run_cli(
            capsys, ["extract", "--game", "chsh", "--prover", "best-local", "--seed", "2"]
        )
        assert code == 0
        assert doc["results"]["extracted_value"] == "3/4"
        assert doc["results"]["estimator_samples"] == 32400

    def test_distinguish_report(self, capsys):
        code, doc = run_cli(
            capsys,
            [
                "distinguish", "--prover", "decrypting", "--mode", "leaky",
                "--trials", "300", "--seed", "3",
            ],
        )
        assert code == 0
        assert doc["results"]["advantage"] > 0
        assert doc["results"]["trials"] == 300

    def test_repeat_report(self, capsys):
        code, doc = run_cli(
            capsys,
            ["repeat", "--t", "10", "--theta", "0.8", "--trials", "12", "--seed", "4"],
        )
        assert code == 0
        assert doc["results"]["scheme"] == "sequential"
        assert "chernoff_lower_bound" in doc["results"]
        assert 0 <= doc["results"]["accept_rate"] <= 1

    def test_parallel_repeat_report(self, capsys):
        code, doc = run_cli(
            capsys,
            [
                "repeat", "--t", "4", "--theta", "0.5", "--trials", "6",
                "--parallel", "--seed", "5",
            ],
        )
        assert code == 0
        assert doc["results"]["scheme"] == "parallel"

    def test_fs_report(self, capsys):
        code, doc = run_cli(capsys, ["fs", "--trials", "250", "--seed", "6"])
        assert code == 0
        assert 0.6 <= doc["results"]["accept_rate"] <= 1.0

    def test_selftest_report(self, capsys):
        code, doc = run_cli(
            capsys, ["qhe-selftest", "--circuits", "20", "--claws", "50", "--seed", "7"]
        )
        assert code == 0
        assert doc["results"]["passed"] is True


class TestExitCodes:
    def test_decrypting_needs_leaky_mode(self, capsys):
        code = main(["run", "--prover", "decrypting", "--mode", "ideal", "--trials", "5"])
        assert code == 1
        assert "leaky" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert main(["value", "--nosuch"]) == 1

    def test_unknown_game(self, capsys):
        assert main(["value", "--game", "tictactoe"]) == 1

    def test_bad_theta(self, capsys):
        assert main(["repeat", "--t", "4", "--theta", "0", "--trials", "2"]) == 1


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "gamecompiler.cli", "value", "--game", "magic-square"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["results"]["classical_value"] == "8/9"
