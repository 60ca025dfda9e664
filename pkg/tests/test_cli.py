import json
from pathlib import Path

import pytest

from app.main import main

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
FIXTURES = ROOT / "tests" / "fixtures"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- run ----------------------------------------------------------------------

def test_run_golden_scenario(capsys):
    code, out, _ = run_cli(capsys, "run", "--scenario", str(SCENARIOS / "case3b.txt"), "--seed", "7")
    assert code == 0
    assert out.startswith("scenario case3b (seed 7")
    assert "PASSED" in out


def test_run_resolves_bare_scenario_names(capsys):
    code, _, _ = run_cli(capsys, "run", "--scenario", "case1")
    assert code == 0


def test_run_missing_file(capsys):
    code, out, err = run_cli(capsys, "run", "--scenario", str(FIXTURES / "does_not_exist.txt"))
    assert code == 2
    assert out == ""
    assert "not found" in err


def test_run_wrong_assertion_names_it(capsys):
    code, _, err = run_cli(capsys, "run", "--scenario", str(FIXTURES / "wrong_assertion.txt"))
    assert code == 1
    assert "line 7: assert r1 contains e" in err


def test_run_malformed_scenario(capsys):
    code, _, err = run_cli(capsys, "run", "--scenario", str(FIXTURES / "malformed.txt"))
    assert code == 2
    assert "line 3" in err


def test_run_json_report(capsys):
    code, out, _ = run_cli(capsys, "run", "--scenario", str(SCENARIOS / "case1.txt"), "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert report["passed"] is True
    assert report["finalStates"] == {"r1": "e\t2\n", "r2": "e\t2\n"}
    assert report["oracle"][0]["chainLength"] == 2


# --- laws -----------------------------------------------------------------------

def test_laws_default_window_passes(capsys):
    code, out, _ = run_cli(capsys, "laws", "--elements", "2", "--max-counter", "3")
    assert code == 0
    for suite in ("partial-order", "lub", "monotonicity", "phase-equivalence[depth=2]"):
        assert f"PASS  {suite}" in out


def test_laws_largest_window_is_accepted(capsys):
    code, out, _ = run_cli(capsys, "laws", "--elements", "3", "--max-counter", "4", "--suites", "partial-order,lub,monotonicity")
    assert code == 0
    assert "PASS  lub" in out


def test_laws_refuses_oversized_space(capsys):
    code, out, err = run_cli(capsys, "laws", "--elements", "4", "--max-counter", "6")
    assert code == 2
    assert out == ""
    assert "2401 states" in err


def test_laws_json_with_self_test(capsys):
    code, out, _ = run_cli(capsys, "laws", "--suites", "partial-order,lub", "--self-test", "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert [r["lawName"] for r in report["reports"]] == ["partial-order", "lub"]
    assert report["reports"][0]["casesChecked"] > 0
    assert all(report["selfTest"].values())


@pytest.mark.parametrize("argv", [["--suites", "bogus"], ["--phase-depth", "4"]])
def test_laws_invalid_parameters(capsys, argv):
    code, _, _ = run_cli(capsys, "laws", *argv)
    assert code == 2


# --- fuzz -----------------------------------------------------------------------

def test_fuzz_converges(capsys):
    code, out, _ = run_cli(capsys, "fuzz", "--replicas", "5", "--ops", "200", "--seed", "42")
    assert code == 0
    assert "seed 42: converged" in out


def test_fuzz_is_byte_identical_across_runs(capsys):
    first = run_cli(capsys, "fuzz", "--seed", "42", "--format", "json")
    second = run_cli(capsys, "fuzz", "--seed", "42", "--format", "json")
    assert first[1] == second[1]
    assert json.loads(first[1])["runs"][0]["digest"]


def test_fuzz_needs_two_replicas(capsys):
    code, _, err = run_cli(capsys, "fuzz", "--replicas", "1")
    assert code == 2
    assert "2 replicas" in err


def test_fuzz_rejects_certain_drop(capsys):
    code, _, _ = run_cli(capsys, "fuzz", "--p-drop", "1.0")
    assert code == 2


def test_fuzz_dumped_script_replays(capsys, tmp_path):
    target = tmp_path / "fuzz.txt"
    code, _, _ = run_cli(capsys, "fuzz", "--ops", "30", "--seed", "3", "--dump-script", str(target))
    assert code == 0
    code, out, _ = run_cli(capsys, "run", "--scenario", str(target))
    assert code == 0
    assert "longest-sequence oracle" in out


def test_fuzz_several_runs(capsys):
    code, out, _ = run_cli(capsys, "fuzz", "--seed", "1729", "--runs", "3", "--ops", "40", "--crash-probability", "0.05", "--format", "json")
    assert code == 0
    assert [r["seed"] for r in json.loads(out)["runs"]] == [1729, 1730, 1731]


# --- memory ---------------------------------------------------------------------

def test_memory_workload(capsys):
    code, out, _ = run_cli(capsys, "memory", "--workload", "1x1x8", "--format", "json")
    assert code == 0
    rows = {row["structure"]: row["tokens"] for row in json.loads(out)["rows"]}
    assert rows["infinite-p-set"] == 2
    assert rows["or-set"] >= 32


def test_memory_sweep(capsys):
    code, out, _ = run_cli(capsys, "memory", "--sweep")
    assert code == 0
    assert "PASSED" in out


@pytest.mark.parametrize("workload", ["1x2", "axbxc", "1x0x1"])
def test_memory_invalid_workload(capsys, workload):
    code, _, _ = run_cli(capsys, "memory", "--workload", workload)
    assert code == 2


def test_random_seed_is_reported(capsys):
    code, out, _ = run_cli(capsys, "fuzz", "--random-seed", "--ops", "5", "--format", "json")
    assert code == 0
    assert isinstance(json.loads(out)["runs"][0]["seed"], int)


def test_unknown_subcommand(capsys):
    assert run_cli(capsys, "serve")[0] == 2
