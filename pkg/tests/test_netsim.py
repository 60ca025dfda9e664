from pathlib import Path

import pytest

from app import crdt
from app.config import FaultPolicy
from app.crdt import CounterMap
from app.netsim import (
    Channel,
    CrashWindow,
    LogEntry,
    Message,
    Simulation,
    generate_fuzz_script,
    longest_sequence_length,
    longest_sequence_oracle,
    run_fuzz,
    run_scenario,
    simulate,
)
from app.scenario import CrashEvent, OpEvent, RecoverEvent, load_scenario, parse_scenario

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
GOLDEN = sorted(SCENARIOS.glob("*.txt"))
ACCEPTANCE_FAULTS = FaultPolicy(p_drop=0.3, duplicate_probability=0.2, max_reorder_delay=10)


@pytest.mark.parametrize("path", GOLDEN, ids=lambda p: p.stem)
def test_golden_scenarios_pass_with_oracle_agreement(path):
    report = run_scenario(load_scenario(path), seed=7)
    assert report.passed, report.failed_assertions()
    assert report.oracle
    assert all(check.agrees for check in report.oracle)
    assert len(set(report.final_states.values())) == 1


def test_case1_final_state():
    report = run_scenario(load_scenario(SCENARIOS / "case1.txt"))
    assert report.final_states == {"r1": "e\t2\n", "r2": "e\t2\n"}
    assert report.oracle[0].chain_length == 2


def test_anomaly2_add_keeps_longest_sequence():
    report = run_scenario(load_scenario(SCENARIOS / "anomaly2_add.txt"))
    assert report.final_states["r1"] == "e\t3\n"


def test_identical_sequences_converge_with_or_without_sync():
    without = run_scenario(load_scenario(SCENARIOS / "anomaly3_identical_no_sync.txt"))
    with_sync = run_scenario(load_scenario(SCENARIOS / "anomaly3_identical_with_sync.txt"))
    assert without.final_states == with_sync.final_states


def test_crashed_replica_keeps_its_ops_and_gets_held_messages():
    report = run_scenario(load_scenario(SCENARIOS / "crash_recovery.txt"))
    assert report.passed
    assert report.channel.held == 1
    assert report.final_states["r2"] == "e\t2\nf\t1\ng\t1\n"


def test_failed_assertion_is_recorded_and_run_continues():
    script = load_scenario(ROOT / "tests" / "fixtures" / "wrong_assertion.txt")
    report = run_scenario(script)
    assert not report.passed
    [failed] = report.failed_assertions()
    assert failed.line == 7
    assert failed.text == "assert r1 contains e"


def test_scenario_reports_are_deterministic():
    script = load_scenario(SCENARIOS / "anomaly1.txt")
    faults = FaultPolicy(duplicate_probability=0.5, max_reorder_delay=3)
    assert run_scenario(script, 3, faults).to_json() == run_scenario(script, 3, faults).to_json()


def test_duplication_and_reordering_do_not_change_the_outcome():
    # every op precedes every send, so delivery order cannot change causality
    script = parse_scenario(
        "replicas r1 r2 r3\n"
        "op r1 add a\nop r1 remove a\nop r2 add a\nop r3 add b\nop r3 remove b\nop r3 add b\n"
        "send r1 r2\nsend r2 r3\nsend r3 r1\nsend r1 r3\nsend r2 r1\n"
        "quiesce\n"
    )
    reliable = run_scenario(script, seed=1)
    for seed in range(5):
        noisy = run_scenario(script, seed, FaultPolicy(duplicate_probability=0.5, max_reorder_delay=10))
        assert noisy.final_states == reliable.final_states
        assert noisy.passed


def test_delivery_happens_at_the_start_of_the_next_tick():
    sim = Simulation(["r1", "r2"])
    sim.execute(OpEvent("r1", "add", "e"))
    sim.send("r1", "r2")
    assert sim.replicas["r2"].state == {}
    sim.advance()
    assert sim.replicas["r2"].state == CounterMap({"e": 1})
    assert sim.replicas["r1"].applied_ops == [("add", "e")]


def test_channel_drop_and_duplicate_accounting():
    import random

    always_drop = Channel(FaultPolicy(p_drop=0.999999), random.Random(0))
    always_drop.send(Message(1, "r1", "r2", b""), tick=0)
    assert always_drop.stats.dropped == 1
    assert always_drop.due(100) == []

    always_dup = Channel(FaultPolicy(duplicate_probability=1.0), random.Random(0))
    always_dup.send(Message(1, "r1", "r2", b""), tick=0)
    assert always_dup.stats.duplicated == 1
    assert len(always_dup.due(1)) == 2


def test_quiesce_recovers_and_drains():
    sim = Simulation(["r1", "r2", "r3"], faults=FaultPolicy(max_reorder_delay=50))
    sim.apply_op("r1", "add", "x")
    sim.send("r1", "r2")
    sim.crash("r3")
    sim.quiesce()
    assert all(not r.crashed for r in sim.replicas.values())
    assert sim.channel.in_flight == 0
    assert len({crdt.serialize(s) for s in sim.states().values()}) == 1
    assert sim.snapshot["r2"] == {}


def test_ops_on_crashed_replica_are_rejected():
    sim = Simulation(["r1", "r2"])
    sim.crash("r1")
    with pytest.raises(ValueError):
        sim.apply_op("r1", "add", "e")


# --- longest-sequence oracle ------------------------------------------------------

def _log(*entries):
    return [LogEntry(*e) for e in entries]


def test_oracle_single_add():
    log = _log(("op", "r1", None, "add", "e"))
    assert longest_sequence_oracle(log, "e")
    assert not longest_sequence_oracle(log, "f")


def test_oracle_chain_across_a_delivery():
    log = _log(
        ("op", "r1", None, "add", "e"),
        ("send", "r1", 1),
        ("deliver", "r2", 1),
        ("op", "r2", None, "remove", "e"),
    )
    assert longest_sequence_length(log, "e") == 2
    assert not longest_sequence_oracle(log, "e")


def test_oracle_concurrent_branches_longest_wins():
    # shared {e:1}; one branch removes, the other does nothing
    log = _log(
        ("op", "r1", None, "add", "e"),
        ("send", "r1", 1),
        ("deliver", "r2", 1),
        ("op", "r1", None, "remove", "e"),
    )
    assert longest_sequence_length(log, "e") == 2


def test_oracle_ignores_remove_without_causal_add():
    log = _log(("op", "r1", None, "add", "e"), ("op", "r2", None, "remove", "e"))
    assert longest_sequence_length(log, "e") == 1
    assert longest_sequence_oracle(log, "e")


def test_oracle_matches_converged_counter_in_simulation():
    sim = simulate(load_scenario(SCENARIOS / "case2.txt"))
    counter = crdt.merge_all(sim.states().values())["e"]
    assert longest_sequence_length(sim.log, "e") == counter == 3


# --- fuzzing ------------------------------------------------------------------

def test_fuzz_without_ops_converges_to_empty():
    report = run_fuzz(replicas=2, ops=0, universe=3, seed=1)
    assert report.passed
    assert report.converged_state == ""


def test_fuzz_acceptance_runs_converge():
    digests = set()
    for seed in range(42, 62):
        report = run_fuzz(replicas=5, ops=200, universe=10, faults=ACCEPTANCE_FAULTS, seed=seed)
        assert report.converged, report.replica_dump
        assert report.oracle_agrees
        digests.add(report.digest)
    assert len(digests) > 1


def test_fuzz_with_crashes_converges():
    for seed in range(20):
        report = run_fuzz(5, 200, 10, ACCEPTANCE_FAULTS, seed, crash_probability=0.02)
        assert report.passed


@pytest.mark.parametrize("seed", range(20))
def test_fuzz_with_one_crash_and_recovery_per_run(seed):
    window = CrashWindow(1 + seed % 5, 20, 120)
    report = run_fuzz(5, 200, 10, ACCEPTANCE_FAULTS, seed, crash_windows=[window])
    assert report.crashes == 1
    assert report.passed


def test_fuzz_with_long_crash_window():
    report = run_fuzz(3, 50, 10, FaultPolicy(p_drop=0.3), seed=5, crash_windows=[CrashWindow(1, 0, 39)])
    assert report.passed
    assert report.crashes == 1


def test_fuzz_is_deterministic():
    first = run_fuzz(5, 200, 10, ACCEPTANCE_FAULTS, seed=42)
    second = run_fuzz(5, 200, 10, ACCEPTANCE_FAULTS, seed=42)
    assert first.to_json() == second.to_json()


def test_fuzz_script_respects_crashes():
    script = generate_fuzz_script(3, 50, 4, seed=9, crash_windows=[CrashWindow(2, 10, 20)])
    down = set()
    for event in script.events:
        if isinstance(event, CrashEvent):
            down.add(event.replica)
        elif isinstance(event, RecoverEvent):
            down.discard(event.replica)
        elif isinstance(event, OpEvent):
            assert event.replica not in down
    assert not down
    assert parse_scenario(script.to_text()).events == tuple(
        type(e)(**{**e.__dict__, "line": i}) for i, e in enumerate(script.events, start=2)
    )


def test_fuzz_needs_two_replicas():
    with pytest.raises(ValueError):
        generate_fuzz_script(1, 10, 3)
