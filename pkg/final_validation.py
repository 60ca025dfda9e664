#!/usr/bin/env python3
"""
Acceptance checklist: runs every end-to-end check at desk scale and prints a summary.
"""

import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from app import crdt
from app.baselines import LastWriterWinsSet, ObservedRemoveSet, TwoPhaseSet
from app.config import FaultPolicy
from app.laws import (
    StateSpace,
    check_lub,
    check_merge_algebra,
    check_monotonicity,
    check_partial_order,
    check_phase_equivalence,
    check_two_phase_agreement,
    run_self_tests,
)
from app.memory import sweep
from app.netsim import CrashWindow, run_fuzz, run_scenario
from app.scenario import load_scenario

SCENARIO_DIR = project_root / "scenarios"


def _mark(ok: bool, label: str) -> bool:
    print(f"  {'✓' if ok else '✗'} {label}")
    return ok


def check_lattice_laws() -> bool:
    print("📋 Lattice laws over 2 elements, counters up to 3")
    space = StateSpace.of(2, 3)
    ok = True
    for report in (check_partial_order(space), check_lub(space), check_monotonicity(space)):
        ok &= _mark(report.passed, f"{report.law_name}: {report.cases_checked} cases")
    for mutation, detected in run_self_tests(space).items():
        ok &= _mark(detected, f"mutation {mutation} detected")
    return ok


def check_merge_algebra_all() -> bool:
    print("📋 Merge algebra, 1000 seeded samples per structure")
    ok = True
    for impl in (crdt.InfinitePSet(), TwoPhaseSet(), ObservedRemoveSet(), LastWriterWinsSet()):
        report = check_merge_algebra(impl, samples=1000)
        ok &= _mark(report.passed, impl.name)
    return ok


def check_golden_scenarios() -> bool:
    print("📋 Golden scenarios with longest-sequence oracle")
    ok = True
    for path in sorted(SCENARIO_DIR.glob("*.txt")):
        report = run_scenario(load_scenario(path))
        ok &= _mark(report.passed, f"{path.stem}: {len(report.assertions)} assertions, oracle on {len(report.oracle)} elements")
    return ok


def check_convergence() -> bool:
    print("📋 Strong eventual consistency: 20 faulty runs, then 20 with a crash")
    faults = FaultPolicy(p_drop=0.3, duplicate_probability=0.2, max_reorder_delay=10)
    plain = [run_fuzz(5, 200, 10, faults, seed) for seed in range(20)]
    crashed = [run_fuzz(5, 200, 10, faults, seed, crash_windows=[CrashWindow(1 + seed % 5, 20, 120)]) for seed in range(20)]
    ok = _mark(all(r.passed for r in plain), "converged byte-identical with oracle agreement")
    return _mark(all(r.passed and r.crashes == 1 for r in crashed), "converged after crash and recovery") and ok


def check_equivalences() -> bool:
    print("📋 Phase-set and 2P-Set equivalence on 500 seeded histories")
    phase = check_phase_equivalence(2)
    two_phase = check_two_phase_agreement()
    ok = _mark(phase.passed, f"phase sets depth 2 ({phase.skipped} saturated histories skipped)")
    return _mark(two_phase.passed, "2P-Set on single-phase histories") and ok


def check_memory() -> bool:
    print("📋 Metadata size for k, n in 1, 2, 4, 8")
    report = sweep(1)
    ok = _mark(report.infinite_flat, "∞P-Set stays at 2 tokens per element")
    return _mark(report.orset_min_slope >= 4, f"OR-Set grows {report.orset_min_slope:.1f} tokens per concurrent add") and ok


def main():
    print("∞P-Set - Final Validation")
    print("=" * 70)

    checks = [
        check_lattice_laws,
        check_merge_algebra_all,
        check_golden_scenarios,
        check_convergence,
        check_equivalences,
        check_memory,
    ]

    passed = 0
    for check in checks:
        if check():
            passed += 1

    print("\n" + "=" * 70)
    print(f"Acceptance checks: {passed}/{len(checks)} passed")
    if passed == len(checks):
        print("🎉 All acceptance checks hold")
        return 0
    print("⚠️  Some acceptance checks failed.")
    return 1


if __name__ == "__main__":
    sys.exit(main())
