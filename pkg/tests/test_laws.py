import pytest

from app import crdt
from app.baselines import LastWriterWinsSet, ObservedRemoveSet, TwoPhaseSet
from app.crdt import CounterMap, InfinitePSet
from app.laws import (
    MUTATIONS,
    PhaseSaturatedError,
    PhaseSetState,
    StateSpace,
    StateSpaceTooLargeError,
    bumped_merge,
    check_lub,
    check_merge_algebra,
    check_monotonicity,
    check_partial_order,
    check_phase_equivalence,
    check_two_phase_agreement,
    dropping_remove,
    eager_add,
    flipped_compare,
    is_single_phase,
    run_self_tests,
    run_suite,
    sample_histories,
    single_phase_histories,
)


def test_state_space_enumerates_absent_plus_counters():
    space = StateSpace(("a",), 2)
    assert space.size == 3
    assert list(space.enumerate()) == [CounterMap(), CounterMap({"a": 1}), CounterMap({"a": 2})]
    assert StateSpace.of(2, 3).size == 16
    assert len(set(StateSpace.of(2, 3).enumerate())) == 16


@pytest.mark.parametrize("elements, max_counter", [(4, 1), (2, 5), (4, 6)])
def test_oversized_spaces_are_refused(elements, max_counter):
    with pytest.raises(StateSpaceTooLargeError) as info:
        StateSpace.of(elements, max_counter).require_enumerable()
    assert str(info.value).startswith(f"state space has {(max_counter + 1) ** elements} states")


def test_state_limit_applies_inside_the_bounds():
    space = StateSpace.of(3, 4)
    space.require_enumerable()
    with pytest.raises(StateSpaceTooLargeError, match="125 states, limit is 64"):
        space.require_enumerable(limit=64)


@pytest.mark.parametrize("elements, max_counter", [(1, 2), (1, 3), (2, 3), (3, 3), (3, 4)])
def test_order_laws_hold(elements, max_counter):
    space = StateSpace.of(elements, max_counter)
    for report in (check_partial_order(space), check_lub(space), check_monotonicity(space)):
        assert report.passed, report.counterexamples[:3]
        assert report.cases_checked > 0


def test_partial_order_case_count_for_one_element():
    # chain of 3 states: 3 reflexive, 3 unordered pairs, 10 triples whose premises hold
    report = check_partial_order(StateSpace(("a",), 2))
    assert report.cases_checked == 3 + 3 + 10


def test_monotonicity_classifies_every_case():
    report = check_monotonicity(StateSpace.of(2, 3))
    assert report.cases_checked == 16 * 2 * 2
    assert "add absent -> growth: 8" in report.notes
    assert "remove absent -> no-op: 8" in report.notes
    assert not any(note.startswith("add odd -> growth") for note in report.notes)


def test_flipped_compare_breaks_antisymmetry():
    report = check_partial_order(StateSpace.of(2, 3), compare=flipped_compare("a"))
    assert not report.passed
    assert any(c.clause.startswith("antisymmetry") for c in report.counterexamples)
    assert any(c.states == ["", "a\t1\n"] for c in report.counterexamples)


def test_bumped_merge_breaks_minimality():
    report = check_lub(StateSpace.of(1, 3), merge=bumped_merge)
    assert not report.passed
    clauses = {c.clause.split(":")[0] for c in report.counterexamples}
    assert "minimality" in clauses
    assert "idempotence" in clauses


def test_dropping_remove_is_not_monotone():
    report = check_monotonicity(StateSpace.of(1, 3), remove=dropping_remove)
    assert not report.passed


def test_eager_add_breaks_phase_equivalence():
    report = check_phase_equivalence(2, [[("add", "a"), ("add", "a")]], add=eager_add)
    assert not report.passed


def test_every_mutation_is_detected():
    detected = run_self_tests(StateSpace.of(2, 3))
    assert set(detected) == set(MUTATIONS)
    assert all(detected.values())


# --- phase sets ----------------------------------------------------------------

def test_phase_set_nesting():
    state = PhaseSetState.empty(2).add("a").remove("a").add("a")
    assert state.query() == {"a"}
    assert state.phases("a") == (2, 1)
    with pytest.raises(ValueError):
        PhaseSetState(((frozenset(), frozenset({"a"})),))


def test_phase_set_saturates_at_depth():
    state = PhaseSetState.empty(1).add("a").remove("a")
    assert state.query() == frozenset()
    with pytest.raises(PhaseSaturatedError):
        state.add("a")


@pytest.mark.parametrize(
    "history, members, counter",
    [
        ([("add", "a")], {"a"}, 1),
        ([("add", "a"), ("remove", "a"), ("add", "a")], {"a"}, 3),
        ([], set(), 0),
    ],
)
def test_phase_equivalence_examples(history, members, counter):
    report = check_phase_equivalence(2, [history])
    assert report.passed
    state = crdt.initialize()
    for kind, element in history:
        state = crdt.add(state, element) if kind == "add" else crdt.remove(state, element)
    assert crdt.query(state) == frozenset(members)
    assert state.get("a", 0) == counter


def test_phase_equivalence_on_sampled_histories():
    report = check_phase_equivalence(2)
    assert report.passed
    assert report.skipped < 500
    assert report.cases_checked > 1000


def test_saturated_histories_are_skipped_not_failed():
    history = [("add", "a"), ("remove", "a"), ("add", "a"), ("remove", "a"), ("add", "a")]
    report = check_phase_equivalence(2, [history])
    assert report.passed
    assert report.skipped == 1
    assert report.notes


def test_phase_depth_is_bounded():
    with pytest.raises(ValueError):
        check_phase_equivalence(4, [])


# --- histories and baselines ------------------------------------------------------

def test_history_generators_are_seeded():
    assert sample_histories(7, 20) == sample_histories(7, 20)
    assert sample_histories(7, 20) != sample_histories(8, 20)
    assert all(len(h) <= 12 for h in sample_histories(1, 100))
    assert all(is_single_phase(h) for h in single_phase_histories(3, 50))


def test_is_single_phase():
    assert is_single_phase([("add", "a"), ("remove", "a"), ("add", "b")])
    assert not is_single_phase([("add", "a"), ("remove", "a"), ("add", "a")])


def test_two_phase_agreement():
    report = check_two_phase_agreement()
    assert report.passed
    assert report.skipped == 0


def test_two_phase_agreement_skips_readds():
    report = check_two_phase_agreement([[("add", "a"), ("remove", "a"), ("add", "a")]])
    assert report.skipped == 1
    assert report.cases_checked == 0


@pytest.mark.parametrize("impl", [InfinitePSet(), TwoPhaseSet(), ObservedRemoveSet(), LastWriterWinsSet()], ids=lambda i: i.name)
def test_merge_algebra(impl):
    report = check_merge_algebra(impl, samples=1000, seed=11)
    assert report.passed, report.counterexamples[:3]
    assert report.cases_checked == 1000


def test_suites_are_deterministic():
    space = StateSpace.of(2, 2)
    first = [r.to_json() for r in run_suite("phase-equivalence", space, seed=5, histories=50)]
    second = [r.to_json() for r in run_suite("phase-equivalence", space, seed=5, histories=50)]
    assert first == second


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("nope", StateSpace.of(1, 1))
