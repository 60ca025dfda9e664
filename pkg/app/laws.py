"""
Executable lattice laws for the ∞P-Set.

The suites enumerate every state of a small window (elements x counter bound)
and check the partial order, least upper bound and monotonicity properties by
brute force. They only cover the finite window, not the unbounded state space.
Each suite takes its operations as arguments so that the mutations in
MUTATIONS can be injected to prove the suite is not vacuous.
"""

from __future__ import annotations

import itertools
import logging
import random
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from . import crdt
from .baselines import LastWriterWinsSet, ObservedRemoveSet, TwoPhaseSet, twop_add, twop_query, twop_remove
from .config import DEFAULT_SEED, LAWS_MAX_STATES, MAX_LAW_COUNTER, MAX_LAW_ELEMENTS, MAX_PHASE_DEPTH
from .crdt import CounterMap, StateCrdt
from .reports import Counterexample, LawReport

logger = logging.getLogger("infpset.laws")

Op = Tuple[str, str]  # ("add" | "remove", element)
History = List[Op]

ELEMENT_NAMES = ("a", "b", "c", "d", "e", "f")


class StateSpaceTooLargeError(ValueError):
    def __init__(self, size: int, limit: int, reason: str = "") -> None:
        detail = f" ({reason})" if reason else ""
        super().__init__(
            f"state space has {size} states, limit is {limit}{detail}; "
            f"the LUB check would need about {size ** 3:,} comparisons"
        )
        self.size = size
        self.limit = limit


class PhaseSaturatedError(ValueError):
    pass


def _dump(state: CounterMap) -> str:
    return crdt.serialize(state).decode("utf-8")


@dataclass(frozen=True)
class StateSpace:
    elements: Tuple[str, ...]
    max_counter: int

    def __post_init__(self) -> None:
        for element in self.elements:
            crdt.validate_element(element)
        if len(set(self.elements)) != len(self.elements):
            raise ValueError("state space elements must be distinct")
        if self.max_counter < 1:
            raise ValueError("max_counter must be >= 1")

    @classmethod
    def of(cls, n_elements: int, max_counter: int) -> StateSpace:
        names = ELEMENT_NAMES[:n_elements] if n_elements <= len(ELEMENT_NAMES) else tuple(f"e{i}" for i in range(n_elements))
        return cls(tuple(names), max_counter)

    @property
    def size(self) -> int:
        # each element is absent or holds one of max_counter values
        return (self.max_counter + 1) ** len(self.elements)

    def require_enumerable(self, limit: int = LAWS_MAX_STATES) -> None:
        if len(self.elements) > MAX_LAW_ELEMENTS:
            raise StateSpaceTooLargeError(self.size, limit, f"at most {MAX_LAW_ELEMENTS} elements")
        if self.max_counter > MAX_LAW_COUNTER:
            raise StateSpaceTooLargeError(self.size, limit, f"max counter at most {MAX_LAW_COUNTER}")
        if self.size > limit:
            raise StateSpaceTooLargeError(self.size, limit)

    def enumerate(self) -> Iterator[CounterMap]:
        choices: List[Optional[int]] = [None, *range(1, self.max_counter + 1)]
        for combo in itertools.product(choices, repeat=len(self.elements)):
            yield CounterMap({e: c for e, c in zip(self.elements, combo) if c is not None})


def _order_matrix(states: Sequence[CounterMap], compare: Callable) -> List[List[bool]]:
    return [[compare(a, b) for b in states] for a in states]


def check_partial_order(space: StateSpace, compare: Callable[[CounterMap, CounterMap], bool] = crdt.compare) -> LawReport:
    space.require_enumerable()
    states = list(space.enumerate())
    n = len(states)
    le = _order_matrix(states, compare)
    report = LawReport(law_name="partial-order")
    cases = 0

    for i in range(n):
        cases += 1
        if not le[i][i]:
            report.counterexamples.append(Counterexample(states=[_dump(states[i])], clause="reflexivity: compare(D, D) is false"))

    for i in range(n):
        for j in range(i + 1, n):
            cases += 1
            if le[i][j] and le[j][i] and states[i] != states[j]:
                report.counterexamples.append(
                    Counterexample(
                        states=[_dump(states[i]), _dump(states[j])],
                        clause="antisymmetry: D <= D2 and D2 <= D but D != D2",
                    )
                )

    for i in range(n):
        for j in range(n):
            if not le[i][j]:
                continue
            for k in range(n):
                if not le[j][k]:
                    continue
                cases += 1
                if not le[i][k]:
                    report.counterexamples.append(
                        Counterexample(
                            states=[_dump(states[i]), _dump(states[j]), _dump(states[k])],
                            clause="transitivity: D <= D2 and D2 <= D3 but not D <= D3",
                        )
                    )

    report.cases_checked = cases
    logger.info(f"partial-order: {n} states, {cases} cases, {len(report.counterexamples)} counterexamples")
    return report


def check_lub(
    space: StateSpace,
    merge: Callable[[CounterMap, CounterMap], CounterMap] = crdt.merge,
    compare: Callable[[CounterMap, CounterMap], bool] = crdt.compare,
) -> LawReport:
    space.require_enumerable()
    states = list(space.enumerate())
    n = len(states)
    le = _order_matrix(states, compare)
    strictly_below = [[l for l in range(n) if l != k and le[l][k]] for k in range(n)]
    report = LawReport(law_name="lub")
    cases = 0

    for i in range(n):
        for j in range(i, n):
            a, b = states[i], states[j]
            m = merge(a, b)
            cases += 1
            found: List[Counterexample] = []
            if not compare(a, m):
                found.append(Counterexample(states=[_dump(a), _dump(b), _dump(m)], clause="upper bound: not compare(D, merge(D, D2))"))
            if not compare(b, m):
                found.append(Counterexample(states=[_dump(a), _dump(b), _dump(m)], clause="upper bound: not compare(D2, merge(D, D2))"))
            if i == j and m != a:
                found.append(Counterexample(states=[_dump(a), _dump(m)], clause="idempotence: merge(D, D) != D"))

            upper = [k for k in range(n) if le[i][k] and le[j][k]]
            in_upper = set(upper)
            below_merge = [k for k in upper if states[k] != m and compare(states[k], m)]
            for k in below_merge:
                found.append(
                    Counterexample(
                        states=[_dump(a), _dump(b), _dump(m), _dump(states[k])],
                        clause="minimality: an upper bound of D and D2 lies strictly below merge(D, D2)",
                    )
                )

            minimal = [k for k in upper if not any(l in in_upper for l in strictly_below[k])]
            if len(minimal) != 1:
                found.append(
                    Counterexample(
                        states=[_dump(a), _dump(b)] + [_dump(states[k]) for k in minimal],
                        clause=f"uniqueness: {len(minimal)} minimal upper bounds found by search",
                    )
                )
            elif states[minimal[0]] != m and not below_merge:
                found.append(
                    Counterexample(
                        states=[_dump(a), _dump(b), _dump(m), _dump(states[minimal[0]])],
                        clause="merge(D, D2) differs from the least upper bound found by search",
                    )
                )
            report.counterexamples.extend(found)

    report.cases_checked = cases
    logger.info(f"lub: {n} states, {cases} pairs, {len(report.counterexamples)} counterexamples")
    return report


def _counter_case(counter: Optional[int]) -> str:
    if counter is None:
        return "absent"
    return "odd" if counter % 2 else "even"


def check_monotonicity(
    space: StateSpace,
    add: Callable[[CounterMap, str], CounterMap] = crdt.add,
    remove: Callable[[CounterMap, str], CounterMap] = crdt.remove,
    compare: Callable[[CounterMap, CounterMap], bool] = crdt.compare,
) -> LawReport:
    space.require_enumerable()
    report = LawReport(law_name="monotonicity")
    tally: Dict[str, int] = {}
    cases = 0
    # which (operation, counter case) pairs must change the state
    grows = {
        ("add", "absent"): True,
        ("add", "even"): True,
        ("add", "odd"): False,
        ("remove", "absent"): False,
        ("remove", "even"): False,
        ("remove", "odd"): True,
    }

    for state in space.enumerate():
        for element in space.elements:
            case = _counter_case(state.get(element))
            for op_name, op in (("add", add), ("remove", remove)):
                result = op(state, element)
                cases += 1
                if not compare(state, result):
                    report.counterexamples.append(
                        Counterexample(states=[_dump(state), _dump(result)], clause=f"{op_name}({element}) on {case} counter is not >= its input")
                    )
                    continue
                grew = result != state
                expected = grows[(op_name, case)]
                label = f"{op_name} {case} -> {'growth' if grew else 'no-op'}"
                tally[label] = tally.get(label, 0) + 1
                if grew != expected:
                    report.counterexamples.append(
                        Counterexample(
                            states=[_dump(state), _dump(result)],
                            clause=f"{op_name}({element}) on {case} counter: expected {'growth' if expected else 'no-op'}",
                        )
                    )
                elif grew and compare(result, state):
                    report.counterexamples.append(
                        Counterexample(states=[_dump(state), _dump(result)], clause=f"{op_name}({element}) changed the state without strict growth")
                    )

    report.cases_checked = cases
    report.notes = [f"{label}: {count}" for label, count in sorted(tally.items())]
    logger.info(f"monotonicity: {cases} cases, {len(report.counterexamples)} counterexamples")
    return report


@dataclass(frozen=True)
class PhaseSetState:
    """Truncated chain of add/remove set pairs (A1, R1, A2, R2, ...)."""

    pairs: Tuple[Tuple[FrozenSet[str], FrozenSet[str]], ...]

    def __post_init__(self) -> None:
        for i, (added, removed) in enumerate(self.pairs):
            if not removed <= added:
                raise ValueError(f"R{i + 1} must be a subset of A{i + 1}")
            if i + 1 < len(self.pairs) and not self.pairs[i + 1][0] <= removed:
                raise ValueError(f"A{i + 2} must be a subset of R{i + 1}")

    @classmethod
    def empty(cls, depth: int) -> PhaseSetState:
        return cls(tuple((frozenset(), frozenset()) for _ in range(depth)))

    @property
    def depth(self) -> int:
        return len(self.pairs)

    def phases(self, element: str) -> Tuple[int, int]:
        """(number of add-sets, number of remove-sets) containing element."""
        i = sum(1 for added, _ in self.pairs if element in added)
        j = sum(1 for _, removed in self.pairs if element in removed)
        return i, j

    def _with(self, index: int, component: int, element: str) -> PhaseSetState:
        pairs = [list(p) for p in self.pairs]
        pairs[index][component] = pairs[index][component] | {element}
        return PhaseSetState(tuple((p[0], p[1]) for p in pairs))

    def add(self, element: str) -> PhaseSetState:
        i, j = self.phases(element)
        if i != j:
            return self
        if i == self.depth:
            raise PhaseSaturatedError(f"{element!r} would need add-set A{i + 1} beyond depth {self.depth}")
        return self._with(i, 0, element)

    def remove(self, element: str) -> PhaseSetState:
        i, j = self.phases(element)
        if i != j + 1:
            return self
        return self._with(i - 1, 1, element)

    def query(self) -> frozenset[str]:
        members: set[str] = set()
        for added, removed in self.pairs:
            members |= added - removed
        return frozenset(members)

    def elements(self) -> frozenset[str]:
        return frozenset(itertools.chain.from_iterable(added for added, _ in self.pairs))


def sample_histories(
    seed: int = DEFAULT_SEED,
    count: int = 500,
    max_length: int = 12,
    elements: Sequence[str] = ("a", "b", "c"),
) -> List[History]:
    rng = random.Random(seed)
    histories: List[History] = []
    for _ in range(count):
        length = rng.randint(0, max_length)
        histories.append([(rng.choice(("add", "remove")), rng.choice(elements)) for _ in range(length)])
    return histories


def single_phase_histories(
    seed: int = DEFAULT_SEED,
    count: int = 500,
    max_per_kind: int = 3,
    elements: Sequence[str] = ("a", "b", "c"),
) -> List[History]:
    """Per element: some adds, then some removes, interleaved across elements."""
    rng = random.Random(seed)
    histories: List[History] = []
    for _ in range(count):
        queues = {
            e: ["add"] * rng.randint(0, max_per_kind) + ["remove"] * rng.randint(0, max_per_kind) for e in elements
        }
        slots = [e for e, ops in queues.items() for _ in ops]
        rng.shuffle(slots)
        positions = {e: 0 for e in elements}
        history: History = []
        for e in slots:
            history.append((queues[e][positions[e]], e))
            positions[e] += 1
        histories.append(history)
    return histories


def is_single_phase(history: Sequence[Op]) -> bool:
    removed: set[str] = set()
    for kind, element in history:
        if kind == "remove":
            removed.add(element)
        elif element in removed:
            return False
    return True


def check_phase_equivalence(
    depth: int = 2,
    histories: Optional[Sequence[History]] = None,
    seed: int = DEFAULT_SEED,
    elements: Sequence[str] = ("a", "b", "c"),
    add: Callable[[CounterMap, str], CounterMap] = crdt.add,
    remove: Callable[[CounterMap, str], CounterMap] = crdt.remove,
) -> LawReport:
    if not 1 <= depth <= MAX_PHASE_DEPTH:
        raise ValueError(f"phase depth must be between 1 and {MAX_PHASE_DEPTH}")
    if histories is None:
        histories = sample_histories(seed, elements=elements)
    report = LawReport(law_name=f"phase-equivalence[depth={depth}]")
    cases = 0

    for index, history in enumerate(histories):
        phase = PhaseSetState.empty(depth)
        state = crdt.initialize()
        try:
            for step, (kind, element) in enumerate(history, start=1):
                if kind == "add":
                    phase, state = phase.add(element), add(state, element)
                else:
                    phase, state = phase.remove(element), remove(state, element)
                cases += 1
                expected, actual = phase.query(), crdt.query(state)
                if expected != actual:
                    report.counterexamples.append(
                        Counterexample(
                            states=[_dump(state)],
                            clause=f"history #{index} step {step} ({kind} {element}): query {sorted(actual)} but phase sets give {sorted(expected)}",
                        )
                    )
                for e in phase.elements() | frozenset(state):
                    i, j = phase.phases(e)
                    if state.get(e, 0) != i + j:
                        report.counterexamples.append(
                            Counterexample(
                                states=[_dump(state)],
                                clause=f"history #{index} step {step}: counter of {e} is {state.get(e, 0)}, expected i+j={i}+{j}",
                            )
                        )
        except PhaseSaturatedError:
            report.skipped += 1

    report.cases_checked = cases
    if report.skipped:
        report.notes.append(f"{report.skipped} histories needed more than {depth} add/remove pairs for one element and were skipped")
    logger.info(f"phase-equivalence: {len(histories)} histories, {cases} steps, {report.skipped} skipped")
    return report


def check_two_phase_agreement(
    histories: Optional[Sequence[History]] = None,
    seed: int = DEFAULT_SEED,
    elements: Sequence[str] = ("a", "b", "c"),
) -> LawReport:
    if histories is None:
        histories = single_phase_histories(seed, elements=elements)
    report = LawReport(law_name="two-phase-agreement")
    cases = 0
    for index, history in enumerate(histories):
        if not is_single_phase(history):
            report.skipped += 1
            continue
        two_phase = TwoPhaseSet().initialize()
        state = crdt.initialize()
        for step, (kind, element) in enumerate(history, start=1):
            if kind == "add":
                two_phase, state = twop_add(two_phase, element), crdt.add(state, element)
            else:
                two_phase, state = twop_remove(two_phase, element), crdt.remove(state, element)
            cases += 1
            if twop_query(two_phase) != crdt.query(state):
                report.counterexamples.append(
                    Counterexample(
                        states=[_dump(state)],
                        clause=f"history #{index} step {step}: 2P-Set {sorted(twop_query(two_phase))} vs {sorted(crdt.query(state))}",
                    )
                )
    report.cases_checked = cases
    if report.skipped:
        report.notes.append(f"{report.skipped} histories re-add an element after removing it and were skipped")
    return report


def sample_replica_states(
    impl: StateCrdt,
    rng: random.Random,
    elements: Sequence[str] = ("a", "b", "c", "d"),
    replicas: int = 3,
    max_ops: int = 12,
) -> list:
    """States of `replicas` replicas after one random run of updates and merges."""
    ids = [f"r{i}" for i in range(replicas)]
    states = {r: impl.initialize() for r in ids}
    for _ in range(rng.randint(0, max_ops)):
        r = rng.choice(ids)
        roll = rng.random()
        if roll < 0.2:
            states[r] = impl.merge(states[r], states[rng.choice(ids)])
        elif roll < 0.6:
            states[r] = impl.add(states[r], rng.choice(elements), r)
        else:
            states[r] = impl.remove(states[r], rng.choice(elements), r)
    return [states[r] for r in ids]


def check_merge_algebra(impl: StateCrdt, samples: int = 1000, seed: int = DEFAULT_SEED) -> LawReport:
    rng = random.Random(seed)
    report = LawReport(law_name=f"merge-algebra[{impl.name}]")
    for _ in range(samples):
        a, b, c = sample_replica_states(impl, rng)
        ab = impl.merge(a, b)
        if not impl.equal(ab, impl.merge(b, a)):
            report.counterexamples.append(Counterexample(states=[impl.dump(a), impl.dump(b)], clause="commutativity"))
        if not impl.equal(impl.merge(a, impl.merge(b, c)), impl.merge(ab, c)):
            report.counterexamples.append(Counterexample(states=[impl.dump(a), impl.dump(b), impl.dump(c)], clause="associativity"))
        if not impl.equal(impl.merge(a, a), a):
            report.counterexamples.append(Counterexample(states=[impl.dump(a)], clause="idempotence"))
        if not (impl.compare(a, ab) and impl.compare(b, ab)):
            report.counterexamples.append(Counterexample(states=[impl.dump(a), impl.dump(b)], clause="upper bound"))
    report.cases_checked = samples
    return report


# --- mutations for harness self-validation ----------------------------------

def flipped_compare(element: str) -> Callable[[CounterMap, CounterMap], bool]:
    target = CounterMap({element: 1})

    def compare(a: CounterMap, b: CounterMap) -> bool:
        result = crdt.compare(a, b)
        if a == target and not b:
            return not result
        return result

    return compare


def bumped_merge(a: CounterMap, b: CounterMap) -> CounterMap:
    merged = dict(crdt.merge(a, b).items())
    for element in set(a) & set(b):
        merged[element] += 1
    return CounterMap(merged)


def dropping_remove(state: CounterMap, element: str) -> CounterMap:
    if crdt.contains(state, element):
        return CounterMap({e: c for e, c in state.items() if e != element})
    return state


def eager_add(state: CounterMap, element: str) -> CounterMap:
    entries = dict(state.items())
    entries[element] = entries.get(element, 0) + 1
    return CounterMap(entries)


# mutation name -> (suite that must detect it, overrides for that suite)
MUTATIONS: Dict[str, Tuple[str, Callable[[StateSpace], dict]]] = {
    "flipped-compare": ("partial-order", lambda space: {"compare": flipped_compare(space.elements[0])}),
    "bumped-merge": ("lub", lambda space: {"merge": bumped_merge}),
    "dropping-remove": ("monotonicity", lambda space: {"remove": dropping_remove}),
    "eager-add": ("phase-equivalence", lambda space: {"add": eager_add}),
}

SUITES = ("partial-order", "lub", "monotonicity", "phase-equivalence", "two-phase-agreement", "merge-algebra")
DEFAULT_SUITES = SUITES[:4]


def run_suite(
    name: str,
    space: StateSpace,
    *,
    depth: int = 2,
    seed: int = DEFAULT_SEED,
    histories: int = 500,
    history_length: int = 12,
    algebra_samples: int = 1000,
    **overrides,
) -> List[LawReport]:
    if name == "partial-order":
        return [check_partial_order(space, **overrides)]
    if name == "lub":
        return [check_lub(space, **overrides)]
    if name == "monotonicity":
        return [check_monotonicity(space, **overrides)]
    if name == "phase-equivalence":
        sampled = sample_histories(seed, histories, history_length, space.elements)
        return [check_phase_equivalence(depth, sampled, seed, space.elements, **overrides)]
    if name == "two-phase-agreement":
        return [check_two_phase_agreement(single_phase_histories(seed, histories, elements=space.elements), seed)]
    if name == "merge-algebra":
        impls: List[StateCrdt] = [crdt.InfinitePSet(), TwoPhaseSet(), ObservedRemoveSet(), LastWriterWinsSet()]
        return [check_merge_algebra(impl, algebra_samples, seed) for impl in impls]
    raise ValueError(f"unknown law suite {name!r}; choose from {', '.join(SUITES)}")


def run_self_tests(space: StateSpace, *, depth: int = 2, seed: int = DEFAULT_SEED, histories: int = 500) -> Dict[str, bool]:
    """mutation name -> whether its paired suite reported a counterexample."""
    detected: Dict[str, bool] = {}
    for mutation, (suite, overrides) in MUTATIONS.items():
        reports = run_suite(suite, space, depth=depth, seed=seed, histories=histories, **overrides(space))
        detected[mutation] = any(not r.passed for r in reports)
        if not detected[mutation]:
            logger.warning(f"self-test: mutation {mutation} went undetected by {suite}")
    return detected
