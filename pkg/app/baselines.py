"""
Reference set CRDTs used as foils for the ∞P-Set: 2P-Set, OR-Set (tombstone
keeping) and LWW-Set (keeps stale tuples). All are immutable values, and each
has a StateCrdt adapter so generic drivers can replay histories through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import singledispatch
from typing import Dict, FrozenSet, NamedTuple, Tuple

from .crdt import CounterMap, StateCrdt, validate_element


class InvalidStateError(ValueError):
    pass


class TagReuseError(ValueError):
    pass


class NonMonotoneTimestampError(ValueError):
    pass


# --- 2P-Set -----------------------------------------------------------------

@dataclass(frozen=True)
class TwoPhaseState:
    add_set: FrozenSet[str] = frozenset()
    remove_set: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.remove_set <= self.add_set:
            raise InvalidStateError("remove-set must be a subset of the add-set")


def twop_initialize() -> TwoPhaseState:
    return TwoPhaseState()


def twop_add(state: TwoPhaseState, element: str) -> TwoPhaseState:
    validate_element(element)
    if element in state.add_set:
        return state
    return TwoPhaseState(state.add_set | {element}, state.remove_set)


def twop_remove(state: TwoPhaseState, element: str) -> TwoPhaseState:
    validate_element(element)
    if element not in state.add_set or element in state.remove_set:
        return state
    return TwoPhaseState(state.add_set, state.remove_set | {element})


def twop_query(state: TwoPhaseState) -> frozenset[str]:
    return state.add_set - state.remove_set


def twop_merge(state: TwoPhaseState, other: TwoPhaseState) -> TwoPhaseState:
    return TwoPhaseState(state.add_set | other.add_set, state.remove_set | other.remove_set)


def twop_compare(state: TwoPhaseState, other: TwoPhaseState) -> bool:
    return state.add_set <= other.add_set and state.remove_set <= other.remove_set


# --- OR-Set -----------------------------------------------------------------

Tag = Tuple[str, int]  # (replica id, per-replica sequence number)


@dataclass(frozen=True)
class OrSetState:
    observed: FrozenSet[Tuple[str, Tag]] = frozenset()
    tombstones: FrozenSet[Tuple[str, Tag]] = frozenset()

    def tags(self) -> frozenset[Tag]:
        return frozenset(tag for _, tag in self.observed | self.tombstones)


def orset_initialize() -> OrSetState:
    return OrSetState()


def orset_add(state: OrSetState, element: str, tag: Tag) -> OrSetState:
    validate_element(element)
    if tag in state.tags():
        raise TagReuseError(f"tag {tag!r} was already used")
    return OrSetState(state.observed | {(element, tag)}, state.tombstones)


def orset_remove(state: OrSetState, element: str) -> OrSetState:
    validate_element(element)
    visible = {pair for pair in state.observed - state.tombstones if pair[0] == element}
    if not visible:
        return state
    return OrSetState(state.observed, state.tombstones | visible)


def orset_query(state: OrSetState) -> frozenset[str]:
    return frozenset(element for element, _ in state.observed - state.tombstones)


def orset_merge(state: OrSetState, other: OrSetState) -> OrSetState:
    return OrSetState(state.observed | other.observed, state.tombstones | other.tombstones)


def orset_compare(state: OrSetState, other: OrSetState) -> bool:
    return state.observed <= other.observed and state.tombstones <= other.tombstones


def orset_next_tag(state: OrSetState, replica: str) -> Tag:
    seq = max((s for r, s in state.tags() if r == replica), default=0)
    return (replica, seq + 1)


# --- LWW-Set ----------------------------------------------------------------

class Timestamp(NamedTuple):
    """Totally ordered: logical clock first, replica id breaks ties."""

    clock: int
    replica: str


@dataclass(frozen=True)
class LwwSetState:
    add_entries: Dict[str, Timestamp] = field(default_factory=dict)
    remove_entries: Dict[str, Timestamp] = field(default_factory=dict)

    def __hash__(self) -> int:
        return hash((frozenset(self.add_entries.items()), frozenset(self.remove_entries.items())))

    def timestamps(self) -> list[Timestamp]:
        return list(self.add_entries.values()) + list(self.remove_entries.values())


def lww_initialize() -> LwwSetState:
    return LwwSetState()


def _check_local_timestamp(state: LwwSetState, ts: Timestamp) -> None:
    issued = [t for t in state.timestamps() if t.replica == ts.replica]
    if issued and ts <= max(issued):
        raise NonMonotoneTimestampError(f"timestamp {ts!r} is not newer than {max(issued)!r}")


def _keep_max(entries: Dict[str, Timestamp], element: str, ts: Timestamp) -> Dict[str, Timestamp]:
    current = entries.get(element)
    if current is not None and current >= ts:
        return entries
    updated = dict(entries)
    updated[element] = ts
    return updated


def lww_add(state: LwwSetState, element: str, ts: Timestamp) -> LwwSetState:
    validate_element(element)
    _check_local_timestamp(state, ts)
    return LwwSetState(_keep_max(state.add_entries, element, ts), state.remove_entries)


def lww_remove(state: LwwSetState, element: str, ts: Timestamp) -> LwwSetState:
    validate_element(element)
    _check_local_timestamp(state, ts)
    return LwwSetState(state.add_entries, _keep_max(state.remove_entries, element, ts))


def lww_query(state: LwwSetState) -> frozenset[str]:
    members = set()
    for element, added in state.add_entries.items():
        removed = state.remove_entries.get(element)
        if removed is None or removed < added:
            members.add(element)
    return frozenset(members)


def _pointwise_max(a: Dict[str, Timestamp], b: Dict[str, Timestamp]) -> Dict[str, Timestamp]:
    merged = dict(a)
    for element, ts in b.items():
        if element not in merged or ts > merged[element]:
            merged[element] = ts
    return merged


def lww_merge(state: LwwSetState, other: LwwSetState) -> LwwSetState:
    return LwwSetState(
        _pointwise_max(state.add_entries, other.add_entries),
        _pointwise_max(state.remove_entries, other.remove_entries),
    )


def _dominated(a: Dict[str, Timestamp], b: Dict[str, Timestamp]) -> bool:
    return all(element in b and ts <= b[element] for element, ts in a.items())


def lww_compare(state: LwwSetState, other: LwwSetState) -> bool:
    return _dominated(state.add_entries, other.add_entries) and _dominated(
        state.remove_entries, other.remove_entries
    )


def lww_next_timestamp(state: LwwSetState, replica: str) -> Timestamp:
    clock = max((t.clock for t in state.timestamps()), default=0)
    return Timestamp(clock + 1, replica)


# --- metadata token model ---------------------------------------------------

@singledispatch
def metadata_tokens(state: object) -> int:
    raise TypeError(f"no token model for {type(state).__name__}")


@metadata_tokens.register
def _(state: CounterMap) -> int:
    # key + counter per element ever touched
    return 2 * len(state)


@metadata_tokens.register
def _(state: TwoPhaseState) -> int:
    return len(state.add_set) + len(state.remove_set)


@metadata_tokens.register
def _(state: OrSetState) -> int:
    return 2 * (len(state.observed) + len(state.tombstones)) + 2 * len(state.tags())


@metadata_tokens.register
def _(state: LwwSetState) -> int:
    # element, clock, replica id
    return 3 * (len(state.add_entries) + len(state.remove_entries))


# --- StateCrdt adapters -----------------------------------------------------

class TwoPhaseSet(StateCrdt[TwoPhaseState]):
    name = "two-phase-set"

    def initialize(self) -> TwoPhaseState:
        return twop_initialize()

    def query(self, state: TwoPhaseState) -> frozenset[str]:
        return twop_query(state)

    def compare(self, state: TwoPhaseState, other: TwoPhaseState) -> bool:
        return twop_compare(state, other)

    def merge(self, state: TwoPhaseState, other: TwoPhaseState) -> TwoPhaseState:
        return twop_merge(state, other)

    def add(self, state: TwoPhaseState, element: str, replica: str = "r0") -> TwoPhaseState:
        return twop_add(state, element)

    def remove(self, state: TwoPhaseState, element: str, replica: str = "r0") -> TwoPhaseState:
        return twop_remove(state, element)

    def dump(self, state: TwoPhaseState) -> str:
        return f"A={sorted(state.add_set)} R={sorted(state.remove_set)}"


class ObservedRemoveSet(StateCrdt[OrSetState]):
    name = "or-set"

    def initialize(self) -> OrSetState:
        return orset_initialize()

    def query(self, state: OrSetState) -> frozenset[str]:
        return orset_query(state)

    def compare(self, state: OrSetState, other: OrSetState) -> bool:
        return orset_compare(state, other)

    def merge(self, state: OrSetState, other: OrSetState) -> OrSetState:
        return orset_merge(state, other)

    def add(self, state: OrSetState, element: str, replica: str = "r0") -> OrSetState:
        return orset_add(state, element, orset_next_tag(state, replica))

    def remove(self, state: OrSetState, element: str, replica: str = "r0") -> OrSetState:
        return orset_remove(state, element)

    def dump(self, state: OrSetState) -> str:
        return f"observed={sorted(state.observed)} tombstones={sorted(state.tombstones)}"


class LastWriterWinsSet(StateCrdt[LwwSetState]):
    name = "lww-set"

    def initialize(self) -> LwwSetState:
        return lww_initialize()

    def query(self, state: LwwSetState) -> frozenset[str]:
        return lww_query(state)

    def compare(self, state: LwwSetState, other: LwwSetState) -> bool:
        return lww_compare(state, other)

    def merge(self, state: LwwSetState, other: LwwSetState) -> LwwSetState:
        return lww_merge(state, other)

    def add(self, state: LwwSetState, element: str, replica: str = "r0") -> LwwSetState:
        return lww_add(state, element, lww_next_timestamp(state, replica))

    def remove(self, state: LwwSetState, element: str, replica: str = "r0") -> LwwSetState:
        return lww_remove(state, element, lww_next_timestamp(state, replica))

    def dump(self, state: LwwSetState) -> str:
        return f"adds={sorted(state.add_entries.items())} removes={sorted(state.remove_entries.items())}"
