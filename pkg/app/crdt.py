"""
∞P-Set state-based CRDT.

The replica state is a grow-only dictionary of grow-only counters: each element
maps to a positive integer, odd meaning "in the set" and even meaning "out".
All operations take a state and return a new one; inputs are never mutated.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Iterable, Iterator, Mapping
from typing import Generic, Optional, TypeVar

# 64-bit unsigned ceiling. Wrapping would silently flip parity.
COUNTER_MAX = 2**64 - 1

SetView = frozenset  # frozenset[str], the result of query()


class InvalidElementError(ValueError):
    pass


class CounterOverflowError(ValueError):
    pass


class StateParseError(ValueError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


def validate_element(element: object) -> str:
    if not isinstance(element, str) or not element:
        raise InvalidElementError(f"element must be a nonempty string, got {element!r}")
    if "\t" in element or "\n" in element:
        raise InvalidElementError(f"element may not contain tab or newline: {element!r}")
    try:
        element.encode("utf-8")
    except UnicodeEncodeError as e:
        raise InvalidElementError(f"element is not encodable as UTF-8: {element!r}") from e
    return element


def _element_key(element: str) -> bytes:
    return element.encode("utf-8")


class CounterMap(Mapping[str, int]):
    """Immutable element -> counter map. Every stored counter is >= 1."""

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries: Mapping[str, int] | Iterable[tuple[str, int]] = ()) -> None:
        items = entries.items() if isinstance(entries, Mapping) else entries
        checked: dict[str, int] = {}
        for element, counter in items:
            validate_element(element)
            if element in checked:
                raise ValueError(f"duplicate element {element!r}")
            if isinstance(counter, bool) or not isinstance(counter, int) or counter < 1:
                raise ValueError(f"counter for {element!r} must be an integer >= 1, got {counter!r}")
            if counter > COUNTER_MAX:
                raise CounterOverflowError(f"counter for {element!r} exceeds {COUNTER_MAX}")
            checked[element] = counter
        self._entries = checked
        self._hash: Optional[int] = None

    @classmethod
    def _trusted(cls, entries: dict[str, int]) -> CounterMap:
        # Skips validation; only for dicts built from already-valid maps.
        obj = cls.__new__(cls)
        obj._entries = entries
        obj._hash = None
        return obj

    def __getitem__(self, element: str) -> int:
        return self._entries[element]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, element: object) -> bool:
        return element in self._entries

    def __eq__(self, other: object) -> bool:
        if isinstance(other, CounterMap):
            return self._entries == other._entries
        if isinstance(other, Mapping):
            return self._entries == dict(other.items())
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{e!r}: {c}" for e, c in sorted(self._entries.items(), key=lambda kv: _element_key(kv[0])))
        return f"CounterMap({{{body}}})"


def _increment(counter: int, element: str) -> int:
    if counter >= COUNTER_MAX:
        raise CounterOverflowError(f"counter for {element!r} would exceed {COUNTER_MAX}")
    return counter + 1


def initialize() -> CounterMap:
    return CounterMap._trusted({})


def query(state: CounterMap) -> frozenset[str]:
    return frozenset(e for e, c in state.items() if c % 2 == 1)


def contains(state: CounterMap, element: str) -> bool:
    counter = state.get(element)
    return counter is not None and counter % 2 == 1


def add(state: CounterMap, element: str) -> CounterMap:
    validate_element(element)
    counter = state.get(element)
    if counter is None:
        entries = dict(state.items())
        entries[element] = 1
        return CounterMap._trusted(entries)
    if counter % 2 == 0:
        entries = dict(state.items())
        entries[element] = _increment(counter, element)
        return CounterMap._trusted(entries)
    # already in the set: ignored
    return state


def remove(state: CounterMap, element: str) -> CounterMap:
    validate_element(element)
    counter = state.get(element)
    if counter is not None and counter % 2 == 1:
        entries = dict(state.items())
        entries[element] = _increment(counter, element)
        return CounterMap._trusted(entries)
    return state


def compare(state: CounterMap, other: CounterMap) -> bool:
    """True iff state <= other."""
    for element, counter in state.items():
        theirs = other.get(element)
        if theirs is None:
            return False
        if counter > theirs:
            return False
    return True


def is_concurrent(state: CounterMap, other: CounterMap) -> bool:
    return not compare(state, other) and not compare(other, state)


def merge(state: CounterMap, other: CounterMap) -> CounterMap:
    entries = dict(state.items())
    for element, counter in other.items():
        mine = entries.get(element)
        if mine is None or counter > mine:
            entries[element] = counter
    return CounterMap._trusted(entries)


def merge_all(states: Iterable[CounterMap]) -> CounterMap:
    result = initialize()
    for state in states:
        result = merge(result, state)
    return result


def serialize(state: CounterMap) -> bytes:
    """Canonical form: `<element>\\t<counter>\\n` per entry, sorted by element bytes."""
    lines = [
        _element_key(element) + b"\t" + str(state[element]).encode("ascii") + b"\n"
        for element in sorted(state, key=_element_key)
    ]
    return b"".join(lines)


def deserialize(data: bytes) -> CounterMap:
    if not data:
        return initialize()
    if not data.endswith(b"\n"):
        raise StateParseError(data.count(b"\n") + 1, "missing trailing newline")
    entries: dict[str, int] = {}
    previous: Optional[bytes] = None
    for lineno, raw in enumerate(data[:-1].split(b"\n"), start=1):
        parts = raw.split(b"\t")
        if len(parts) != 2:
            raise StateParseError(lineno, "expected <element><TAB><counter>")
        key, digits = parts
        try:
            element = key.decode("utf-8")
        except UnicodeDecodeError:
            raise StateParseError(lineno, "element is not valid UTF-8") from None
        if not element:
            raise StateParseError(lineno, "empty element")
        if not digits.isdigit() or not digits.isascii():
            raise StateParseError(lineno, f"counter is not a decimal number: {digits!r}")
        counter = int(digits)
        if counter < 1:
            raise StateParseError(lineno, "counter below 1")
        if digits.startswith(b"0"):
            raise StateParseError(lineno, "counter has leading zeros")
        if counter > COUNTER_MAX:
            raise StateParseError(lineno, f"counter exceeds {COUNTER_MAX}")
        if previous is not None:
            if key == previous:
                raise StateParseError(lineno, f"duplicate element {element!r}")
            if key < previous:
                raise StateParseError(lineno, f"element {element!r} out of order")
        previous = key
        entries[element] = counter
    return CounterMap._trusted(entries)


S = TypeVar("S")


class StateCrdt(ABC, Generic[S]):
    """
    State-based CRDT contract shared by the ∞P-Set and the baseline sets.

    compare must be a partial order over reachable states, merge must be the
    least upper bound and updates must be monotone; the law harness checks
    these rather than assuming them.
    """

    name: str = "crdt"

    @abstractmethod
    def initialize(self) -> S: ...

    @abstractmethod
    def query(self, state: S) -> frozenset[str]: ...

    @abstractmethod
    def compare(self, state: S, other: S) -> bool: ...

    @abstractmethod
    def merge(self, state: S, other: S) -> S: ...

    @abstractmethod
    def add(self, state: S, element: str, replica: str = "r0") -> S: ...

    @abstractmethod
    def remove(self, state: S, element: str, replica: str = "r0") -> S: ...

    def equal(self, state: S, other: S) -> bool:
        return state == other

    def dump(self, state: S) -> str:
        return repr(state)


class InfinitePSet(StateCrdt[CounterMap]):
    name = "infinite-p-set"

    def initialize(self) -> CounterMap:
        return initialize()

    def query(self, state: CounterMap) -> frozenset[str]:
        return query(state)

    def compare(self, state: CounterMap, other: CounterMap) -> bool:
        return compare(state, other)

    def merge(self, state: CounterMap, other: CounterMap) -> CounterMap:
        return merge(state, other)

    def add(self, state: CounterMap, element: str, replica: str = "r0") -> CounterMap:
        return add(state, element)

    def remove(self, state: CounterMap, element: str, replica: str = "r0") -> CounterMap:
        return remove(state, element)

    def equal(self, state: CounterMap, other: CounterMap) -> bool:
        return serialize(state) == serialize(other)

    def dump(self, state: CounterMap) -> str:
        return serialize(state).decode("utf-8")
