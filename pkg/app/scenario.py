"""
Scenario scripts for the replica simulator.

Line-oriented text, `#` starts a comment:

    replicas r1 r2
    op r1 add e
    send r1 r2
    crash r2
    recover r2
    assert r1 contains e
    assert r2 lacks e
    assert-equal r1 r2
    quiesce

Scripts are checked while parsing, so a script that parses can always be run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple, Union

from .crdt import InvalidElementError, validate_element

_REPLICA_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_-]{0,31}$")


class ScenarioParseError(ValueError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class OpEvent:
    replica: str
    kind: str  # "add" | "remove"
    element: str
    line: int = 0

    def to_text(self) -> str:
        return f"op {self.replica} {self.kind} {self.element}"


@dataclass(frozen=True)
class SendEvent:
    src: str
    dst: str
    line: int = 0

    def to_text(self) -> str:
        return f"send {self.src} {self.dst}"


@dataclass(frozen=True)
class CrashEvent:
    replica: str
    line: int = 0

    def to_text(self) -> str:
        return f"crash {self.replica}"


@dataclass(frozen=True)
class RecoverEvent:
    replica: str
    line: int = 0

    def to_text(self) -> str:
        return f"recover {self.replica}"


@dataclass(frozen=True)
class AssertContainsEvent:
    replica: str
    element: str
    expected: bool
    line: int = 0

    def to_text(self) -> str:
        return f"assert {self.replica} {'contains' if self.expected else 'lacks'} {self.element}"


@dataclass(frozen=True)
class AssertEqualEvent:
    first: str
    second: str
    line: int = 0

    def to_text(self) -> str:
        return f"assert-equal {self.first} {self.second}"


@dataclass(frozen=True)
class QuiesceEvent:
    line: int = 0

    def to_text(self) -> str:
        return "quiesce"


Event = Union[OpEvent, SendEvent, CrashEvent, RecoverEvent, AssertContainsEvent, AssertEqualEvent, QuiesceEvent]
ASSERTIONS = (AssertContainsEvent, AssertEqualEvent)


@dataclass(frozen=True)
class ScenarioScript:
    replicas: Tuple[str, ...]
    events: Tuple[Event, ...] = field(default_factory=tuple)
    name: str = "scenario"

    def to_text(self) -> str:
        lines = [f"replicas {' '.join(self.replicas)}"]
        lines.extend(event.to_text() for event in self.events)
        return "\n".join(lines) + "\n"

    def elements(self) -> List[str]:
        seen: dict[str, None] = {}
        for event in self.events:
            if isinstance(event, OpEvent):
                seen.setdefault(event.element, None)
        return list(seen)


class _Checker:
    """Tracks crash status and the quiesce phase while events are parsed."""

    def __init__(self, replicas: Tuple[str, ...]) -> None:
        self.replicas = set(replicas)
        self.crashed: set[str] = set()
        self.quiesced = False

    def known(self, lineno: int, replica: str) -> None:
        if replica not in self.replicas:
            raise ScenarioParseError(lineno, f"undeclared replica {replica!r}")

    def live(self, lineno: int, replica: str, action: str) -> None:
        self.known(lineno, replica)
        if replica in self.crashed:
            raise ScenarioParseError(lineno, f"{action} from crashed replica {replica!r}")

    def check(self, lineno: int, event: Event) -> None:
        if self.quiesced and not isinstance(event, ASSERTIONS + (QuiesceEvent,)):
            raise ScenarioParseError(lineno, "only assertions or quiesce may follow quiesce")
        if isinstance(event, OpEvent):
            self.live(lineno, event.replica, "op")
        elif isinstance(event, SendEvent):
            self.live(lineno, event.src, "send")
            self.known(lineno, event.dst)
            if event.src == event.dst:
                raise ScenarioParseError(lineno, "send needs two different replicas")
        elif isinstance(event, CrashEvent):
            self.live(lineno, event.replica, "crash")
            self.crashed.add(event.replica)
        elif isinstance(event, RecoverEvent):
            self.known(lineno, event.replica)
            if event.replica not in self.crashed:
                raise ScenarioParseError(lineno, f"recover of replica {event.replica!r} that is not crashed")
            self.crashed.discard(event.replica)
        elif isinstance(event, AssertContainsEvent):
            self.known(lineno, event.replica)
        elif isinstance(event, AssertEqualEvent):
            self.known(lineno, event.first)
            self.known(lineno, event.second)
        elif isinstance(event, QuiesceEvent):
            # quiesce recovers every crashed replica
            self.quiesced = True
            self.crashed.clear()


def _element(lineno: int, token: str) -> str:
    try:
        return validate_element(token)
    except InvalidElementError as e:
        raise ScenarioParseError(lineno, str(e)) from None


def _parse_event(lineno: int, words: List[str]) -> Event:
    keyword, args = words[0], words[1:]

    def arity(n: int, usage: str) -> None:
        if len(args) != n:
            raise ScenarioParseError(lineno, f"expected `{usage}`")

    if keyword == "op":
        arity(3, "op <replica> add|remove <element>")
        if args[1] not in ("add", "remove"):
            raise ScenarioParseError(lineno, f"unknown operation {args[1]!r}, expected add or remove")
        return OpEvent(args[0], args[1], _element(lineno, args[2]), lineno)
    if keyword == "send":
        arity(2, "send <src> <dst>")
        return SendEvent(args[0], args[1], lineno)
    if keyword == "crash":
        arity(1, "crash <replica>")
        return CrashEvent(args[0], lineno)
    if keyword == "recover":
        arity(1, "recover <replica>")
        return RecoverEvent(args[0], lineno)
    if keyword == "assert":
        arity(3, "assert <replica> contains|lacks <element>")
        if args[1] not in ("contains", "lacks"):
            raise ScenarioParseError(lineno, f"unknown assertion {args[1]!r}, expected contains or lacks")
        return AssertContainsEvent(args[0], _element(lineno, args[2]), args[1] == "contains", lineno)
    if keyword == "assert-equal":
        arity(2, "assert-equal <replica> <replica>")
        return AssertEqualEvent(args[0], args[1], lineno)
    if keyword == "quiesce":
        arity(0, "quiesce")
        return QuiesceEvent(lineno)
    if keyword == "replicas":
        raise ScenarioParseError(lineno, "replicas may only be declared once, on the first line")
    raise ScenarioParseError(lineno, f"unknown event {keyword!r}")


def parse_scenario(text: str, name: str = "scenario") -> ScenarioScript:
    replicas: Tuple[str, ...] = ()
    checker: _Checker | None = None
    events: List[Event] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        if checker is None:
            if words[0] != "replicas":
                raise ScenarioParseError(lineno, "script must start with `replicas <id> ...`")
            replicas = tuple(words[1:])
            if not replicas:
                raise ScenarioParseError(lineno, "at least one replica is required")
            for replica in replicas:
                if not _REPLICA_RE.match(replica):
                    raise ScenarioParseError(lineno, f"invalid replica id {replica!r}")
            if len(set(replicas)) != len(replicas):
                raise ScenarioParseError(lineno, "replica ids must be unique")
            checker = _Checker(replicas)
            continue
        event = _parse_event(lineno, words)
        checker.check(lineno, event)
        events.append(event)

    if checker is None:
        raise ScenarioParseError(1, "empty script; expected `replicas <id> ...`")
    return ScenarioScript(replicas, tuple(events), name)


def load_scenario(path: Path | str) -> ScenarioScript:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)
