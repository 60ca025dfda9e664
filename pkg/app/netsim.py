"""
Deterministic replica simulator: state-based gossip over an unreliable channel.

Time is a tick counter that advances once per script event. Messages carry the
sender's full serialized state; the channel may drop, duplicate or delay them
according to a FaultPolicy, all drawn from one seeded generator. A crashed
replica applies nothing and its inbound messages are held until it recovers.
`quiesce` recovers everyone, drains the channel without faults and gossips
all-pairs until nothing changes.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

from . import crdt
from .config import DEFAULT_SEED, RELIABLE, FaultPolicy
from .crdt import CounterMap
from .reports import AssertionResult, ChannelStats, ConvergenceReport, OracleCheck, ScenarioReport
from .scenario import (
    AssertContainsEvent,
    AssertEqualEvent,
    CrashEvent,
    Event,
    OpEvent,
    QuiesceEvent,
    RecoverEvent,
    ScenarioScript,
    SendEvent,
)

logger = logging.getLogger("infpset.netsim")


class ConvergenceError(RuntimeError):
    pass


@dataclass
class Replica:
    id: str
    state: CounterMap = field(default_factory=crdt.initialize)
    crashed: bool = False
    applied_ops: List[Tuple[str, str]] = field(default_factory=list)


@dataclass(frozen=True)
class Message:
    id: int
    src: str
    dst: str
    payload: bytes


@dataclass(frozen=True)
class LogEntry:
    """One causally relevant step: an op, a send, or a delivery."""

    kind: Literal["op", "send", "deliver"]
    replica: str  # op: issuer, send: source, deliver: destination
    message_id: Optional[int] = None
    op: Optional[str] = None
    element: Optional[str] = None


class Channel:
    def __init__(self, policy: FaultPolicy, rng: random.Random) -> None:
        self.policy = policy
        self.rng = rng
        self.stats = ChannelStats()
        self._queue: List[Tuple[int, int, Message]] = []
        self._held: List[Message] = []
        self._seq = itertools.count()

    def _schedule(self, message: Message, tick: int) -> None:
        if self.rng.random() < self.policy.p_drop:
            self.stats.dropped += 1
            logger.debug(f"tick {tick}: dropped message {message.id} {message.src}->{message.dst}")
            return
        deliver_at = tick + 1 + self.rng.randint(0, self.policy.max_reorder_delay)
        heapq.heappush(self._queue, (deliver_at, next(self._seq), message))

    def send(self, message: Message, tick: int) -> None:
        self.stats.sent += 1
        self._schedule(message, tick)
        if self.policy.duplicate_probability and self.rng.random() < self.policy.duplicate_probability:
            self.stats.duplicated += 1
            logger.debug(f"tick {tick}: duplicated message {message.id}")
            self._schedule(message, tick)

    def due(self, tick: int) -> List[Message]:
        ready = []
        while self._queue and self._queue[0][0] <= tick:
            ready.append(heapq.heappop(self._queue)[2])
        return ready

    def hold(self, message: Message) -> None:
        self.stats.held += 1
        self._held.append(message)

    def release(self, replica: str, tick: int) -> None:
        """Re-enter held messages for a recovered replica, with fresh fault draws."""
        waiting = [m for m in self._held if m.dst == replica]
        self._held = [m for m in self._held if m.dst != replica]
        for message in waiting:
            self._schedule(message, tick)

    def drain(self) -> List[Message]:
        """Everything still in flight, in (deliver_at, seq) order, then held messages."""
        ordered = [entry[2] for entry in sorted(self._queue)]
        ordered.extend(self._held)
        self._queue.clear()
        self._held.clear()
        return ordered

    @property
    def in_flight(self) -> int:
        return len(self._queue) + len(self._held)


class Simulation:
    def __init__(self, replica_ids: Sequence[str], seed: int = DEFAULT_SEED, faults: FaultPolicy = RELIABLE) -> None:
        self.seed = seed
        self.replicas: Dict[str, Replica] = {r: Replica(r) for r in replica_ids}
        self.channel = Channel(faults, random.Random(seed))
        self.tick = 0
        self.log: List[LogEntry] = []
        self.assertions: List[AssertionResult] = []
        self.snapshot: Optional[Dict[str, CounterMap]] = None
        self.quiesce_rounds = 0
        self.crashes = 0
        self._message_ids = itertools.count(1)

    @property
    def quiesced(self) -> bool:
        return self.snapshot is not None

    def states(self) -> Dict[str, CounterMap]:
        return {r: replica.state for r, replica in self.replicas.items()}

    def advance(self) -> None:
        self.tick += 1
        for message in self.channel.due(self.tick):
            self._deliver(message)

    def _deliver(self, message: Message) -> None:
        dst = self.replicas[message.dst]
        if dst.crashed:
            logger.debug(f"tick {self.tick}: holding message {message.id} for crashed {message.dst}")
            self.channel.hold(message)
            return
        dst.state = crdt.merge(dst.state, crdt.deserialize(message.payload))
        self.channel.stats.delivered += 1
        self.log.append(LogEntry("deliver", message.dst, message_id=message.id))
        logger.debug(f"tick {self.tick}: delivered message {message.id} {message.src}->{message.dst}")

    def _live(self, replica_id: str) -> Replica:
        replica = self.replicas[replica_id]
        if replica.crashed:
            raise ValueError(f"replica {replica_id} is crashed")
        return replica

    def apply_op(self, replica_id: str, kind: str, element: str) -> None:
        replica = self._live(replica_id)
        if kind == "add":
            replica.state = crdt.add(replica.state, element)
        elif kind == "remove":
            replica.state = crdt.remove(replica.state, element)
        else:
            raise ValueError(f"unknown operation {kind!r}")
        replica.applied_ops.append((kind, element))
        self.log.append(LogEntry("op", replica_id, op=kind, element=element))
        logger.debug(f"tick {self.tick}: {replica_id} {kind} {element} -> {replica.state.get(element)}")

    def send(self, src: str, dst: str) -> None:
        replica = self._live(src)
        message = Message(next(self._message_ids), src, dst, crdt.serialize(replica.state))
        self.log.append(LogEntry("send", src, message_id=message.id))
        self.channel.send(message, self.tick)

    def crash(self, replica_id: str) -> None:
        self._live(replica_id).crashed = True
        self.crashes += 1
        logger.debug(f"tick {self.tick}: {replica_id} crashed")

    def recover(self, replica_id: str) -> None:
        self.replicas[replica_id].crashed = False
        self.channel.release(replica_id, self.tick)
        logger.debug(f"tick {self.tick}: {replica_id} recovered")

    def quiesce(self) -> None:
        if self.snapshot is None:
            self.snapshot = self.states()
        for replica in self.replicas.values():
            replica.crashed = False
        for message in self.channel.drain():
            self._deliver(message)

        ids = list(self.replicas)
        # one pass pushes everything through the last replica, a second confirms
        max_rounds = len(ids) + 2
        for rounds in itertools.count(1):
            changed = False
            for a, b in itertools.permutations(ids, 2):
                target = self.replicas[b]
                merged = crdt.merge(target.state, self.replicas[a].state)
                if merged != target.state:
                    target.state = merged
                    changed = True
            if not changed:
                self.quiesce_rounds += rounds
                break
            if rounds >= max_rounds:
                raise ConvergenceError(f"quiesce did not reach a fixpoint in {max_rounds} rounds")
        logger.info(f"quiesce at tick {self.tick}: {self.quiesce_rounds} gossip rounds")

    def _assert(self, event: Event) -> AssertionResult:
        if isinstance(event, AssertContainsEvent):
            state = self.replicas[event.replica].state
            actual = crdt.contains(state, event.element)
            return AssertionResult(
                line=event.line,
                text=event.to_text(),
                passed=actual == event.expected,
                detail=f"{event.replica} counter for {event.element}: {state.get(event.element, 'absent')}",
            )
        assert isinstance(event, AssertEqualEvent)
        first = crdt.serialize(self.replicas[event.first].state)
        second = crdt.serialize(self.replicas[event.second].state)
        return AssertionResult(
            line=event.line,
            text=event.to_text(),
            passed=first == second,
            detail="" if first == second else f"{event.first} != {event.second}",
        )

    def execute(self, event: Event) -> None:
        self.advance()
        if isinstance(event, OpEvent):
            self.apply_op(event.replica, event.kind, event.element)
        elif isinstance(event, SendEvent):
            self.send(event.src, event.dst)
        elif isinstance(event, CrashEvent):
            self.crash(event.replica)
        elif isinstance(event, RecoverEvent):
            self.recover(event.replica)
        elif isinstance(event, QuiesceEvent):
            self.quiesce()
        else:
            result = self._assert(event)
            if not result.passed:
                logger.warning(f"line {result.line}: assertion failed: {result.text} ({result.detail})")
            self.assertions.append(result)


def simulate(script: ScenarioScript, seed: int = DEFAULT_SEED, faults: FaultPolicy = RELIABLE) -> Simulation:
    sim = Simulation(script.replicas, seed, faults)
    for event in script.events:
        sim.execute(event)
    return sim


# --- longest-sequence oracle ------------------------------------------------

def _op_dag(log: Iterable[LogEntry]) -> List[Tuple[LogEntry, frozenset[int]]]:
    """Ops in log order, each with the indices of the ops in its causal past."""
    nodes: List[Tuple[LogEntry, frozenset[int]]] = []
    known: Dict[str, frozenset[int]] = {}
    carried: Dict[int, frozenset[int]] = {}
    for entry in log:
        past = known.get(entry.replica, frozenset())
        if entry.kind == "op":
            nodes.append((entry, past))
            known[entry.replica] = past | {len(nodes) - 1}
        elif entry.kind == "send":
            carried[entry.message_id] = past
        else:
            known[entry.replica] = past | carried.get(entry.message_id, frozenset())
    return nodes


def longest_sequence_length(log: Iterable[LogEntry], element: str) -> int:
    """
    Length of the longest causal chain of alternating ops on element that
    starts with an add. Ops that were no-ops where they ran may still extend a
    chain; they never produce a longer one than the effective ops do.
    """
    nodes = _op_dag(log)
    length: Dict[int, int] = {}
    for index, (entry, past) in enumerate(nodes):
        if entry.element != element:
            continue
        wanted = "remove" if entry.op == "add" else "add"
        previous = [length[p] for p in past if p in length and nodes[p][0].op == wanted]
        if entry.op == "add":
            length[index] = 1 + max(previous, default=0)
        elif previous:
            length[index] = 1 + max(previous)
    return max(length.values(), default=0)


def longest_sequence_oracle(log: Iterable[LogEntry], element: str) -> bool:
    return longest_sequence_length(log, element) % 2 == 1


def oracle_checks(sim: Simulation, elements: Iterable[str]) -> List[OracleCheck]:
    converged = crdt.merge_all(sim.states().values())
    checks = []
    for element in elements:
        chain = longest_sequence_length(sim.log, element)
        check = OracleCheck(
            element=element,
            chain_length=chain,
            oracle_member=chain % 2 == 1,
            converged_member=crdt.contains(converged, element),
        )
        if not check.agrees:
            logger.warning(f"oracle disagrees on {element}: chain {chain}, counter {converged.get(element)}")
        checks.append(check)
    return checks


def run_scenario(script: ScenarioScript, seed: int = DEFAULT_SEED, faults: FaultPolicy = RELIABLE) -> ScenarioReport:
    logger.info(f"running scenario {script.name} ({len(script.events)} events, seed {seed})")
    sim = simulate(script, seed, faults)
    report = ScenarioReport(
        name=script.name,
        seed=seed,
        events=len(script.events),
        assertions=sim.assertions,
        oracle=oracle_checks(sim, script.elements()) if sim.quiesced else [],
        final_states={r: crdt.serialize(s).decode("utf-8") for r, s in sim.states().items()},
        quiesce_rounds=sim.quiesce_rounds,
        channel=sim.channel.stats,
    )
    logger.info(f"scenario {script.name}: {'passed' if report.passed else 'FAILED'}")
    return report


# --- fuzzing ----------------------------------------------------------------

@dataclass(frozen=True)
class CrashWindow:
    """Replica `replica` (1-based) is down from op `first_op` through op `last_op`."""

    replica: int
    first_op: int
    last_op: int


def generate_fuzz_script(
    replicas: int,
    ops: int,
    universe: int,
    seed: int = DEFAULT_SEED,
    crash_probability: float = 0.0,
    crash_windows: Sequence[CrashWindow] = (),
) -> ScenarioScript:
    if replicas < 2:
        raise ValueError("fuzzing needs at least 2 replicas")
    if universe < 1:
        raise ValueError("element universe must not be empty")
    ids = [f"r{i}" for i in range(1, replicas + 1)]
    elements = [f"e{i}" for i in range(universe)]
    for window in crash_windows:
        if not 1 <= window.replica <= replicas or window.last_op < window.first_op:
            raise ValueError(f"invalid crash window {window}")

    rng = random.Random(seed)
    events: List[Event] = []
    crashed: set[str] = set()
    recover_at: Dict[str, int] = {}

    def crash(replica: str, until: int) -> None:
        if replica in crashed:
            recover_at[replica] = max(recover_at[replica], until)
            return
        if len(crashed) + 1 >= len(ids):
            return  # someone has to stay up to issue ops
        crashed.add(replica)
        recover_at[replica] = until
        events.append(CrashEvent(replica))

    for i in range(ops):
        for replica in sorted(r for r, at in recover_at.items() if at == i and r in crashed):
            crashed.discard(replica)
            del recover_at[replica]
            events.append(RecoverEvent(replica))
        for window in crash_windows:
            if window.first_op == i:
                crash(ids[window.replica - 1], window.last_op + 1)
        if crash_probability and rng.random() < crash_probability:
            crash(rng.choice([r for r in ids if r not in crashed]), i + rng.randint(1, 10))

        live = [r for r in ids if r not in crashed]
        replica = rng.choice(live)
        events.append(OpEvent(replica, rng.choice(("add", "remove")), rng.choice(elements)))
        for _ in range(rng.randint(0, 2)):
            src = rng.choice(live)
            events.append(SendEvent(src, rng.choice([r for r in ids if r != src])))

    for replica in sorted(crashed):
        events.append(RecoverEvent(replica))
    events.append(QuiesceEvent())
    return ScenarioScript(tuple(ids), tuple(events), name=f"fuzz-{seed}")


def state_digest(state: CounterMap) -> str:
    return hashlib.sha256(crdt.serialize(state)).hexdigest()


def run_fuzz(
    replicas: int = 5,
    ops: int = 200,
    universe: int = 10,
    faults: FaultPolicy = RELIABLE,
    seed: int = DEFAULT_SEED,
    crash_probability: float = 0.0,
    crash_windows: Sequence[CrashWindow] = (),
) -> ConvergenceReport:
    script = generate_fuzz_script(replicas, ops, universe, seed, crash_probability, crash_windows)
    sim = Simulation(script.replicas, seed, faults)
    converged = True
    try:
        for event in script.events:
            sim.execute(event)
    except ConvergenceError as e:
        logger.error(f"fuzz seed {seed}: {e}")
        converged = False

    states = sim.states()
    serialized = {r: crdt.serialize(s) for r, s in states.items()}
    converged = converged and len(set(serialized.values())) == 1
    reference = crdt.merge_all(states.values())
    before = sim.snapshot or states
    checks = oracle_checks(sim, script.elements())

    report = ConvergenceReport(
        seed=seed,
        replicas=replicas,
        ops=ops,
        universe=universe,
        converged=converged,
        digest=state_digest(reference),
        converged_state=crdt.serialize(reference).decode("utf-8"),
        divergence={r: sum(1 for e, c in reference.items() if s.get(e) != c) for r, s in before.items()},
        distinct_states_before_quiesce=len({crdt.serialize(s) for s in before.values()}),
        oracle_agrees=all(c.agrees for c in checks),
        crashes=sim.crashes,
        quiesce_rounds=sim.quiesce_rounds,
        channel=sim.channel.stats,
        replica_dump=None if converged else {r: s.decode("utf-8") for r, s in serialized.items()},
    )
    logger.info(
        f"fuzz seed {seed}: {'converged' if converged else 'DIVERGED'} "
        f"digest {report.digest[:12]} after {sim.quiesce_rounds} rounds"
    )
    return report
