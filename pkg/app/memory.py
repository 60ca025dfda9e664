"""
Metadata cost of each set CRDT under an alternating, concurrent workload.

For every element: k rounds, each round n replicas concurrently add the
element from the shared state and everything is merged; every round but the
last ends with one remove, merged everywhere. Sizes are in metadata tokens
(see baselines.metadata_tokens).
"""

from __future__ import annotations

import itertools
import logging
from typing import List, Sequence

from .baselines import LastWriterWinsSet, ObservedRemoveSet, TwoPhaseSet, metadata_tokens
from .crdt import InfinitePSet, StateCrdt
from .reports import MemoryReport, MemoryRow, SweepReport

logger = logging.getLogger("infpset.memory")

STRUCTURES: List[StateCrdt] = [InfinitePSet(), TwoPhaseSet(), ObservedRemoveSet(), LastWriterWinsSet()]
SWEEP_VALUES = (1, 2, 4, 8)


def replay_workload(impl: StateCrdt, elements: int, alternations: int, concurrent_adds: int):
    replicas = [f"r{i}" for i in range(1, concurrent_adds + 1)]
    shared = impl.initialize()
    for j in range(elements):
        element = f"e{j}"
        for round_ in range(alternations):
            branches = [impl.add(shared, element, r) for r in replicas]
            for branch in branches:
                shared = impl.merge(shared, branch)
            if round_ < alternations - 1:
                shared = impl.remove(shared, element, replicas[0])
    return shared


def memory_report(elements: int, alternations: int, concurrent_adds: int) -> MemoryReport:
    rows = []
    for impl in STRUCTURES:
        state = replay_workload(impl, elements, alternations, concurrent_adds)
        rows.append(MemoryRow(structure=impl.name, tokens=metadata_tokens(state), members=len(impl.query(state))))
    logger.debug(f"workload {elements}x{alternations}x{concurrent_adds}: " + ", ".join(f"{r.structure}={r.tokens}" for r in rows))
    return MemoryReport(elements=elements, alternations=alternations, concurrent_adds=concurrent_adds, rows=rows)


def sweep(elements: int = 1, values: Sequence[int] = SWEEP_VALUES) -> SweepReport:
    if elements < 1:
        raise ValueError("a sweep needs at least one element")
    points = [memory_report(elements, k, n) for k, n in itertools.product(values, values)]
    infinite_flat = all(p.tokens("infinite-p-set") == 2 * elements for p in points)

    slopes = []
    for k in values:
        row = sorted((p for p in points if p.alternations == k), key=lambda p: p.concurrent_adds)
        for low, high in zip(row, row[1:]):
            extra_adds = (high.concurrent_adds - low.concurrent_adds) * elements * k
            slopes.append((high.tokens("or-set") - low.tokens("or-set")) / extra_adds)

    report = SweepReport(
        elements=elements,
        points=points,
        infinite_flat=infinite_flat,
        orset_min_slope=min(slopes, default=0.0),
    )
    logger.info(f"memory sweep: infinite-p-set flat={infinite_flat}, or-set min slope {report.orset_min_slope:.2f} tokens/add")
    return report
