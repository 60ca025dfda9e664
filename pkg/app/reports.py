from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

from jinja2 import Environment, FileSystemLoader
from pydantic import BaseModel, ConfigDict, Field, computed_field
from pydantic.alias_generators import to_camel

TEMPLATES_DIR = Path(__file__).resolve().parent / "templates"


class ReportModel(BaseModel):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True)

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2) + "\n"


# --- law harness ------------------------------------------------------------

class Counterexample(ReportModel):
    states: List[str]  # canonical serializations, in the order the clause names them
    clause: str


class LawReport(ReportModel):
    law_name: str
    cases_checked: int = 0
    counterexamples: List[Counterexample] = Field(default_factory=list)
    skipped: int = 0
    notes: List[str] = Field(default_factory=list)

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return not self.counterexamples


class LawSuiteReport(ReportModel):
    seed: int
    elements: List[str]
    max_counter: int
    phase_depth: int
    reports: List[LawReport]
    self_test: Dict[str, bool] = Field(default_factory=dict)

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports) and all(self.self_test.values())


# --- simulator --------------------------------------------------------------

class ChannelStats(ReportModel):
    sent: int = 0
    dropped: int = 0
    duplicated: int = 0
    delivered: int = 0
    held: int = 0


class AssertionResult(ReportModel):
    line: int
    text: str
    passed: bool
    detail: str = ""


class OracleCheck(ReportModel):
    element: str
    chain_length: int
    oracle_member: bool
    converged_member: bool

    @computed_field  # type: ignore[misc]
    @property
    def agrees(self) -> bool:
        return self.oracle_member == self.converged_member


class ScenarioReport(ReportModel):
    name: str
    seed: int
    events: int
    assertions: List[AssertionResult] = Field(default_factory=list)
    oracle: List[OracleCheck] = Field(default_factory=list)
    final_states: Dict[str, str] = Field(default_factory=dict)
    quiesce_rounds: int = 0
    channel: ChannelStats = Field(default_factory=ChannelStats)

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions) and all(o.agrees for o in self.oracle)

    def failed_assertions(self) -> List[AssertionResult]:
        return [a for a in self.assertions if not a.passed]


class ConvergenceReport(ReportModel):
    seed: int
    replicas: int
    ops: int
    universe: int
    converged: bool
    digest: str
    converged_state: str
    divergence: Dict[str, int] = Field(default_factory=dict)
    distinct_states_before_quiesce: int = 0
    oracle_agrees: bool = True
    crashes: int = 0
    quiesce_rounds: int = 0
    channel: ChannelStats = Field(default_factory=ChannelStats)
    replica_dump: Optional[Dict[str, str]] = None

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return self.converged and self.oracle_agrees


class FuzzReport(ReportModel):
    runs: List[ConvergenceReport]

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.runs)


# --- memory -----------------------------------------------------------------

class MemoryRow(ReportModel):
    structure: str
    tokens: int
    members: int


class MemoryReport(ReportModel):
    elements: int
    alternations: int
    concurrent_adds: int
    rows: List[MemoryRow]
    unit: str = "metadata tokens (stored atoms: elements, counters, tags, timestamps)"

    def tokens(self, structure: str) -> int:
        return next(r.tokens for r in self.rows if r.structure == structure)


class SweepReport(ReportModel):
    elements: int
    points: List[MemoryReport]
    infinite_flat: bool
    orset_min_slope: float

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return self.infinite_flat and self.orset_min_slope >= 4


# --- rendering --------------------------------------------------------------

def _state_text(serialized: str) -> str:
    entries = [line.replace("\t", ":") for line in serialized.splitlines()]
    return "{" + ", ".join(entries) + "}"


_env = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
    autoescape=False,
)
_env.filters["state"] = _state_text

_TEMPLATES = {
    LawSuiteReport: "laws.txt.j2",
    ScenarioReport: "scenario.txt.j2",
    FuzzReport: "fuzz.txt.j2",
    MemoryReport: "memory.txt.j2",
    SweepReport: "sweep.txt.j2",
}


def render_text(report: ReportModel) -> str:
    template = _env.get_template(_TEMPLATES[type(report)])
    return template.render(report=report)


def render(report: ReportModel, output_format: str) -> str:
    if output_format == "json":
        return report.to_json()
    return render_text(report)
