from __future__ import annotations

import os
import re
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

DEFAULT_SEED = int(os.getenv("INFPSET_SEED", "1729"))
LOG_LEVEL = os.getenv("INFPSET_LOG_LEVEL", "INFO")
# LUB brute force is cubic in the state count
LAWS_MAX_STATES = int(os.getenv("INFPSET_LAWS_MAX_STATES", "10000"))
SCENARIO_DIR = Path(os.getenv("INFPSET_SCENARIO_DIR", str(BASE_DIR / "scenarios")))

MAX_LAW_ELEMENTS = 3
MAX_LAW_COUNTER = 4
MAX_PHASE_DEPTH = 3

_WORKLOAD_RE = re.compile(r"^(\d+)x(\d+)x(\d+)$")


class FaultPolicy(BaseModel):
    p_drop: float = Field(0.0, ge=0.0, lt=1.0)
    duplicate_probability: float = Field(0.0, ge=0.0, le=1.0)
    max_reorder_delay: int = Field(0, ge=0)


RELIABLE = FaultPolicy()


def parse_workload(text: str) -> Tuple[int, int, int]:
    m = _WORKLOAD_RE.match(text.strip().lower())
    if not m:
        raise ValueError(f"workload must look like MxKxN (elements x alternations x concurrent adds), got {text!r}")
    return int(m.group(1)), int(m.group(2)), int(m.group(3))


class RunConfig(BaseModel):
    subcommand: Literal["run", "fuzz", "laws", "memory"]
    seed: int = Field(DEFAULT_SEED, ge=0)
    output_format: Literal["text", "json"] = "text"

    # run
    scenario: Optional[Path] = None

    # laws
    elements: int = Field(2, ge=1)
    max_counter: int = Field(3, ge=1)
    phase_depth: int = Field(2, ge=1, le=MAX_PHASE_DEPTH)
    histories: int = Field(500, ge=0)
    history_length: int = Field(12, ge=0)
    algebra_samples: int = Field(1000, ge=1)
    suites: List[str] = Field(default_factory=lambda: ["partial-order", "lub", "monotonicity", "phase-equivalence"])
    self_test: bool = False

    # fuzz
    replicas: int = 5
    ops: int = Field(200, ge=0)
    universe: int = Field(10, ge=1)
    faults: FaultPolicy = Field(default_factory=FaultPolicy)
    crash_probability: float = Field(0.0, ge=0.0, le=1.0)
    runs: int = Field(1, ge=1)
    dump_script: Optional[Path] = None

    # memory
    workload: Tuple[int, int, int] = (1, 1, 1)
    sweep: bool = False

    @field_validator("workload", mode="before")
    @classmethod
    def _workload(cls, v):
        if isinstance(v, str):
            return parse_workload(v)
        return v

    @field_validator("workload")
    @classmethod
    def _workload_bounds(cls, v: Tuple[int, int, int]) -> Tuple[int, int, int]:
        m, k, n = v
        if m < 0 or k < 1 or n < 1:
            raise ValueError("workload needs elements >= 0, alternations >= 1, concurrent adds >= 1")
        return v

    @model_validator(mode="after")
    def _preconditions(self) -> "RunConfig":
        if self.subcommand == "fuzz" and self.replicas < 2:
            raise ValueError("fuzz needs at least 2 replicas")
        if self.subcommand == "run" and self.scenario is None:
            raise ValueError("run needs --scenario")
        return self
