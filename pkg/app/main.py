from __future__ import annotations

import argparse
import logging
import random
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from .config import DEFAULT_SEED, LOG_LEVEL, SCENARIO_DIR, FaultPolicy, RunConfig
from .laws import SUITES, StateSpace, StateSpaceTooLargeError, run_self_tests, run_suite
from .memory import memory_report, sweep
from .netsim import generate_fuzz_script, run_fuzz, run_scenario
from .reports import FuzzReport, LawSuiteReport, render
from .scenario import ScenarioParseError, load_scenario

logger = logging.getLogger("infpset")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _configure_logging(verbose: bool) -> None:
    if not logger.handlers and not logging.getLogger().handlers:
        logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(message)s")
    if verbose:
        logger.setLevel(logging.DEBUG)


def _refuse(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _emit(config: RunConfig, report) -> None:
    sys.stdout.write(render(report, config.output_format))


def _resolve_scenario(path: Path) -> Path:
    # bare names are looked up in the scenario directory
    if not path.exists() and not path.is_absolute() and len(path.parts) == 1:
        candidate = SCENARIO_DIR / path
        for option in (candidate, candidate.with_suffix(".txt")):
            if option.exists():
                return option
    return path


def cmd_run(config: RunConfig) -> int:
    path = _resolve_scenario(config.scenario)
    try:
        script = load_scenario(path)
    except FileNotFoundError:
        return _refuse(f"scenario file not found: {path}")
    except ScenarioParseError as e:
        return _refuse(f"{path}: {e}")
    report = run_scenario(script, config.seed, config.faults)
    _emit(config, report)
    for failed in report.failed_assertions():
        print(f"assertion failed at line {failed.line}: {failed.text} ({failed.detail})", file=sys.stderr)
    for check in report.oracle:
        if not check.agrees:
            print(f"oracle disagrees on {check.element}: chain length {check.chain_length}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_fuzz(config: RunConfig) -> int:
    runs = []
    for seed in range(config.seed, config.seed + config.runs):
        runs.append(
            run_fuzz(
                replicas=config.replicas,
                ops=config.ops,
                universe=config.universe,
                faults=config.faults,
                seed=seed,
                crash_probability=config.crash_probability,
            )
        )
        if config.dump_script is not None:
            target = config.dump_script if config.runs == 1 else config.dump_script.with_stem(f"{config.dump_script.stem}-{seed}")
            script = generate_fuzz_script(config.replicas, config.ops, config.universe, seed, config.crash_probability)
            target.write_text(script.to_text(), encoding="utf-8")
            logger.info(f"wrote fuzz script for seed {seed} to {target}")
    report = FuzzReport(runs=runs)
    _emit(config, report)
    for run in report.runs:
        if not run.passed:
            print(f"seed {run.seed}: replicas did not converge or disagree with the oracle", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_laws(config: RunConfig) -> int:
    unknown = [s for s in config.suites if s not in SUITES]
    if unknown:
        return _refuse(f"unknown law suite(s) {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    try:
        space = StateSpace.of(config.elements, config.max_counter)
        space.require_enumerable()
    except StateSpaceTooLargeError as e:
        return _refuse(str(e))

    reports = []
    for suite in config.suites:
        logger.info(f"law suite {suite} over {space.size} states")
        reports.extend(
            run_suite(
                suite,
                space,
                depth=config.phase_depth,
                seed=config.seed,
                histories=config.histories,
                history_length=config.history_length,
                algebra_samples=config.algebra_samples,
            )
        )
    self_test = run_self_tests(space, depth=config.phase_depth, seed=config.seed, histories=config.histories) if config.self_test else {}
    report = LawSuiteReport(
        seed=config.seed,
        elements=list(space.elements),
        max_counter=space.max_counter,
        phase_depth=config.phase_depth,
        reports=reports,
        self_test=self_test,
    )
    _emit(config, report)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_memory(config: RunConfig) -> int:
    m, k, n = config.workload
    if config.sweep:
        try:
            report = sweep(max(m, 1))
        except ValueError as e:
            return _refuse(str(e))
        _emit(config, report)
        return EXIT_OK if report.passed else EXIT_FAILED
    _emit(config, memory_report(m, k, n))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "fuzz": cmd_fuzz, "laws": cmd_laws, "memory": cmd_memory}


def _add_fault_flags(parser: argparse.ArgumentParser, p_drop: float, duplicate: float, reorder: int) -> None:
    parser.add_argument("--p-drop", type=float, default=p_drop, help="probability a message copy is dropped")
    parser.add_argument("--duplicate-probability", type=float, default=duplicate, help="probability a message is sent twice")
    parser.add_argument("--max-reorder-delay", type=int, default=reorder, help="extra delivery delay in ticks, drawn uniformly")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for every random draw")
    common.add_argument("--random-seed", action="store_true", help="draw the seed from the OS and report it")
    common.add_argument("--format", dest="output_format", choices=["text", "json"], default="text")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(
        prog="infpset",
        description="∞P-Set CRDT: scripted scenarios, convergence fuzzing, lattice laws and memory comparison.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run = sub.add_parser("run", parents=[common], help="execute a scenario script")
    run.add_argument("--scenario", type=Path, required=True, help="scenario file, or a name under the scenario directory")
    _add_fault_flags(run, 0.0, 0.0, 0)

    fuzz = sub.add_parser("fuzz", parents=[common], help="random ops over a faulty channel, then check convergence")
    fuzz.add_argument("--replicas", type=int, default=5)
    fuzz.add_argument("--ops", type=int, default=200)
    fuzz.add_argument("--universe", type=int, default=10, help="number of distinct elements")
    fuzz.add_argument("--crash-probability", type=float, default=0.0, help="chance per op of crashing a live replica")
    fuzz.add_argument("--runs", type=int, default=1, help="repeat with seeds seed..seed+runs-1")
    fuzz.add_argument("--dump-script", type=Path, help="write the generated script for replay with `run`")
    _add_fault_flags(fuzz, 0.3, 0.2, 10)

    laws = sub.add_parser("laws", parents=[common], help="check the lattice laws over a finite state window")
    laws.add_argument("--elements", type=int, default=2)
    laws.add_argument("--max-counter", type=int, default=3)
    laws.add_argument("--phase-depth", type=int, default=2)
    laws.add_argument("--histories", type=int, default=500)
    laws.add_argument("--history-length", type=int, default=12)
    laws.add_argument("--algebra-samples", type=int, default=1000)
    laws.add_argument("--suites", type=lambda s: [x.strip() for x in s.split(",") if x.strip()], help=f"comma-separated, from {', '.join(SUITES)}")
    laws.add_argument("--self-test", action="store_true", help="also check that each injected mutation is detected")

    memory = sub.add_parser("memory", parents=[common], help="compare metadata size across set CRDTs")
    memory.add_argument("--workload", help="MxKxN: elements x alternations x concurrent adds")
    memory.add_argument("--elements", type=int, default=1)
    memory.add_argument("--alternations", type=int, default=1)
    memory.add_argument("--concurrent-adds", type=int, default=1)
    memory.add_argument("--sweep", action="store_true", help="alternations and concurrent adds over 1, 2, 4, 8")
    return parser


def _to_config(args: argparse.Namespace) -> RunConfig:
    fields = {k: v for k, v in vars(args).items() if v is not None}
    fields.pop("verbose", None)
    fields.pop("random_seed", None)
    if args.random_seed:
        fields["seed"] = random.SystemRandom().randrange(2**32)
        logger.info(f"random seed {fields['seed']}")
    if {"p_drop", "duplicate_probability", "max_reorder_delay"} <= fields.keys():
        fields["faults"] = FaultPolicy(
            p_drop=fields.pop("p_drop"),
            duplicate_probability=fields.pop("duplicate_probability"),
            max_reorder_delay=fields.pop("max_reorder_delay"),
        )
    if args.subcommand == "memory":
        workload = fields.pop("workload", None)
        counts = (fields.pop("elements"), fields.pop("alternations"), fields.pop("concurrent_adds"))
        fields["workload"] = workload if workload is not None else counts
    return RunConfig(**fields)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _configure_logging(args.verbose)
    try:
        config = _to_config(args)
    except (ValidationError, ValueError) as e:
        errors = e.errors() if isinstance(e, ValidationError) else [{"msg": str(e)}]
        return _refuse("; ".join(err["msg"] for err in errors))
    return COMMANDS[config.subcommand](config)


if __name__ == "__main__":
    sys.exit(main())
