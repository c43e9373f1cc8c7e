"""Command-line entry point: ``stmreg run|validate|oracle``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from ..core import EntityRef, StmRegError
from .oracle import brute_force_oracle
from .runner import ScenarioRuntimeError, ScriptAssertionError, run_scenario
from .scenario import bundled_scenarios, load_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stmreg",
        description="Run referring-expression scenarios against STM-buffered consultants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario script")
    run.add_argument("file", help="scenario file, or the name of a bundled scenario")
    run.add_argument("--mode", choices=["sd-pia", "dist-pia", "compare"], default="sd-pia")
    run.add_argument("--tau", type=float, help="override the scenario's tau")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--report", choices=["text", "json"], default="text")
    run.add_argument("--out", type=Path, help="write the report here instead of stdout")

    validate = sub.add_parser("validate", help="parse and validate a scenario file")
    validate.add_argument("file")

    oracle = sub.add_parser("oracle", help="list minimal discriminating property sets")
    oracle.add_argument("file")
    oracle.add_argument("--target", required=True, help="entity, e.g. objects_1")

    sub.add_parser("list", help="list bundled scenarios")
    return parser


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            print("\n".join(bundled_scenarios()))
            return 0
        scenario = load_scenario(args.file)
        if args.command == "validate":
            n_entities = sum(len(c.entities) for c in scenario.consultants)
            print(
                f"{scenario.name}: ok ({len(scenario.consultants)} consultant(s), "
                f"{n_entities} entities, {len(scenario.script)} command(s))"
            )
            return 0
        if args.command == "oracle":
            world = scenario.build()
            target = EntityRef.parse(args.target)
            sets = brute_force_oracle(target, world, scenario.config)
            if not sets:
                print(f"no discriminating property set exists for {target}")
            for s in sets:
                print("{" + ", ".join(sorted(str(p) for p in s)) + "}")
            return 0
        if args.tau is not None:
            scenario.config = replace(scenario.config, tau_dph=args.tau)
        report = run_scenario(scenario, args.mode, args.seed)
    except (ScriptAssertionError, ScenarioRuntimeError) as exc:
        if exc.report is not None:
            _emit(exc.report.to_json() if args.report == "json" else exc.report.to_text(), args.out)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StmRegError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(report.to_json() if args.report == "json" else report.to_text(), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
