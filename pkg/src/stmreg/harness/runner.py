"""Execute scenario scripts and build reports."""

from __future__ import annotations

import difflib
import json
import operator
from dataclasses import dataclass, field
from typing import Any, Optional

from ..consultant import ConsultantSet, QueryCounter
from ..core import BoundProperty, EntityRef, StmRegError
from ..reg import RegResult, dist_pia, sd_pia
from ..resolver import resolve
from .scenario import ALGORITHMS, Command, Scenario

MODES = ("sd_pia", "dist_pia", "compare")
DESCRIBE_KINDS = ("describe", "describe-ambiguous")

_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


class ScriptAssertionError(StmRegError):
    def __init__(self, message: str, report: Optional[RunReport] = None):
        super().__init__(message)
        self.report = report


class ScenarioRuntimeError(StmRegError):
    def __init__(self, message: str, report: Optional[RunReport] = None):
        super().__init__(message)
        self.report = report


@dataclass
class CommandRecord:
    index: int
    line: int
    text: str
    kind: str
    counters: dict[str, dict[str, int]]
    output: dict[str, Any] = field(default_factory=dict)
    skipped: bool = False

    @property
    def ltm_queries(self) -> int:
        return sum(c["ltm_queries"] for c in self.counters.values())

    def to_dict(self) -> dict[str, Any]:
        d = {
            "index": self.index,
            "line": self.line,
            "command": self.text,
            "counters": self.counters,
            "output": self.output,
        }
        if self.skipped:
            d["skipped"] = True
        return d


@dataclass
class LegReport:
    algorithm: str
    commands: list[CommandRecord] = field(default_factory=list)
    totals: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "commands": [c.to_dict() for c in self.commands],
            "totals": self.totals,
        }


@dataclass
class RunReport:
    scenario: str
    mode: str
    seed: int
    tau: float
    legs: dict[str, LegReport] = field(default_factory=dict)
    comparison: Optional[dict[str, Any]] = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "scenario": self.scenario,
            "mode": self.mode,
            "seed": self.seed,
            "tau": self.tau,
            "legs": {name: leg.to_dict() for name, leg in self.legs.items()},
        }
        if self.comparison is not None:
            d["comparison"] = self.comparison
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        return render_text(self)


def run_scenario(scenario: Scenario, mode: str = "sd_pia", seed: int = 0) -> RunReport:
    """Run the script under one algorithm, or under both from identical
    initial state when ``mode`` is ``"compare"``."""
    mode = mode.replace("-", "_")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    report = RunReport(scenario.name, mode, seed, scenario.config.tau_dph)
    algorithms = ALGORITHMS if mode == "compare" else (mode,)
    for algorithm in algorithms:
        leg = LegReport(algorithm)
        report.legs[algorithm] = leg
        _run_leg(scenario, algorithm, leg, report)
    if mode == "compare":
        report.comparison = compare_legs(report.legs["sd_pia"], report.legs["dist_pia"])
    return report


def _run_leg(scenario: Scenario, algorithm: str, leg: LegReport, report: RunReport) -> None:
    world = scenario.build()
    start = world.counters()
    described: dict[EntityRef, tuple[BoundProperty, ...]] = {}
    previous: Optional[CommandRecord] = None
    for index, cmd in enumerate(scenario.script):
        before = world.counters()
        record = CommandRecord(index, cmd.line, cmd.text, cmd.kind, {})
        if cmd.only is not None and cmd.only != algorithm:
            record.skipped = True
        else:
            try:
                record.output = _execute(cmd, scenario, algorithm, world, described, previous)
            except ScriptAssertionError as exc:
                record.counters = _delta(world, before)
                leg.commands.append(record)
                leg.totals = _delta(world, start)
                exc.report = report
                raise ScriptAssertionError(
                    f"[{algorithm}] command {index} (line {cmd.line}) `{cmd.text}` failed:\n{exc}", report
                ) from None
            except StmRegError as exc:
                raise ScenarioRuntimeError(
                    f"[{algorithm}] command {index} (line {cmd.line}) `{cmd.text}`: {exc}", report
                ) from exc
        record.counters = _delta(world, before)
        leg.commands.append(record)
        if not cmd.kind.startswith("assert-") and not record.skipped:
            previous = record
    leg.totals = _delta(world, start)


def _delta(world: ConsultantSet, before: dict[str, QueryCounter]) -> dict[str, dict[str, int]]:
    now = world.counters()
    return {cid: (now[cid] - before[cid]).as_dict() for cid in now}


def _execute(
    cmd: Command,
    scenario: Scenario,
    algorithm: str,
    world: ConsultantSet,
    described: dict,
    previous: Optional[CommandRecord],
) -> dict[str, Any]:
    config = scenario.config
    if cmd.kind == "resolve":
        result = resolve(cmd.args[0], world, config, tau=scenario.tau_resolve)
        return {"candidates": [str(e) for e in result.candidates], "ambiguous": result.ambiguous}
    if cmd.kind == "describe":
        return _describe(cmd.args[0], scenario, algorithm, world, described)
    if cmd.kind == "describe-ambiguous":
        result = resolve(cmd.args[0], world, config, tau=scenario.tau_resolve)
        return {
            "candidates": [str(e) for e in result.candidates],
            "ambiguous": result.ambiguous,
            "descriptions": [_describe(e, scenario, algorithm, world, described) for e in result.candidates],
        }
    if cmd.kind == "tick":
        return {"now": world.clock.tick(cmd.args[0])}
    if cmd.kind == "impose":
        prop, p = cmd.args
        owner = world.owners(prop.predicate)[0]
        owner.impose(prop.formula, prop.bindings, p)
        return {"fact": str(prop), "probability": p}
    if cmd.kind == "assert-stm":
        entity, expected = cmd.args
        actual = world.consultant_of(entity).stm_contents(entity)
        _check_set(f"STM buffer of {entity}", expected, actual)
        return {"ok": True}
    if cmd.kind == "assert-description":
        entity, expected = cmd.args
        if entity not in described:
            raise ScriptAssertionError(f"{entity} has not been described yet")
        _check_set(f"sub-description of {entity}", expected, described[entity])
        return {"ok": True}
    if cmd.kind == "assert-ltm-queries":
        op, n = cmd.args
        if previous is None:
            raise ScriptAssertionError("no earlier command to count queries for")
        actual = previous.ltm_queries
        if not _OPS[op](actual, n):
            raise ScriptAssertionError(
                f"ltm_queries of `{previous.text}`: expected {op} {n}, got {actual}"
            )
        return {"ok": True, "ltm_queries": actual}
    raise StmRegError(f"unhandled command {cmd.kind}")


def _describe(target: EntityRef, scenario: Scenario, algorithm: str, world: ConsultantSet, described: dict):
    run = sd_pia if algorithm == "sd_pia" else dist_pia
    result: RegResult = run(target, world, scenario.config)
    described.update(result.description)
    tau = scenario.config.tau_dph
    stale = [
        str(p)
        for entity, sub in result.description.items()
        for p in sub
        if not world.lookup(entity, p.formula, p.bindings) > tau
    ]
    return {
        "target": str(target),
        "description": {str(e): [str(p) for p in sub] for e, sub in result.description.items()},
        "unresolved": {str(e): sorted(str(x) for x in xs) for e, xs in result.unresolved_distractors.items()},
        "stm_h_calls": len(result.description) if algorithm == "sd_pia" and scenario.config.stm_enabled else 0,
        "stale": stale,
        "trace": [str(ev) for ev in result.trace],
    }


def _check_set(what: str, expected, actual) -> None:
    exp = sorted(str(p) for p in expected)
    act = sorted(str(p) for p in actual)
    if exp != act:
        diff = "\n".join(
            difflib.unified_diff(exp, act, fromfile="expected", tofile="actual", lineterm="")
        )
        raise ScriptAssertionError(f"{what} differs:\n{diff}")


def _describe_outputs(record: CommandRecord) -> list[dict[str, Any]]:
    if record.kind == "describe":
        return [record.output]
    if record.kind == "describe-ambiguous":
        return list(record.output.get("descriptions", []))
    return []


def compare_legs(sd: LegReport, dist: LegReport) -> dict[str, Any]:
    rows = []
    divergences = []
    sd_total = dist_total = 0
    fetches = stm_h_calls = 0
    for a, b in zip(sd.commands, dist.commands):
        if a.kind not in DESCRIBE_KINDS or a.skipped or b.skipped:
            continue
        sd_total += a.ltm_queries
        dist_total += b.ltm_queries
        fetches += sum(c["stm_fetches"] for c in a.counters.values())
        rows.append(
            {
                "index": a.index,
                "command": a.text,
                "sd_pia_ltm_queries": a.ltm_queries,
                "dist_pia_ltm_queries": b.ltm_queries,
                "saved": b.ltm_queries - a.ltm_queries,
            }
        )
        for da, db in zip(_describe_outputs(a), _describe_outputs(b)):
            stm_h_calls += da["stm_h_calls"]
            for entity in sorted(set(da["description"]) | set(db["description"])):
                left = da["description"].get(entity)
                right = db["description"].get(entity)
                if left is None or right is None or sorted(left) != sorted(right):
                    divergences.append(
                        {
                            "index": a.index,
                            "target": da["target"],
                            "entity": entity,
                            "sd_pia": left,
                            "dist_pia": right,
                            "stale_in_sd_pia": [p for p in da["stale"] if left and p in left],
                        }
                    )
    return {
        "note": "query counts measured by this harness on this scenario; no published figures exist to compare against",
        "describe_commands": rows,
        "describe_ltm_queries": {"sd_pia": sd_total, "dist_pia": dist_total, "saved": dist_total - sd_total},
        "sd_pia_stm_fetches": fetches,
        "sd_pia_stm_h_calls": stm_h_calls,
        "divergences": divergences,
    }


def _fmt_counters(counters: dict[str, dict[str, int]]) -> str:
    parts = []
    for cid, c in counters.items():
        parts.append(
            f"{cid}: ltm={c['ltm_queries']} hits={c['stm_hits']} misses={c['stm_misses']} fetches={c['stm_fetches']}"
        )
    return "; ".join(parts)


def render_text(report: RunReport) -> str:
    out = [
        f"scenario: {report.scenario}",
        f"mode: {report.mode}",
        f"seed: {report.seed}",
        f"tau: {report.tau}",
    ]
    for name, leg in report.legs.items():
        out.append("")
        out.append(f"== {name} ==")
        for rec in leg.commands:
            out.append(f"[{rec.index}] line {rec.line}: {rec.text}" + ("  (skipped)" if rec.skipped else ""))
            if rec.skipped:
                continue
            o = rec.output
            if "candidates" in o:
                amb = " (ambiguous)" if o["ambiguous"] else ""
                out.append(f"    candidates: {{{', '.join(o['candidates'])}}}{amb}")
            for d in _describe_outputs(rec):
                out.append(f"    describe {d['target']}:")
                for entity, props in d["description"].items():
                    out.append(f"      {entity} -> {{{', '.join(props)}}}")
                for entity, xs in d["unresolved"].items():
                    if xs:
                        out.append(f"      unresolved for {entity}: {{{', '.join(xs)}}}")
                if d["stale"]:
                    out.append(f"      STALE (fact no longer holds): {', '.join(d['stale'])}")
                for line in d["trace"]:
                    out.append(f"      {line}")
            if rec.kind == "tick":
                out.append(f"    now = {o['now']}")
            if rec.kind == "impose":
                out.append(f"    {o['fact']} := {o['probability']}")
            if rec.kind.startswith("assert-"):
                out.append("    ok")
            out.append(f"    queries: {_fmt_counters(rec.counters)}")
        out.append(f"totals: {_fmt_counters(leg.totals)}")
    if report.comparison is not None:
        cmp = report.comparison
        out.append("")
        out.append("== comparison ==")
        out.append(f"note: {cmp['note']}")
        for row in cmp["describe_commands"]:
            out.append(
                f"[{row['index']}] {row['command']}: sd_pia ltm={row['sd_pia_ltm_queries']}"
                f" dist_pia ltm={row['dist_pia_ltm_queries']} saved={row['saved']}"
            )
        t = cmp["describe_ltm_queries"]
        out.append(f"describe totals: sd_pia ltm={t['sd_pia']} dist_pia ltm={t['dist_pia']} saved={t['saved']}")
        out.append(f"sd_pia STM fetches: {cmp['sd_pia_stm_fetches']} over {cmp['sd_pia_stm_h_calls']} STM-H calls")
        if cmp["divergences"]:
            for dv in cmp["divergences"]:
                flag = "  <- uses stale " + ", ".join(dv["stale_in_sd_pia"]) if dv["stale_in_sd_pia"] else ""
                out.append(
                    f"DIVERGENCE [{dv['index']}] {dv['entity']}: sd_pia {{{', '.join(dv['sd_pia'] or [])}}}"
                    f" vs dist_pia {{{', '.join(dv['dist_pia'] or [])}}}{flag}"
                )
        else:
            out.append("descriptions agree")
    return "\n".join(out) + "\n"
