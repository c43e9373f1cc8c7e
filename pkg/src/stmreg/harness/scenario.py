"""Scenario files: a small sectioned text format describing a world and a script.

Example::

    [types]
    object

    [config]
    tau = 0.5

    [categories]
    type = teabox box table
    color = red green

    [consultant objects]
    type = object
    entities = 1 2 3
    catalog = teabox(X) table(X) box(X) red(X) green(X) on(X,Y)

    [buffer]
    policy = capacity_fifo
    capacity = 7

    [facts]
    teabox(objects_1) = 1.0
    on(objects_1, objects_3) = 1

    [script]
    resolve box(X)
    describe-ambiguous box(X)

See README.md for the full grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from ..buffer import BufferConfig, Clock
from ..consultant import Consultant, ConsultantSet
from ..core import Bindings, BoundProperty, EntityRef, Formula, StmRegError, parse_term
from ..reg import RegConfig
from ..resolver import ResolutionQuery

_SECTION_RE = re.compile(r"^\[\s*([a-z]+)(?:\s+([A-Za-z][A-Za-z0-9]*))?\s*\]$")
_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\s*\([^()]*\)|\S+")

COMMANDS = (
    "resolve",
    "describe",
    "describe-ambiguous",
    "tick",
    "impose",
    "assert-stm",
    "assert-description",
    "assert-ltm-queries",
)
ALGORITHMS = ("sd_pia", "dist_pia")
COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")


class ScenarioError(StmRegError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "<scenario>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass
class ConsultantSpec:
    id: str
    line: int
    default_type: Optional[str] = None
    entities: list[int] = field(default_factory=list)
    entity_types: dict[int, str] = field(default_factory=dict)
    catalog: list[Formula] = field(default_factory=list)
    catalog_text: str = ""


@dataclass(frozen=True)
class Command:
    kind: str
    args: tuple
    text: str
    line: int
    only: Optional[str] = None  # restrict to one algorithm


@dataclass
class Scenario:
    name: str
    source: str
    types: tuple[str, ...]
    consultants: list[ConsultantSpec]
    categories: dict[str, str]
    facts: list[tuple[BoundProperty, float]]
    buffer_configs: dict[str, BufferConfig]
    config: RegConfig
    tau_resolve: Optional[float]
    script: list[Command]

    def build(self) -> ConsultantSet:
        """A fresh world in its initial state (empty buffers, clock at 0)."""
        clock = Clock()
        consultants = []
        for spec in self.consultants:
            facts = {}
            for prop, p in self.facts:
                if any(f.predicate == prop.predicate for f in spec.catalog):
                    facts[prop] = p
            consultants.append(
                Consultant(
                    spec.id,
                    spec.entities,
                    spec.catalog,
                    facts,
                    self.buffer_configs[spec.id],
                    default_type=spec.default_type,
                    entity_types=spec.entity_types,
                    categories=self.categories,
                    clock=clock,
                )
            )
        return ConsultantSet(consultants, clock)


def bundled_scenarios() -> list[str]:
    pkg = resources.files("stmreg") / "scenarios"
    return sorted(p.name[: -len(".scn")] for p in pkg.iterdir() if p.name.endswith(".scn"))


def bundled_path(name: str) -> Path:
    path = resources.files("stmreg") / "scenarios" / f"{name}.scn"
    if not path.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}; have {bundled_scenarios()}")
    return Path(str(path))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load and validate a scenario file; a bare name selects a bundled scenario."""
    p = Path(path)
    if not p.exists() and not p.suffix and "/" not in str(path):
        p = bundled_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", source=str(path)) from None
    name = p.stem
    return parse_scenario(text, name=name, source=str(path))


def parse_scenario(text: str, name: str = "scenario", source: str = "<scenario>") -> Scenario:
    return _Parser(text, name, source).parse()


def tokenize(text: str) -> list[str]:
    return [t.replace(" ", "") if "(" in t else t for t in _TOKEN_RE.findall(text)]


class _Parser:
    def __init__(self, text: str, name: str, source: str):
        self.lines = text.splitlines()
        self.name = name
        self.source = source
        self.types: Optional[list[str]] = None
        self.types_line: Optional[int] = None
        self.consultants: dict[str, ConsultantSpec] = {}
        self.categories: dict[str, str] = {}
        self.config: dict[str, tuple[str, int]] = {}
        self.buffers: dict[Optional[str], dict[str, tuple[str, int]]] = {}
        self.buffer_lines: dict[Optional[str], int] = {}
        self.raw_facts: list[tuple[str, int]] = []
        self.raw_script: list[tuple[str, int]] = []

    def fail(self, message: str, line: Optional[int] = None) -> ScenarioError:
        return ScenarioError(message, line, self.source)

    # pass 1: sections and raw lines
    def parse(self) -> Scenario:
        section: Optional[tuple[str, Optional[str]]] = None
        for lineno, raw in enumerate(self.lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = _SECTION_RE.match(line)
            if m:
                section = self._open_section(m.group(1), m.group(2), lineno)
                continue
            if section is None:
                raise self.fail(f"content outside any section: {line!r}", lineno)
            self._section_line(section, line, lineno)
        return self._build()

    def _open_section(self, kind: str, arg: Optional[str], lineno: int):
        if kind == "consultant":
            if arg is None:
                raise self.fail("[consultant] needs an id", lineno)
            if arg in self.consultants:
                raise self.fail(f"consultant {arg!r} declared twice", lineno)
            self.consultants[arg] = ConsultantSpec(arg, lineno)
        elif kind == "buffer":
            if arg in self.buffers:
                raise self.fail(f"duplicate [buffer{' ' + arg if arg else ''}] section", lineno)
            self.buffers[arg] = {}
            self.buffer_lines[arg] = lineno
        elif kind in ("types", "config", "categories", "facts", "script"):
            if arg is not None:
                raise self.fail(f"[{kind}] takes no argument", lineno)
            if kind == "types":
                self.types_line = lineno
                self.types = self.types or []
        else:
            raise self.fail(f"unknown section [{kind}]", lineno)
        return (kind, arg)

    def _section_line(self, section, line: str, lineno: int) -> None:
        kind, arg = section
        if kind == "types":
            self.types.extend(line.split())
        elif kind == "facts":
            self.raw_facts.append((line, lineno))
        elif kind == "script":
            self.raw_script.append((line, lineno))
        else:
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise self.fail(f"expected 'key = value', got {line!r}", lineno)
            if kind == "config":
                self.config[key] = (value, lineno)
            elif kind == "categories":
                for pred in value.split():
                    if pred in self.categories:
                        raise self.fail(f"predicate {pred!r} placed in two categories", lineno)
                    self.categories[pred] = key
            elif kind == "buffer":
                self.buffers[arg][key] = (value, lineno)
            elif kind == "consultant":
                self._consultant_field(self.consultants[arg], key, value, lineno)

    def _consultant_field(self, spec: ConsultantSpec, key: str, value: str, lineno: int) -> None:
        if key == "type":
            spec.default_type = value
        elif key == "entities":
            try:
                spec.entities = [int(tok) for tok in value.split()]
            except ValueError:
                raise self.fail(f"entities must be non-negative integers: {value!r}", lineno) from None
            if any(i < 0 for i in spec.entities) or len(set(spec.entities)) != len(spec.entities):
                raise self.fail(f"entities must be distinct non-negative integers: {value!r}", lineno)
        elif key == "types":
            for tok in value.split():
                idx, sep, typ = tok.partition(":")
                if not sep or not idx.isdigit() or not typ:
                    raise self.fail(f"entity type must look like '3:location', got {tok!r}", lineno)
                spec.entity_types[int(idx)] = typ
        elif key == "catalog":
            spec.catalog_text = value
            spec.line = lineno
        else:
            raise self.fail(f"unknown consultant field {key!r}", lineno)

    # pass 2: validation and typed objects
    def _build(self) -> Scenario:
        if not self.consultants:
            raise self.fail("scenario declares no consultants")
        for spec in self.consultants.values():
            default = spec.default_type or spec.id
            spec.default_type = default
            seen = set()
            for tok in tokenize(spec.catalog_text):
                try:
                    formula = Formula.parse(tok, default)
                except ValueError as exc:
                    raise self.fail(str(exc), spec.line) from None
                if (formula.predicate, formula.arity) in seen:
                    raise self.fail(f"duplicate catalog entry {formula} in {spec.id}", spec.line)
                seen.add((formula.predicate, formula.arity))
                spec.catalog.append(formula)
            for idx in spec.entity_types:
                if idx not in spec.entities:
                    raise self.fail(f"type given for undeclared entity {spec.id}_{idx}", spec.line)
        self._check_types()
        self.entities = {
            EntityRef(s.id, i): (s.entity_types.get(i, s.default_type)) for s in self.consultants.values() for i in s.entities
        }
        for pred in self.categories:
            if not self._advertised(pred):
                raise self.fail(f"category declared for unknown predicate {pred!r}")
        config, tau_resolve = self._config()
        buffers = self._buffers()
        facts = [self._fact(line, lineno) for line, lineno in self.raw_facts]
        script = [self._command(line, lineno) for line, lineno in self.raw_script]
        return Scenario(
            name=self.name,
            source=self.source,
            types=tuple(self.types_alphabet),
            consultants=list(self.consultants.values()),
            categories=dict(self.categories),
            facts=facts,
            buffer_configs=buffers,
            config=config,
            tau_resolve=tau_resolve,
            script=script,
        )

    def _advertised(self, predicate: str) -> bool:
        return any(f.predicate == predicate for s in self.consultants.values() for f in s.catalog)

    def _check_types(self) -> None:
        used = {}
        for spec in self.consultants.values():
            used.setdefault(spec.default_type, spec.line)
            for typ in spec.entity_types.values():
                used.setdefault(typ, spec.line)
            for f in spec.catalog:
                for _, typ in f.variables:
                    used.setdefault(typ, spec.line)
        if self.types is None:
            self.types_alphabet = sorted(used)
            return
        for typ, lineno in used.items():
            if typ not in self.types:
                raise self.fail(f"type {typ!r} is not declared in [types]", lineno)
        self.types_alphabet = list(dict.fromkeys(self.types))

    def _config(self) -> tuple[RegConfig, Optional[float]]:
        known = {"tau", "tau_resolve", "populate_stm", "populate_distractors"}
        for key, (_, lineno) in self.config.items():
            if key not in known:
                raise self.fail(f"unknown config key {key!r}", lineno)
        kwargs = {}
        if "tau" in self.config:
            kwargs["tau_dph"] = self._float(*self.config["tau"])
        for flag in ("populate_stm", "populate_distractors"):
            if flag in self.config:
                kwargs[flag] = self._bool(*self.config[flag])
        try:
            config = RegConfig(**kwargs)
        except ValueError as exc:
            raise self.fail(str(exc), self.config.get("tau", ("", None))[1]) from None
        tau_resolve = None
        if "tau_resolve" in self.config:
            tau_resolve = self._float(*self.config["tau_resolve"])
            if not 0.0 < tau_resolve < 1.0:
                raise self.fail("tau_resolve must lie strictly between 0 and 1", self.config["tau_resolve"][1])
        return config, tau_resolve

    def _buffers(self) -> dict[str, BufferConfig]:
        for cid, lineno in self.buffer_lines.items():
            if cid is not None and cid not in self.consultants:
                raise self.fail(f"[buffer {cid}] names an undeclared consultant", lineno)
        default = self.buffers.get(None, {})
        out = {}
        for cid in self.consultants:
            fields = dict(default)
            fields.update(self.buffers.get(cid, {}))
            out[cid] = self._buffer_config(fields, self.buffer_lines.get(cid, self.buffer_lines.get(None)))
        return out

    def _buffer_config(self, fields: dict[str, tuple[str, int]], lineno: Optional[int]) -> BufferConfig:
        kwargs: dict = {}
        overrides = {}
        for key, (value, line) in fields.items():
            if key == "policy":
                kwargs["policy"] = value
            elif key == "scope":
                kwargs["scope"] = value
            elif key == "capacity":
                kwargs["capacity"] = self._int(value, line)
            elif key == "ttl":
                kwargs["ttl_ticks"] = self._int(value, line)
            elif key.startswith("ttl."):
                overrides[key[4:]] = self._int(value, line)
            else:
                raise self.fail(f"unknown buffer field {key!r}", line)
        policy = kwargs.get("policy", "capacity_fifo")
        if policy == "decay" and "capacity" in fields:
            raise self.fail("decay policy takes 'ttl', not 'capacity'", fields["capacity"][1])
        if policy != "decay" and ("ttl" in fields or overrides):
            key = "ttl" if "ttl" in fields else next(k for k in fields if k.startswith("ttl."))
            raise self.fail(f"policy {policy} takes 'capacity', not ttl settings", fields[key][1])
        if policy == "decay":
            kwargs["capacity"] = None
        for pred in overrides:
            if not self._advertised(pred):
                raise self.fail(f"ttl override for unknown predicate {pred!r}", fields[f"ttl.{pred}"][1])
        try:
            return BufferConfig(ttl_overrides=overrides, **kwargs)
        except ValueError as exc:
            raise self.fail(str(exc), lineno) from None

    def _fact(self, line: str, lineno: int) -> tuple[BoundProperty, float]:
        term, sep, value = line.rpartition("=")
        if not sep:
            raise self.fail(f"fact must look like 'pred(entity, ...) = p', got {line!r}", lineno)
        prop = self.ground(term.strip(), lineno, unique_owner=True)
        p = self._float(value.strip(), lineno)
        if not 0.0 <= p <= 1.0:
            raise self.fail(f"probability out of [0, 1]: {p}", lineno)
        return prop, p

    def ground(self, text: str, lineno: int, unique_owner: bool = False) -> BoundProperty:
        try:
            predicate, args = parse_term(text)
        except ValueError as exc:
            raise self.fail(str(exc), lineno) from None
        owners = [s for s in self.consultants.values() if any(f.predicate == predicate for f in s.catalog)]
        if not owners:
            raise self.fail(f"predicate {predicate!r} is owned by no consultant", lineno)
        if unique_owner and len(owners) > 1:
            raise self.fail(
                f"predicate {predicate!r} is advertised by {', '.join(s.id for s in owners)}; facts need one owner",
                lineno,
            )
        formula = next(f for f in owners[0].catalog if f.predicate == predicate)
        if len(args) != formula.arity:
            raise self.fail(f"{predicate} takes {formula.arity} argument(s), got {len(args)}", lineno)
        entities = [self.entity(a, lineno) for a in args]
        return BoundProperty(formula, Bindings(zip(formula.names, entities)))

    def entity(self, text: str, lineno: int) -> EntityRef:
        try:
            ref = EntityRef.parse(text)
        except ValueError:
            raise self.fail(f"not an entity reference: {text!r}", lineno) from None
        if ref not in self.entities:
            raise self.fail(f"undeclared entity {ref}", lineno)
        return ref

    def query(self, tokens: list[str], lineno: int) -> ResolutionQuery:
        if not tokens:
            raise self.fail("query needs at least one property", lineno)
        props = []
        var = None
        for tok in tokens:
            try:
                predicate, args = parse_term(tok)
            except ValueError as exc:
                raise self.fail(str(exc), lineno) from None
            owners = [s for s in self.consultants.values() if any(f.predicate == predicate for f in s.catalog)]
            if not owners:
                raise self.fail(f"predicate {predicate!r} is owned by no consultant", lineno)
            formula = next(f for f in owners[0].catalog if f.predicate == predicate)
            if formula.arity != 1 or len(args) != 1:
                raise self.fail(f"only unary properties can be resolved, got {tok}", lineno)
            if EntityRef.looks_like(args[0]):
                raise self.fail(f"query variable expected in {tok}", lineno)
            var = var or args[0]
            if args[0] != var:
                raise self.fail(f"all query properties must share one variable ({var}), got {tok}", lineno)
            props.append((Formula(predicate, ((var, formula.variables[0][1]),)), Bindings()))
        return ResolutionQuery(var, tuple(props))

    def _command(self, line: str, lineno: int) -> Command:
        tokens = tokenize(line)
        only = None
        if tokens[0].startswith("@"):
            only = tokens[0][1:].replace("-", "_")
            if only not in ALGORITHMS:
                raise self.fail(f"unknown algorithm guard {tokens[0]!r}", lineno)
            tokens = tokens[1:]
            if not tokens:
                raise self.fail("guard without a command", lineno)
        kind, rest = tokens[0], tokens[1:]
        if kind not in COMMANDS:
            raise self.fail(f"unknown command {kind!r}; expected one of {', '.join(COMMANDS)}", lineno)
        text = " ".join(tokens)

        def need(n: int) -> None:
            if len(rest) != n:
                raise self.fail(f"{kind} takes {n} argument(s), got {len(rest)}", lineno)

        if kind in ("resolve", "describe-ambiguous"):
            args = (self.query(rest, lineno),)
        elif kind == "describe":
            need(1)
            args = (self.entity(rest[0], lineno),)
        elif kind == "tick":
            need(1)
            n = self._int(rest[0], lineno)
            if n < 0:
                raise self.fail("tick count must be non-negative", lineno)
            args = (n,)
        elif kind == "impose":
            need(2)
            p = self._float(rest[1], lineno)
            if not 0.0 <= p <= 1.0:
                raise self.fail(f"probability out of [0, 1]: {p}", lineno)
            args = (self.ground(rest[0], lineno, unique_owner=True), p)
        elif kind in ("assert-stm", "assert-description"):
            if not rest:
                raise self.fail(f"{kind} needs an entity", lineno)
            props = [] if rest[1:] == ["-"] else [self.ground(t, lineno) for t in rest[1:]]
            args = (self.entity(rest[0], lineno), tuple(props))
        else:  # assert-ltm-queries
            need(2)
            if rest[0] not in COMPARISONS:
                raise self.fail(f"comparison must be one of {COMPARISONS}, got {rest[0]!r}", lineno)
            args = (rest[0], self._int(rest[1], lineno))
        return Command(kind, args, text, lineno, only)

    def _float(self, value: str, lineno: int) -> float:
        try:
            return float(value)
        except ValueError:
            raise self.fail(f"expected a number, got {value!r}", lineno) from None

    def _int(self, value: str, lineno: int) -> int:
        try:
            return int(value)
        except ValueError:
            raise self.fail(f"expected an integer, got {value!r}", lineno) from None

    def _bool(self, value: str, lineno: int) -> bool:
        if value.lower() in ("true", "yes", "1", "on"):
            return True
        if value.lower() in ("false", "no", "0", "off"):
            return False
        raise self.fail(f"expected true/false, got {value!r}", lineno)
