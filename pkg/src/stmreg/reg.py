"""STM-augmented distributed probabilistic incremental algorithm for REG.

``sd_pia`` describes a target by first reusing properties cached in its STM
buffer (``sd_pia_stm_h``), then falling back to the consultant's full
preference-ordered catalog (``sd_pia_h``) for whatever distractors remain.
``dist_pia`` is the same loop with the cache switched off and serves as the
query-count baseline.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Optional

from .consultant import ConsultantSet, QueryCounter
from .core import (
    Bindings,
    BoundProperty,
    Description,
    EntityRef,
    Formula,
    find_unbound,
    involved_entities,
    rebind,
)


@dataclass(frozen=True)
class RegConfig:
    tau_dph: float = 0.5
    stm_enabled: bool = True
    # cache properties confirmed for the target while the helper runs
    populate_stm: bool = True
    # also cache properties found to hold for distractors (off: see README)
    populate_distractors: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.tau_dph < 1.0:
            raise ValueError(f"tau_dph must lie strictly between 0 and 1, got {self.tau_dph}")


@dataclass(frozen=True)
class TraceEvent:
    entity: EntityRef
    phase: str  # "stm-h" or "helper"
    prop: str
    outcome: str  # added | no-elimination | target-fails | expanded
    eliminated: tuple[EntityRef, ...] = ()

    def __str__(self) -> str:
        text = f"[{self.phase}] {self.entity}: {self.prop} -> {self.outcome}"
        if self.eliminated:
            text += " (rules out " + ", ".join(map(str, self.eliminated)) + ")"
        return text


@dataclass
class RegResult:
    description: Description
    unresolved_distractors: dict[EntityRef, frozenset[EntityRef]]
    counters_snapshot: dict[str, QueryCounter]
    trace: list[TraceEvent] = field(default_factory=list)

    def discriminating(self, entity: EntityRef) -> bool:
        return not self.unresolved_distractors[entity]


def order(props: Iterable[BoundProperty], catalog: Sequence[Formula]) -> list[BoundProperty]:
    """Stable sort by catalog preference; unknown predicates go last."""
    rank = {f.predicate: i for i, f in enumerate(catalog)}
    return sorted(props, key=lambda p: rank.get(p.predicate, len(rank)))


def cross_bindings(
    formula: Formula,
    bindings: Mapping[str, EntityRef],
    consultants: ConsultantSet,
    target: EntityRef,
) -> list[Bindings]:
    """Ground all but one unbound variable, leaving one of the target's type free.

    Fillers are drawn from the whole world model, never the target itself.
    """
    unbound = find_unbound(formula, bindings)
    target_type = consultants.type_of(target)
    world = [e for e in consultants.entities() if e != target]
    out = []
    for free, free_type in unbound:
        if free_type != target_type:
            continue
        others = [(v, t) for v, t in unbound if v != free]
        pools = [[e for e in world if consultants.type_of(e) == t] for _, t in others]
        for combo in itertools.product(*pools):
            out.append(Bindings(bindings).union(dict(zip((v for v, _ in others), combo))))
    return out


def stm_apply(
    consultants: ConsultantSet,
    entity: EntityRef,
    formula: Formula,
    bindings: Mapping[str, EntityRef],
) -> float:
    """Check ``entity``'s buffer first; query LTM only on a miss."""
    owner = consultants.consultant_of(entity)
    prop = BoundProperty(formula, Bindings(bindings))
    if owner.stm_holds(entity, prop):
        owner.counter.stm_hits += 1
        return 1.0
    owner.counter.stm_misses += 1
    return consultants.apply(entity, formula, bindings)


def sd_pia_stm_h(
    target: EntityRef,
    consultants: ConsultantSet,
    config: RegConfig = RegConfig(),
    trace: Optional[list[TraceEvent]] = None,
) -> tuple[tuple[BoundProperty, ...], list[EntityRef]]:
    distractors = [e for e in consultants.entities() if e != target]
    if not config.stm_enabled:
        return (), distractors
    owner = consultants.consultant_of(target)
    cached = owner.stm_contents(target)
    owner.counter.stm_fetches += 1
    sub: list[BoundProperty] = []
    for prop in order(cached, owner.constraints()):
        if not distractors:
            break
        ruled_out = [
            x
            for x in distractors
            if stm_apply(consultants, x, prop.formula, rebind(prop.bindings, target, x)) < config.tau_dph
        ]
        if ruled_out:
            if prop not in sub:
                sub.append(prop)
            distractors = [x for x in distractors if x not in ruled_out]
            _log(trace, target, "stm-h", prop, "added", ruled_out)
        else:
            _log(trace, target, "stm-h", prop, "no-elimination")
    return tuple(sub), distractors


def sd_pia_h(
    target: EntityRef,
    consultants: ConsultantSet,
    remaining: Iterable[EntityRef],
    partial: Iterable[BoundProperty] = (),
    config: RegConfig = RegConfig(),
    trace: Optional[list[TraceEvent]] = None,
) -> tuple[BoundProperty, ...]:
    return _helper(target, consultants, remaining, partial, config, trace)[0]


def _helper(target, consultants, remaining, partial, config, trace):
    sub = list(partial)
    distractors = list(remaining)
    owner = consultants.consultant_of(target)
    used = {p.predicate for p in sub}
    pending: list[tuple[Formula, Bindings]] = [
        (f, Bindings()) for f in owner.constraints() if f.predicate not in used
    ]
    tau = config.tau_dph
    while distractors and pending:
        formula, bindings = pending.pop(0)
        unbound = find_unbound(formula, bindings)
        if len(unbound) > 1:
            expansions = cross_bindings(formula, bindings, consultants, target)
            pending[:0] = [(formula, b) for b in expansions]
            _log(trace, target, "helper", BoundProperty(formula, bindings), "expanded")
            continue
        if not unbound:
            continue
        free = unbound[0][0]
        bound = bindings.bind(free, target)
        prop = BoundProperty(formula, bound)
        if not consultants.apply(target, formula, bound) > tau:
            _log(trace, target, "helper", prop, "target-fails")
            continue
        if config.populate_stm:
            consultants.consultant_of(target).stm_insert(target, prop)
        ruled_out = []
        for x in distractors:
            as_x = bindings.bind(free, x)
            p = consultants.apply(x, formula, as_x)
            if p < tau:
                ruled_out.append(x)
            elif p > tau and config.populate_stm and config.populate_distractors:
                consultants.consultant_of(x).stm_insert(x, BoundProperty(formula, as_x))
        if ruled_out:
            if prop not in sub:
                sub.append(prop)
            distractors = [x for x in distractors if x not in ruled_out]
            _log(trace, target, "helper", prop, "added", ruled_out)
        else:
            _log(trace, target, "helper", prop, "no-elimination")
    return tuple(sub), distractors


def sd_pia(
    target: EntityRef,
    consultants: ConsultantSet,
    config: RegConfig = RegConfig(),
) -> RegResult:
    consultants.consultant_of(target)
    before = consultants.counters()
    trace: list[TraceEvent] = []
    description: Description = {}
    unresolved: dict[EntityRef, frozenset[EntityRef]] = {}
    queue = [target]
    queued = {target}
    while queue:
        current = queue.pop(0)
        partial, remaining = sd_pia_stm_h(current, consultants, config, trace)
        sub, left = _helper(current, consultants, remaining, partial, config, trace)
        description[current] = sub
        unresolved[current] = frozenset(left)
        for entity in involved_entities(sub):
            if entity not in description and entity not in queued:
                queue.append(entity)
                queued.add(entity)
    after = consultants.counters()
    deltas = {cid: after[cid] - before[cid] for cid in after}
    return RegResult(description, unresolved, deltas, trace)


def dist_pia(
    target: EntityRef,
    consultants: ConsultantSet,
    config: RegConfig = RegConfig(),
) -> RegResult:
    """Baseline: the same loop with no STM reads and no STM writes."""
    return sd_pia(target, consultants, replace(config, stm_enabled=False, populate_stm=False))


def _log(trace, entity, phase, prop, outcome, eliminated=()):
    if trace is not None:
        trace.append(TraceEvent(entity, phase, str(prop), outcome, tuple(eliminated)))
