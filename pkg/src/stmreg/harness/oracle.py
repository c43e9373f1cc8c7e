"""Exhaustive search for minimal discriminating property sets (test oracle).

Reads fact tables directly so that query counters are left untouched, and
enumerates relational groundings on its own rather than through
``reg.cross_bindings``.
"""

from __future__ import annotations

import itertools

from ..consultant import ConsultantSet
from ..core import Bindings, BoundProperty, EntityRef, StmRegError
from ..reg import RegConfig

MAX_ENTITIES = 8
MAX_CATALOG = 10


class OracleLimitError(StmRegError):
    pass


def candidate_properties(target: EntityRef, consultants: ConsultantSet) -> list[BoundProperty]:
    """Every grounding of the target consultant's catalog that mentions the target
    in a slot of its type, with other slots filled by non-target entities."""
    world = consultants.entities()
    target_type = consultants.type_of(target)
    out: list[BoundProperty] = []
    for formula in consultants.consultant_of(target).constraints():
        for slot, (name, typ) in enumerate(formula.variables):
            if typ != target_type:
                continue
            fillers = []
            for i, (_, other_type) in enumerate(formula.variables):
                if i == slot:
                    fillers.append([target])
                else:
                    fillers.append([e for e in world if e != target and consultants.type_of(e) == other_type])
            for combo in itertools.product(*fillers):
                prop = BoundProperty(formula, Bindings(zip(formula.names, combo)))
                if prop not in out:
                    out.append(prop)
    return out


def _swap(prop: BoundProperty, target: EntityRef, other: EntityRef) -> Bindings:
    # only the target's own slot(s) are rewritten; fillers never equal the target
    return Bindings({k: (other if v == target else v) for k, v in prop.bindings.items()})


def elimination_masks(
    target: EntityRef, consultants: ConsultantSet, config: RegConfig = RegConfig()
) -> tuple[list[EntityRef], list[tuple[BoundProperty, int]]]:
    """Distractors, and for each property holding for the target the bitmask of
    distractors it rules out."""
    tau = config.tau_dph
    distractors = [e for e in consultants.entities() if e != target]
    holding = []
    for prop in candidate_properties(target, consultants):
        if not consultants.lookup(target, prop.formula, prop.bindings) > tau:
            continue
        mask = 0
        for bit, x in enumerate(distractors):
            if consultants.lookup(x, prop.formula, _swap(prop, target, x)) < tau:
                mask |= 1 << bit
        holding.append((prop, mask))
    return distractors, holding


def brute_force_oracle(
    target: EntityRef, consultants: ConsultantSet, config: RegConfig = RegConfig()
) -> list[frozenset[BoundProperty]]:
    """All inclusion-minimal property sets that rule out every distractor.

    ``[frozenset()]`` when there are no distractors; ``[]`` when no set works.
    """
    consultants.consultant_of(target)
    if len(consultants.entities()) > MAX_ENTITIES:
        raise OracleLimitError(f"oracle limited to {MAX_ENTITIES} entities")
    if len(consultants.consultant_of(target).constraints()) > MAX_CATALOG:
        raise OracleLimitError(f"oracle limited to catalogs of {MAX_CATALOG} formulas")
    distractors, holding = elimination_masks(target, consultants, config)
    full = (1 << len(distractors)) - 1
    if full == 0:
        return [frozenset()]
    useful = [(p, m) for p, m in holding if m]
    union = 0
    for _, m in useful:
        union |= m
    if union != full:
        return []
    found: list[tuple[int, frozenset[BoundProperty]]] = []
    found_idx: list[frozenset[int]] = []
    # a minimal cover never needs more members than there are distractors
    for size in range(1, len(distractors) + 1):
        for combo in itertools.combinations(range(len(useful)), size):
            idx = frozenset(combo)
            if any(prev <= idx for prev in found_idx):
                continue
            mask = 0
            for i in combo:
                mask |= useful[i][1]
            if mask == full:
                found_idx.append(idx)
                found.append((size, frozenset(useful[i][0] for i in combo)))
    return [s for _, s in sorted(found, key=lambda t: (t[0], sorted(map(str, t[1]))))]


def discriminates(
    props: set[BoundProperty] | frozenset[BoundProperty],
    target: EntityRef,
    consultants: ConsultantSet,
    config: RegConfig = RegConfig(),
) -> bool:
    """Direct fact-table check that ``props`` hold for the target and rule out everyone else."""
    tau = config.tau_dph
    for prop in props:
        if not consultants.lookup(target, prop.formula, prop.bindings) > tau:
            return False
    for x in consultants.entities():
        if x == target:
            continue
        if not any(consultants.lookup(x, p.formula, _swap(p, target, x)) < tau for p in props):
            return False
    return True
