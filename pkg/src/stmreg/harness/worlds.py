"""Random small worlds for property tests and the acceptance suite."""

from __future__ import annotations

import random
from typing import Optional

from ..buffer import BufferConfig, Clock
from ..consultant import Consultant, ConsultantSet
from ..core import Bindings, BoundProperty, EntityRef, Formula

PROBABILITIES = (0.0, 0.3, 0.7, 1.0)


def random_world(
    rng: random.Random,
    *,
    max_entities: int = 6,
    max_unary: int = 8,
    binary: bool = True,
    max_consultants: int = 2,
    buffer_config: Optional[BufferConfig] = None,
) -> ConsultantSet:
    """Up to ``max_entities`` entities split over one or more consultants.

    Every entity has type ``object``. Unary predicates are spread over the
    consultants; the first consultant also advertises ``rel(X,Y)`` when
    ``binary`` is set. Fact probabilities are drawn from {0, 0.3, 0.7, 1}
    for every entity in the world, including entities of other consultants.
    """
    n_entities = rng.randint(1, max_entities)
    n_consultants = rng.randint(1, min(max_consultants, n_entities))
    owners = sorted(rng.randrange(n_consultants) for _ in range(n_entities))
    # every consultant owns at least one entity
    for i in range(n_consultants):
        owners[i] = i
    owners.sort()
    ids = [f"c{i}" for i in range(n_consultants)]
    domains = {cid: [] for cid in ids}
    for owner in owners:
        cid = ids[owner]
        domains[cid].append(len(domains[cid]) + 1)
    world = [EntityRef(cid, i) for cid in ids for i in domains[cid]]

    n_unary = rng.randint(1, max_unary)
    catalogs: dict[str, list[Formula]] = {cid: [] for cid in ids}
    for k in range(n_unary):
        catalogs[ids[rng.randrange(n_consultants)]].append(Formula(f"p{k}", (("X", "object"),)))
    if binary:
        rel = Formula("rel", (("X", "object"), ("Y", "object")))
        catalogs[ids[0]].insert(rng.randint(0, len(catalogs[ids[0]])), rel)

    clock = Clock()
    consultants = []
    for cid in ids:
        facts = {}
        for formula in catalogs[cid]:
            if formula.arity == 1:
                for e in world:
                    facts[BoundProperty(formula, Bindings({"X": e}))] = rng.choice(PROBABILITIES)
            else:
                for a in world:
                    for b in world:
                        if a != b:
                            facts[BoundProperty(formula, Bindings({"X": a, "Y": b}))] = rng.choice(PROBABILITIES)
        consultants.append(
            Consultant(
                cid,
                domains[cid],
                catalogs[cid],
                facts,
                buffer_config,
                default_type="object",
                clock=clock,
            )
        )
    return ConsultantSet(consultants, clock)


def unary_predicates(world: ConsultantSet) -> list[Formula]:
    return [f for c in world for f in c.constraints() if f.arity == 1]
